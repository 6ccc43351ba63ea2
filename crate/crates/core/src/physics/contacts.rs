//! Pairwise spring contacts: robot-robot, robot-rod, robot-obstacle and
//! rod-obstacle. The rod is a spherocylinder; contact points are the nearest
//! points on its axis segment.

use super::{Disk, RobotState, RodState, SimState, WorldConfig};
use crate::math::{point_segment, Vec2};

/// Force and torque accumulators from one evaluation of the contact network.
#[derive(Debug, Clone)]
pub struct ContactForces {
    pub robot_force: Vec<Vec2>,
    pub rod_force: Vec<Vec2>,
    /// Torque about each rod's center; positive is counterclockwise.
    pub rod_torque: Vec<f64>,
}

pub(crate) struct ContactScratch {
    pub robot_force: Vec<Vec2>,
    pub rod_force: Vec<Vec2>,
    pub rod_torque: Vec<f64>,
    /// (robot, rod, closest axis point) for every overlapping robot-rod pair;
    /// consumed by the rod friction coupling.
    pub rod_contacts: Vec<(usize, usize, Vec2)>,
    active: Vec<usize>,
    rod_ends: Vec<(Vec2, Vec2)>,
}

impl ContactScratch {
    pub fn new(robots: usize, rods: usize) -> Self {
        ContactScratch {
            robot_force: vec![Vec2::ZERO; robots],
            rod_force: vec![Vec2::ZERO; rods],
            rod_torque: vec![0.0; rods],
            rod_contacts: Vec::new(),
            active: Vec::with_capacity(robots),
            rod_ends: vec![(Vec2::ZERO, Vec2::ZERO); rods],
        }
    }
}

/// Spring force and torque a single robot currently exerts on a rod, or
/// None when the surfaces do not touch. Matches the pair law used by
/// `resolve_contacts`.
pub fn robot_rod_contact(
    robot: &RobotState,
    rod: &RodState,
    cfg: &WorldConfig,
) -> Option<(Vec2, f64)> {
    let contact = cfg.radius() + rod.radius;
    let (e0, e1) = rod.endpoints();
    let (d_sq, q) = point_segment(robot.position, e0, e1);
    if d_sq >= contact * contact {
        return None;
    }
    let dist = d_sq.sqrt();
    let n_hat =
        if dist > 1e-12 { (robot.position - q) * (1.0 / dist) } else { rod.axis().perp() };
    let on_rod = n_hat * (-(cfg.contact_stiffness * (contact - dist)));
    Some((on_rod, (q - rod.center).cross(on_rod)))
}

/// Contact forces for `state` as a standalone evaluation.
pub fn resolve_contacts(state: &SimState, cfg: &WorldConfig) -> ContactForces {
    let mut scratch = ContactScratch::new(state.robots.len(), state.rods.len());
    contacts_into(&state.robots, &state.rods, &state.obstacles, cfg, &mut scratch);
    ContactForces {
        robot_force: scratch.robot_force,
        rod_force: scratch.rod_force,
        rod_torque: scratch.rod_torque,
    }
}

pub(crate) fn contacts_into(
    robots: &[RobotState],
    rods: &[RodState],
    obstacles: &[Disk],
    cfg: &WorldConfig,
    scratch: &mut ContactScratch,
) {
    for f in scratch.robot_force.iter_mut() {
        *f = Vec2::ZERO;
    }
    for f in scratch.rod_force.iter_mut() {
        *f = Vec2::ZERO;
    }
    for t in scratch.rod_torque.iter_mut() {
        *t = 0.0;
    }
    scratch.rod_contacts.clear();
    scratch.active.clear();
    scratch
        .active
        .extend(robots.iter().enumerate().filter(|(_, r)| r.active).map(|(i, _)| i));
    for (ri, rod) in rods.iter().enumerate() {
        scratch.rod_ends[ri] = rod.endpoints();
    }

    let sigma = cfg.robot_diameter;
    let k = cfg.contact_stiffness;
    let adh_force = if cfg.adhesion && cfg.adhesion_range > 0.0 {
        cfg.adhesion_depth / cfg.adhesion_range
    } else {
        0.0
    };
    let rr_reach = if adh_force > 0.0 { sigma + cfg.adhesion_range } else { sigma };
    let rr_reach_sq = rr_reach * rr_reach;

    for a in 0..scratch.active.len() {
        let i = scratch.active[a];
        let pi = robots[i].position;

        for b in a + 1..scratch.active.len() {
            let j = scratch.active[b];
            let d = pi - robots[j].position;
            let d_sq = d.norm_sq();
            if d_sq >= rr_reach_sq {
                continue;
            }
            let dist = d_sq.sqrt();
            let n_hat = if dist > 1e-12 { d * (1.0 / dist) } else { Vec2::new(1.0, 0.0) };
            let f = if dist < sigma {
                n_hat * (k * (sigma - dist))
            } else {
                n_hat * (-adh_force)
            };
            scratch.robot_force[i] += f;
            scratch.robot_force[j] += -f;
        }

        for (ri, rod) in rods.iter().enumerate() {
            let (e0, e1) = scratch.rod_ends[ri];
            let contact = cfg.radius() + rod.radius;
            let reach = if adh_force > 0.0 { contact + cfg.adhesion_range } else { contact };
            let (d_sq, q) = point_segment(pi, e0, e1);
            if d_sq >= reach * reach {
                continue;
            }
            let dist = d_sq.sqrt();
            let n_hat =
                if dist > 1e-12 { (pi - q) * (1.0 / dist) } else { rod.axis().perp() };
            let f = if dist < contact {
                scratch.rod_contacts.push((i, ri, q));
                n_hat * (k * (contact - dist))
            } else {
                n_hat * (-adh_force)
            };
            scratch.robot_force[i] += f;
            scratch.rod_force[ri] += -f;
            scratch.rod_torque[ri] += (q - rod.center).cross(-f);
        }

        for obs in obstacles {
            let contact = cfg.radius() + obs.radius;
            let d = pi - obs.center;
            let d_sq = d.norm_sq();
            if d_sq >= contact * contact {
                continue;
            }
            let dist = d_sq.sqrt();
            let n_hat = if dist > 1e-12 { d * (1.0 / dist) } else { Vec2::new(1.0, 0.0) };
            scratch.robot_force[i] += n_hat * (k * (contact - dist));
        }
    }

    for (ri, rod) in rods.iter().enumerate() {
        let (e0, e1) = scratch.rod_ends[ri];
        for obs in obstacles {
            let contact = rod.radius + obs.radius;
            let (d_sq, q) = point_segment(obs.center, e0, e1);
            if d_sq >= contact * contact {
                continue;
            }
            let dist = d_sq.sqrt();
            let n_hat =
                if dist > 1e-12 { (q - obs.center) * (1.0 / dist) } else { rod.axis().perp() };
            let f = n_hat * (k * (contact - dist));
            scratch.rod_force[ri] += f;
            scratch.rod_torque[ri] += (q - rod.center).cross(f);
        }
    }
}
