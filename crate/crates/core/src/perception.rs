//! Cone-sensor observations: each robot reads inverse-distance-weighted
//! occupancy per detection cone and per species (robots, rod, target,
//! obstacles).

use crate::math::{wrap_angle, Vec2};
use crate::physics::{RobotState, SimState};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Points placed on each obstacle rim for the obstacle channel.
pub const OBSTACLE_RIM_POINTS: usize = 36;

/// Default chain discretization for rod and target channels.
pub const CHAIN_POINTS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeLayout {
    pub cones: usize,
    /// Field of view centered on the heading, rad.
    pub fov: f64,
}

impl ConeLayout {
    /// Five 36° cones covering the front half-plane.
    pub fn rotation() -> Self {
        ConeLayout { cones: 5, fov: PI }
    }

    /// Ten 36° cones covering the full circle.
    pub fn transport() -> Self {
        ConeLayout { cones: 10, fov: TAU }
    }

    pub fn width(&self) -> f64 {
        self.fov / self.cones as f64
    }

    /// Cone index for a bearing relative to the heading, or None when out of
    /// view. Cone 0 starts at the clockwise edge; a bearing exactly on an
    /// interior boundary belongs to the counterclockwise cone.
    pub fn cone_of(&self, bearing: f64) -> Option<usize> {
        let mut b = wrap_angle(bearing);
        if b == PI {
            b = -PI;
        }
        let half = self.fov / 2.0;
        if self.fov < TAU && !(-half..half).contains(&b) {
            return None;
        }
        let idx = ((b + half) / self.width()).floor();
        Some((idx.max(0.0) as usize).min(self.cones - 1))
    }
}

/// Per-cone readings o^l = min(Σ_j min(σ/|r_j|, 1), 1) over `points`.
///
/// `points` must not contain the focal robot itself; a point coincident
/// with the focal position contributes its cap value 1.
pub fn encode_cones(
    focal: &RobotState,
    points: &[Vec2],
    layout: &ConeLayout,
    sigma: f64,
) -> Vec<f64> {
    debug_assert!(sigma > 0.0);
    let mut out = vec![0.0f64; layout.cones];
    for p in points {
        let d = *p - focal.position;
        let Some(l) = layout.cone_of(d.y.atan2(d.x) - focal.phi) else {
            continue;
        };
        let dist = d.norm();
        out[l] += if dist == 0.0 { 1.0 } else { (sigma / dist).min(1.0) };
    }
    for v in out.iter_mut() {
        *v = v.min(1.0);
    }
    out
}

/// `n` points spread uniformly from tip to tip of an axis through `center`.
pub fn discretize_chain(center: Vec2, theta: f64, half_length: f64, n: usize) -> Vec<Vec2> {
    assert!(n >= 2, "chain needs at least the two endpoints");
    let axis = Vec2::from_angle(theta);
    let start = center - axis * half_length;
    let step = axis * (2.0 * half_length / (n - 1) as f64);
    (0..n).map(|i| start + step * i as f64).collect()
}

/// The slice of a task definition that perception needs.
#[derive(Debug, Clone)]
pub struct ObservationSpec {
    pub layout: ConeLayout,
    /// Index of the rod the focal robot's team works on.
    pub rod: usize,
    /// Target pose (center, axis angle) when the task has one.
    pub target: Option<(Vec2, f64)>,
    pub see_obstacles: bool,
    pub chain_points: usize,
}

impl ObservationSpec {
    pub fn species_widths(&self) -> Vec<usize> {
        let c = self.layout.cones;
        let mut widths = vec![c, c];
        if self.target.is_some() {
            widths.push(c);
        }
        if self.see_obstacles {
            widths.push(c);
        }
        widths
    }

    pub fn width(&self) -> usize {
        self.species_widths().iter().sum()
    }
}

/// Full observation for one robot: species-major blocks in the fixed order
/// robots, rod, target, obstacles.
pub fn assemble_observation(
    focal: usize,
    state: &SimState,
    spec: &ObservationSpec,
    sigma: f64,
) -> Vec<f64> {
    let me = &state.robots[focal];
    let mut obs = Vec::with_capacity(spec.width());

    let others: Vec<Vec2> = state
        .robots
        .iter()
        .enumerate()
        .filter(|(j, r)| *j != focal && r.active)
        .map(|(_, r)| r.position)
        .collect();
    obs.extend(encode_cones(me, &others, &spec.layout, sigma));

    let rod = &state.rods[spec.rod];
    let chain = discretize_chain(rod.center, rod.theta, rod.half_length, spec.chain_points);
    obs.extend(encode_cones(me, &chain, &spec.layout, sigma));

    if let Some((center, theta)) = spec.target {
        let chain = discretize_chain(center, theta, rod.half_length, spec.chain_points);
        obs.extend(encode_cones(me, &chain, &spec.layout, sigma));
    }

    if spec.see_obstacles {
        let mut rim = Vec::with_capacity(state.obstacles.len() * OBSTACLE_RIM_POINTS);
        for disk in &state.obstacles {
            for i in 0..OBSTACLE_RIM_POINTS {
                let a = TAU * i as f64 / OBSTACLE_RIM_POINTS as f64;
                rim.push(disk.center + Vec2::from_angle(a) * disk.radius);
            }
        }
        obs.extend(encode_cones(me, &rim, &spec.layout, sigma));
    }

    obs
}

/// The observation the robot's mirror image would see: cone order reverses
/// within each species block. Applying it twice is the identity.
pub fn mirror_observation(obs: &[f64], species_widths: &[usize]) -> Vec<f64> {
    debug_assert_eq!(obs.len(), species_widths.iter().sum::<usize>());
    let mut out = Vec::with_capacity(obs.len());
    let mut start = 0;
    for &w in species_widths {
        out.extend(obs[start..start + w].iter().rev());
        start += w;
    }
    out
}
