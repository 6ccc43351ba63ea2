//! Overdamped 2D dynamics of disk robots, rigid rod cargo and fixed
//! obstacles, plus the noise-free counterfactual extrapolation the reward
//! engine runs.
//!
//! Units throughout: µm, s, pN. Integration is explicit Euler over substeps
//! of `dt`; one `step_action` advances a full action interval `T_a`.

pub mod boundary;
mod contacts;

pub use contacts::{resolve_contacts, robot_rod_contact, ContactForces};
pub(crate) use contacts::{contacts_into, ContactScratch};

use crate::error::{Result, SwarmError};
use crate::math::{wrap_angle, Vec2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// k_B · 301 K in pN·µm; fixes the drag closure γ = k_BT/D.
pub const KBT: f64 = 4.1557537e-3;

/// Commanded rotation per turn action (36°).
pub const TURN_ANGLE: f64 = PI / 5.0;

/// Default rod half-length, µm.
pub const ROD_HALF_LENGTH: f64 = 50.0;

/// Default rod radius, µm.
pub const ROD_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionCommand {
    Forward,
    TurnLeft,
    TurnRight,
    Stay,
}

impl ActionCommand {
    pub const ALL: [ActionCommand; 4] = [
        ActionCommand::Forward,
        ActionCommand::TurnLeft,
        ActionCommand::TurnRight,
        ActionCommand::Stay,
    ];

    pub fn index(self) -> usize {
        match self {
            ActionCommand::Forward => 0,
            ActionCommand::TurnLeft => 1,
            ActionCommand::TurnRight => 2,
            ActionCommand::Stay => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<ActionCommand> {
        Self::ALL.get(i).copied()
    }

    /// The same command in a mirror-imaged world: turns swap handedness.
    pub fn mirrored(self) -> ActionCommand {
        match self {
            ActionCommand::TurnLeft => ActionCommand::TurnRight,
            ActionCommand::TurnRight => ActionCommand::TurnLeft,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    On,
    Off,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Robot disk diameter σ, µm.
    pub robot_diameter: f64,
    /// Self-propulsion speed v0, µm/s.
    pub robot_speed: f64,
    /// Action interval T_a, s.
    pub action_duration: f64,
    /// Translational diffusion D, µm²/s.
    pub trans_diffusion: f64,
    /// Rotational diffusion D_r, rad²/s.
    pub rot_diffusion: f64,
    /// Arena width and height, µm.
    pub arena: Vec2,
    /// Integration substep, s; must divide the action interval evenly.
    pub dt: f64,
    /// Linear contact spring stiffness, pN/µm.
    pub contact_stiffness: f64,
    /// Short-range attraction between robot and robot/rod surfaces.
    pub adhesion: bool,
    /// Adhesion well depth, pN·µm; the well exerts depth/range of force.
    pub adhesion_depth: f64,
    /// Adhesion well range beyond contact, µm.
    pub adhesion_range: f64,
    /// Rod drag along its axis, pN·s/µm.
    pub gamma_par: f64,
    /// Rod drag across its axis, pN·s/µm.
    pub gamma_perp: f64,
    /// Rod rotational drag, pN·µm·s.
    pub gamma_rot: f64,
    /// Kinetic friction ratio coupling a propelled robot's axial sliding to
    /// the rod. The experimental magnitude is unknown; keep small.
    pub rod_friction: f64,
    /// Forward drift while turning, µm/s.
    pub turn_drift_speed: f64,
    /// Distance from a wall at which the inward override engages, µm.
    pub boundary_margin: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            robot_diameter: 6.0,
            robot_speed: 0.6,
            action_duration: 10.0,
            trans_diffusion: 0.03,
            rot_diffusion: 0.0025,
            arena: Vec2::new(600.0, 700.0),
            dt: 0.02,
            contact_stiffness: 0.65,
            adhesion: false,
            adhesion_depth: 0.02,
            adhesion_range: 0.5,
            gamma_par: 0.547,
            gamma_perp: 1.094,
            gamma_rot: 912.0,
            rod_friction: 0.3,
            turn_drift_speed: 0.3,
            boundary_margin: 12.0,
        }
    }
}

impl WorldConfig {
    pub fn radius(&self) -> f64 {
        0.5 * self.robot_diameter
    }

    /// Robot translational drag from the fluctuation-dissipation closure.
    pub fn gamma_robot(&self) -> f64 {
        KBT / self.trans_diffusion
    }

    /// Propulsion force at full speed, pN.
    pub fn propulsion_force(&self) -> f64 {
        self.gamma_robot() * self.robot_speed
    }

    pub fn substeps(&self) -> usize {
        (self.action_duration / self.dt).round() as usize
    }

    /// Commanded angular rate while turning, rad/s.
    pub fn turn_rate(&self) -> f64 {
        TURN_ANGLE / self.action_duration
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("robot_diameter", self.robot_diameter),
            ("robot_speed", self.robot_speed),
            ("action_duration", self.action_duration),
            ("trans_diffusion", self.trans_diffusion),
            ("rot_diffusion", self.rot_diffusion),
            ("arena.x", self.arena.x),
            ("arena.y", self.arena.y),
            ("dt", self.dt),
            ("contact_stiffness", self.contact_stiffness),
            ("gamma_par", self.gamma_par),
            ("gamma_perp", self.gamma_perp),
            ("gamma_rot", self.gamma_rot),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SwarmError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("adhesion_depth", self.adhesion_depth),
            ("adhesion_range", self.adhesion_range),
            ("rod_friction", self.rod_friction),
            ("turn_drift_speed", self.turn_drift_speed),
            ("boundary_margin", self.boundary_margin),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(SwarmError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        let fwd = self.robot_speed * self.action_duration;
        if (fwd - self.robot_diameter).abs() > 1e-9 {
            return Err(SwarmError::InvalidConfig(format!(
                "forward displacement v0*T_a = {fwd} must equal one diameter {}",
                self.robot_diameter
            )));
        }
        if self.dt > self.action_duration {
            return Err(SwarmError::InvalidConfig("dt exceeds action_duration".into()));
        }
        let steps = self.action_duration / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(SwarmError::InvalidConfig(format!(
                "action_duration/dt = {steps} must be an integer"
            )));
        }
        let stability = self.contact_stiffness * self.dt / self.gamma_robot();
        if stability >= 0.1 {
            return Err(SwarmError::InvalidConfig(format!(
                "k*dt/gamma_robot = {stability:.4} violates the stability bound < 0.1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    /// Heading angle φ, wrapped to (-π, π].
    pub phi: f64,
    /// Cached unit heading (cos φ, sin φ).
    pub u: Vec2,
    pub team: u32,
    pub active: bool,
}

impl RobotState {
    pub fn new(position: Vec2, phi: f64, team: u32) -> Self {
        let phi = wrap_angle(phi);
        RobotState { position, phi, u: Vec2::from_angle(phi), team, active: true }
    }

    pub fn set_phi(&mut self, phi: f64) {
        self.phi = wrap_angle(phi);
        self.u = Vec2::from_angle(self.phi);
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RodState {
    pub center: Vec2,
    /// Axis orientation, canonical in [0, π): the rod has no head or tail.
    pub theta: f64,
    pub half_length: f64,
    pub radius: f64,
}

impl RodState {
    pub fn new(center: Vec2, theta: f64) -> Self {
        RodState {
            center,
            theta: theta.rem_euclid(PI),
            half_length: ROD_HALF_LENGTH,
            radius: ROD_RADIUS,
        }
    }

    pub fn axis(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    pub fn endpoints(&self) -> (Vec2, Vec2) {
        let offset = self.axis() * self.half_length;
        (self.center - offset, self.center + offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub time: f64,
    pub robots: Vec<RobotState>,
    pub rods: Vec<RodState>,
    pub obstacles: Vec<Disk>,
    pub rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(robots: Vec<RobotState>, rods: Vec<RodState>, obstacles: Vec<Disk>) -> Self {
        SimState { time: 0.0, robots, rods, obstacles, rng: ChaCha8Rng::seed_from_u64(0) }
    }

    /// Attach the episode RNG: an independent ChaCha stream per episode off
    /// one master seed.
    pub fn with_seed(mut self, master_seed: u64, episode: u64) -> Self {
        self.rng = ChaCha8Rng::seed_from_u64(master_seed);
        self.rng.set_stream(episode);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.robots.iter().all(|r| {
            r.position.x.is_finite() && r.position.y.is_finite() && r.phi.is_finite()
        }) && self.rods.iter().all(|r| {
            r.center.x.is_finite() && r.center.y.is_finite() && r.theta.is_finite()
        })
    }

    pub fn active_robots(&self) -> impl Iterator<Item = (usize, &RobotState)> {
        self.robots.iter().enumerate().filter(|(_, r)| r.active)
    }
}

/// Advance one full action interval.
///
/// `actions` carries one entry per robot; entries for inactive robots are
/// ignored. With noise on, Gaussian increments of variance 2D·dt per
/// position axis and 2D_r·dt in orientation are drawn per substep, in
/// ascending robot order (dx, dy, dφ).
pub fn step_action(
    state: &SimState,
    actions: &[ActionCommand],
    cfg: &WorldConfig,
    noise: Noise,
) -> Result<SimState> {
    let mut next = state.clone();
    advance_in_place(&mut next, actions, cfg, noise)?;
    Ok(next)
}

pub(crate) fn advance_in_place(
    state: &mut SimState,
    actions: &[ActionCommand],
    cfg: &WorldConfig,
    noise: Noise,
) -> Result<()> {
    if actions.len() != state.robots.len() {
        return Err(SwarmError::ShapeMismatch(format!(
            "{} actions for {} robots",
            actions.len(),
            state.robots.len()
        )));
    }
    if !state.is_finite() {
        return Err(SwarmError::InvalidState("non-finite state".into()));
    }

    let n = state.robots.len();
    let mut scratch = ContactScratch::new(n, state.rods.len());

    // Remaining commanded path / rotation for the hardware caps. Both run
    // out exactly at the end of the interval under the default config.
    let mut prop_budget = vec![0.0f64; n];
    let mut turn_budget = vec![0.0f64; n];
    for i in 0..n {
        match actions[i] {
            ActionCommand::Forward => prop_budget[i] = cfg.robot_diameter,
            ActionCommand::TurnLeft | ActionCommand::TurnRight => turn_budget[i] = TURN_ANGLE,
            ActionCommand::Stay => {}
        }
    }

    let dt = cfg.dt;
    let pos_sd = (2.0 * cfg.trans_diffusion * dt).sqrt();
    let rot_sd = (2.0 * cfg.rot_diffusion * dt).sqrt();
    let mobility_dt = dt / cfg.gamma_robot();
    let turn_step = cfg.turn_rate() * dt;
    let drift_step = cfg.turn_drift_speed * dt;
    let prop_step = cfg.robot_speed * dt;
    let rmin = cfg.radius();
    let xmax = cfg.arena.x - rmin;
    let ymax = cfg.arena.y - rmin;

    let SimState { robots, rods, obstacles, rng, time } = state;

    for _ in 0..cfg.substeps() {
        contacts_into(robots, rods, obstacles, cfg, &mut scratch);
        apply_rod_friction(robots, rods, actions, &prop_budget, &turn_budget, cfg, &mut scratch);

        for i in 0..n {
            if !robots[i].active {
                continue;
            }
            let (gx, gy, gphi) = if noise == Noise::On {
                let g0: f64 = StandardNormal.sample(rng);
                let g1: f64 = StandardNormal.sample(rng);
                let g2: f64 = StandardNormal.sample(rng);
                (pos_sd * g0, pos_sd * g1, rot_sd * g2)
            } else {
                (0.0, 0.0, 0.0)
            };
            let r = &mut robots[i];
            let mut disp = scratch.robot_force[i] * mobility_dt;
            let mut dphi = gphi;
            match actions[i] {
                ActionCommand::Forward => {
                    if prop_budget[i] > 0.0 {
                        let step = prop_step.min(prop_budget[i]);
                        disp += r.u * step;
                        prop_budget[i] -= step;
                    }
                }
                ActionCommand::TurnLeft | ActionCommand::TurnRight => {
                    if turn_budget[i] > 0.0 {
                        let dang = turn_step.min(turn_budget[i]);
                        dphi += if actions[i] == ActionCommand::TurnLeft { dang } else { -dang };
                        turn_budget[i] -= dang;
                        disp += r.u * drift_step;
                    }
                }
                ActionCommand::Stay => {}
            }
            r.position.x = (r.position.x + disp.x + gx).clamp(rmin, xmax);
            r.position.y = (r.position.y + disp.y + gy).clamp(rmin, ymax);
            if dphi != 0.0 {
                r.phi = wrap_angle(r.phi + dphi);
                r.u = Vec2::from_angle(r.phi);
            }
        }

        for (ri, rod) in rods.iter_mut().enumerate() {
            rod_update_in_place(rod, scratch.rod_force[ri], scratch.rod_torque[ri], dt, cfg);
            rod.center.x = rod.center.x.clamp(rod.radius, cfg.arena.x - rod.radius);
            rod.center.y = rod.center.y.clamp(rod.radius, cfg.arena.y - rod.radius);
        }

        *time += dt;
    }
    Ok(())
}

/// Kinetic friction dragging the rod along its axis under propelled robots
/// that slide on it. Not part of the spring contact contract; the magnitude
/// is a config guess.
fn apply_rod_friction(
    robots: &[RobotState],
    rods: &[RodState],
    actions: &[ActionCommand],
    prop_budget: &[f64],
    turn_budget: &[f64],
    cfg: &WorldConfig,
    scratch: &mut ContactScratch,
) {
    if cfg.rod_friction == 0.0 {
        return;
    }
    let coupling = cfg.rod_friction * cfg.gamma_robot();
    for c in 0..scratch.rod_contacts.len() {
        let (i, ri, point) = scratch.rod_contacts[c];
        let speed = match actions[i] {
            ActionCommand::Forward if prop_budget[i] > 0.0 => cfg.robot_speed,
            ActionCommand::TurnLeft | ActionCommand::TurnRight if turn_budget[i] > 0.0 => {
                cfg.turn_drift_speed
            }
            _ => continue,
        };
        let axis = rods[ri].axis();
        let v_par = robots[i].u.dot(axis) * speed;
        let f = axis * (coupling * v_par);
        scratch.rod_force[ri] += f;
        scratch.rod_torque[ri] += (point - rods[ri].center).cross(f);
        scratch.robot_force[i] += -f;
    }
}

/// Overdamped rigid-body update for the rod over one substep.
pub fn rod_update(
    rod: &RodState,
    net_force: Vec2,
    net_torque: f64,
    dt: f64,
    cfg: &WorldConfig,
) -> Result<RodState> {
    if !(cfg.gamma_par > 0.0 && cfg.gamma_perp > 0.0 && cfg.gamma_rot > 0.0) {
        return Err(SwarmError::InvalidConfig("rod drag coefficients must be positive".into()));
    }
    if !(net_force.x.is_finite() && net_force.y.is_finite() && net_torque.is_finite()) {
        return Err(SwarmError::InvalidState("non-finite force or torque".into()));
    }
    let mut next = *rod;
    rod_update_in_place(&mut next, net_force, net_torque, dt, cfg);
    Ok(next)
}

fn rod_update_in_place(rod: &mut RodState, force: Vec2, torque: f64, dt: f64, cfg: &WorldConfig) {
    let axis = rod.axis();
    let f_par = axis * force.dot(axis);
    let f_perp = force - f_par;
    rod.center += (f_par * (1.0 / cfg.gamma_par) + f_perp * (1.0 / cfg.gamma_perp)) * dt;
    rod.theta = (rod.theta + torque / cfg.gamma_rot * dt).rem_euclid(PI);
}

/// Noise-free extrapolation of the last action interval, optionally with one
/// robot removed. This is the virtual world the counterfactual rewards
/// compare against; it never touches the episode RNG.
pub fn extrapolate_counterfactual(
    state_prev: &SimState,
    actions: &[ActionCommand],
    exclude: Option<usize>,
    cfg: &WorldConfig,
) -> Result<SimState> {
    let mut world = state_prev.clone();
    if let Some(i) = exclude {
        let robot = world
            .robots
            .get_mut(i)
            .ok_or_else(|| SwarmError::ShapeMismatch(format!("unknown robot id {i}")))?;
        robot.active = false;
    }
    advance_in_place(&mut world, actions, cfg, Noise::Off)?;
    Ok(world)
}
