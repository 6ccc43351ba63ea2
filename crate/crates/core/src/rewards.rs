//! Task definitions, global performance functions, and the reward engines:
//! counterfactual rewards that score each robot by what the world would have
//! done without it, plus the team and torque baselines.

use crate::error::{Result, SwarmError};
use crate::math::{angle_diff_mod_pi, point_segment, Vec2};
use crate::perception::{discretize_chain, ConeLayout, ObservationSpec, CHAIN_POINTS};
use crate::physics::{
    extrapolate_counterfactual, robot_rod_contact, ActionCommand, SimState, WorldConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Center-to-center rod/target distance below which transport succeeds, µm.
pub const SUCCESS_THRESHOLD: f64 = 8.0;

/// Raw reward added for every agent on the success step.
pub const SUCCESS_BONUS: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TaskKind {
    /// Rotate the rod; no preferred direction.
    Rotation,
    /// Rotate the rod in a fixed sense: +1 counterclockwise, -1 clockwise.
    DirectedRotation { sign: f64 },
    /// Push the rod onto a target pose.
    Transport {
        target_center: Vec2,
        target_theta: f64,
    },
    /// One rod per team, each with its own commanded sense.
    MultiRotation { signs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Adds the obstacle observation channel.
    pub observe_obstacles: bool,
    /// Episode cap in actions.
    pub episode_len: usize,
    pub success_threshold: f64,
    pub success_bonus: f64,
    pub chain_points: usize,
}

impl TaskSpec {
    pub fn rotation() -> Self {
        TaskSpec {
            kind: TaskKind::Rotation,
            observe_obstacles: false,
            episode_len: 100,
            success_threshold: SUCCESS_THRESHOLD,
            success_bonus: SUCCESS_BONUS,
            chain_points: CHAIN_POINTS,
        }
    }

    pub fn transport(target_center: Vec2, target_theta: f64) -> Self {
        TaskSpec {
            kind: TaskKind::Transport { target_center, target_theta },
            observe_obstacles: false,
            episode_len: 1000,
            success_threshold: SUCCESS_THRESHOLD,
            success_bonus: SUCCESS_BONUS,
            chain_points: CHAIN_POINTS,
        }
    }

    pub fn team_count(&self) -> usize {
        match &self.kind {
            TaskKind::MultiRotation { signs } => signs.len(),
            _ => 1,
        }
    }

    /// Rod index a team works on.
    pub fn rod_of_team(&self, team: usize) -> usize {
        match self.kind {
            TaskKind::MultiRotation { .. } => team,
            _ => 0,
        }
    }

    pub fn is_success(&self, potential: f64) -> bool {
        matches!(self.kind, TaskKind::Transport { .. }) && potential < self.success_threshold
    }

    /// What a robot of `team` perceives.
    pub fn observation_spec(&self, team: usize) -> ObservationSpec {
        let (layout, target) = match &self.kind {
            TaskKind::Transport { target_center, target_theta } => {
                (ConeLayout::transport(), Some((*target_center, *target_theta)))
            }
            _ => (ConeLayout::rotation(), None),
        };
        ObservationSpec {
            layout,
            rod: self.rod_of_team(team),
            target,
            see_obstacles: self.observe_obstacles,
            chain_points: self.chain_points,
        }
    }

    pub fn observation_width(&self) -> usize {
        self.observation_spec(0).width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Counterfactual,
    Team,
    Torque,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Reward scale β; sized so |r| mostly lands in 0-1.
    pub beta: f64,
    /// Torque-baseline scale per pN·µm of contact torque.
    pub beta_torque: f64,
    /// Rescale factor clamp.
    pub c_max: f64,
    /// Below this |P_t^v| the rescale factor collapses to 1.
    pub epsilon_p: f64,
    /// Surface gap beyond which an agent provably cannot reach the rod or
    /// any other body within one action; its counterfactual world is then
    /// the all-agents one and is not re-simulated. `inf` disables the
    /// shortcut.
    pub isolation_reach: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            beta: 20.0,
            beta_torque: 0.25,
            c_max: 10.0,
            epsilon_p: 1e-9,
            isolation_reach: 60.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(SwarmError::InvalidConfig("beta must be positive".into()));
        }
        if !(self.beta_torque > 0.0) {
            return Err(SwarmError::InvalidConfig("beta_torque must be positive".into()));
        }
        if !(self.c_max >= 1.0) {
            return Err(SwarmError::InvalidConfig("c_max must be >= 1".into()));
        }
        if !(self.epsilon_p > 0.0) {
            return Err(SwarmError::InvalidConfig("epsilon_p must be positive".into()));
        }
        if !(self.isolation_reach > 0.0) {
            return Err(SwarmError::InvalidConfig("isolation_reach must be positive".into()));
        }
        Ok(())
    }
}

/// Angular progress of the rod over one action, modulo the rod's head-tail
/// symmetry. Unsigned by default; `direction` = ±1 signs it for tasks with
/// a commanded sense.
pub fn rotation_performance(theta_prev: f64, theta_now: f64, direction: Option<f64>) -> f64 {
    let d = angle_diff_mod_pi(theta_now, theta_prev);
    match direction {
        None => d.abs(),
        Some(sign) => sign.signum() * d,
    }
}

/// Mean segment distance v between the rod and the target silhouette,
/// minimized over the two ways of numbering the rod's segments.
pub fn transport_potential(
    rod_center: Vec2,
    rod_theta: f64,
    half_length: f64,
    target: (Vec2, f64),
    segments: usize,
) -> f64 {
    let rod_chain = discretize_chain(rod_center, rod_theta, half_length, segments);
    let tgt_chain = discretize_chain(target.0, target.1, half_length, segments);
    let mut fwd = 0.0;
    let mut rev = 0.0;
    for k in 0..segments {
        fwd += (rod_chain[k] - tgt_chain[k]).norm();
        rev += (rod_chain[segments - 1 - k] - tgt_chain[k]).norm();
    }
    fwd.min(rev) / segments as f64
}

/// P_t for transport: how much closer the rod got.
pub fn transport_performance(v_prev: f64, v_now: f64) -> f64 {
    v_prev - v_now
}

/// Heading-alignment proxy |Σ r_i × u_i| about the first rod's center.
pub fn geometric_torque(state: &SimState) -> f64 {
    let center = state.rods[0].center;
    state
        .robots
        .iter()
        .filter(|r| r.active)
        .map(|r| (r.position - center).cross(r.u))
        .sum::<f64>()
        .abs()
}

/// Global performance per team between two bracketing states.
pub fn team_performances(prev: &SimState, now: &SimState, task: &TaskSpec) -> Vec<f64> {
    match &task.kind {
        TaskKind::Rotation => {
            vec![rotation_performance(prev.rods[0].theta, now.rods[0].theta, None)]
        }
        TaskKind::DirectedRotation { sign } => {
            vec![rotation_performance(prev.rods[0].theta, now.rods[0].theta, Some(*sign))]
        }
        TaskKind::MultiRotation { signs } => signs
            .iter()
            .enumerate()
            .map(|(t, sign)| {
                rotation_performance(prev.rods[t].theta, now.rods[t].theta, Some(*sign))
            })
            .collect(),
        TaskKind::Transport { target_center, target_theta } => {
            let target = (*target_center, *target_theta);
            let v_prev = transport_potential(
                prev.rods[0].center,
                prev.rods[0].theta,
                prev.rods[0].half_length,
                target,
                task.chain_points,
            );
            let v_now = transport_potential(
                now.rods[0].center,
                now.rods[0].theta,
                now.rods[0].half_length,
                target,
                task.chain_points,
            );
            vec![transport_performance(v_prev, v_now)]
        }
    }
}

/// Eq.-style rescale factor P_t/P_t^v, clamped, with the vanishing-
/// denominator guard.
pub fn rescale_factor(p_real: f64, p_virtual: f64, cfg: &RewardConfig) -> f64 {
    if p_virtual.abs() < cfg.epsilon_p {
        1.0
    } else {
        (p_real / p_virtual).clamp(-cfg.c_max, cfg.c_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentReward {
    /// Team performance in the virtual world without this agent.
    pub p_excluded: f64,
    /// The above rescaled into the real world's range.
    pub rescaled: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct PerformanceRecord {
    /// Per-team performance in the real (noisy) world.
    pub p_real: Vec<f64>,
    /// Per-team performance in the noise-free all-agents extrapolation.
    pub p_virtual: Vec<f64>,
    /// Indexed by robot; None for inactive or boundary-overridden robots.
    pub agents: Vec<Option<AgentReward>>,
    /// Transport success fired on this step.
    pub success: bool,
}

impl PerformanceRecord {
    pub fn rewards(&self) -> Vec<Option<f64>> {
        self.agents.iter().map(|a| a.map(|a| a.reward)).collect()
    }
}

/// True when robot `i`'s surfaces are farther than `reach` from every other
/// active robot and every rod, so nothing it does within one action can
/// reach the rest of the world.
fn is_isolated(state: &SimState, i: usize, reach: f64, cfg: &WorldConfig) -> bool {
    let me = &state.robots[i];
    let sigma = cfg.robot_diameter;
    for (j, other) in state.robots.iter().enumerate() {
        if j == i || !other.active {
            continue;
        }
        if (me.position - other.position).norm() - sigma <= reach {
            return false;
        }
    }
    for rod in &state.rods {
        let (e0, e1) = rod.endpoints();
        let (d_sq, _) = point_segment(me.position, e0, e1);
        if d_sq.sqrt() - (cfg.radius() + rod.radius) <= reach {
            return false;
        }
    }
    true
}

/// Counterfactual rewards for one action interval.
///
/// `overridden` flags boundary-overridden robots; they get no reward record.
/// The per-agent virtual worlds are independent and evaluated in parallel.
pub fn counterfactual_rewards(
    state_prev: &SimState,
    state_now: &SimState,
    actions: &[ActionCommand],
    task: &TaskSpec,
    reward_cfg: &RewardConfig,
    world_cfg: &WorldConfig,
    overridden: &[bool],
) -> Result<PerformanceRecord> {
    let n = state_prev.robots.len();
    if overridden.len() != n || actions.len() != n {
        return Err(SwarmError::ShapeMismatch(
            "actions/overridden length must match robot count".into(),
        ));
    }
    let teams = task.team_count();
    for r in &state_prev.robots {
        if (r.team as usize) >= teams {
            return Err(SwarmError::ShapeMismatch(format!(
                "robot team {} out of range for {} team(s)",
                r.team, teams
            )));
        }
    }

    let virtual_all = extrapolate_counterfactual(state_prev, actions, None, world_cfg)?;
    let p_real = team_performances(state_prev, state_now, task);
    let p_virtual = team_performances(state_prev, &virtual_all, task);

    let agents: Vec<Option<AgentReward>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Option<AgentReward>> {
            let robot = &state_prev.robots[i];
            if !robot.active || overridden[i] {
                return Ok(None);
            }
            let team = robot.team as usize;
            let p_excluded = if is_isolated(state_prev, i, reward_cfg.isolation_reach, world_cfg)
            {
                // removal provably cannot change the extrapolation
                p_virtual[team]
            } else {
                let world = extrapolate_counterfactual(state_prev, actions, Some(i), world_cfg)?;
                team_performances(state_prev, &world, task)[team]
            };
            let factor = rescale_factor(p_real[team], p_virtual[team], reward_cfg);
            let rescaled = p_excluded * factor;
            Ok(Some(AgentReward {
                p_excluded,
                rescaled,
                reward: reward_cfg.beta * (p_real[team] - rescaled),
            }))
        })
        .collect::<Result<_>>()?;

    let mut record =
        PerformanceRecord { p_real, p_virtual, agents, success: false };

    if let TaskKind::Transport { target_center, target_theta } = &task.kind {
        let rod = &state_now.rods[0];
        let v_now = transport_potential(
            rod.center,
            rod.theta,
            rod.half_length,
            (*target_center, *target_theta),
            task.chain_points,
        );
        if task.is_success(v_now) {
            record.success = true;
            for agent in record.agents.iter_mut().flatten() {
                agent.reward += task.success_bonus;
            }
        }
    }

    Ok(record)
}

/// Uniform team reward or the per-contact torque baseline.
pub fn baseline_rewards(
    mode: RewardMode,
    state_prev: &SimState,
    state_now: &SimState,
    task: &TaskSpec,
    reward_cfg: &RewardConfig,
    world_cfg: &WorldConfig,
    overridden: &[bool],
) -> Result<Vec<Option<f64>>> {
    let n = state_prev.robots.len();
    if overridden.len() != n {
        return Err(SwarmError::ShapeMismatch("overridden length must match robots".into()));
    }
    match mode {
        RewardMode::Counterfactual => Err(SwarmError::InvalidConfig(
            "counterfactual mode is not a baseline; call counterfactual_rewards".into(),
        )),
        RewardMode::Team => {
            let p_real = team_performances(state_prev, state_now, task);
            Ok(state_prev
                .robots
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    (r.active && !overridden[i])
                        .then(|| reward_cfg.beta * p_real[r.team as usize])
                })
                .collect())
        }
        RewardMode::Torque => {
            let signs: Vec<f64> = match &task.kind {
                TaskKind::Rotation => vec![1.0],
                TaskKind::DirectedRotation { sign } => vec![*sign],
                TaskKind::MultiRotation { signs } => signs.clone(),
                TaskKind::Transport { .. } => {
                    return Err(SwarmError::InvalidConfig(
                        "torque baseline applies to rotation tasks only".into(),
                    ))
                }
            };
            Ok(state_prev
                .robots
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    if !r.active || overridden[i] {
                        return None;
                    }
                    let team = r.team as usize;
                    let rod = &state_prev.rods[task.rod_of_team(team)];
                    let torque = robot_rod_contact(r, rod, world_cfg)
                        .map(|(_, t)| t)
                        .unwrap_or(0.0);
                    Some(reward_cfg.beta_torque * signs[team].signum() * torque)
                })
                .collect())
        }
    }
}
