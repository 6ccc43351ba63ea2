//! Rollout collection: all agents of a team share one frozen policy; the
//! boundary protection layer overrides agents drifting out of the workspace
//! and those transitions are flagged so they never train the policy.

use super::{
    init_episode, inject_malfunctions, stream_rng, AgentTrajectory, EpisodeSetup, Transition,
    TransitionBatch, STREAM_ACTION, STREAM_MALFUNCTION,
};
use crate::error::{Result, SwarmError};
use crate::math::{angle_diff_mod_pi, point_segment};
use crate::perception::{assemble_observation, mirror_observation};
use crate::physics::boundary::boundary_policy;
use crate::physics::{step_action, ActionCommand, Noise, WorldConfig};
use crate::policy::{forward_policy, forward_value, Mlp};
use crate::rewards::{
    baseline_rewards, counterfactual_rewards, geometric_torque, transport_potential,
    RewardConfig, RewardMode, TaskKind, TaskSpec,
};
use serde::{Deserialize, Serialize};

pub struct RolloutOptions<'a> {
    pub actor: &'a Mlp,
    pub critic: &'a Mlp,
    pub task: &'a TaskSpec,
    pub setup: &'a EpisodeSetup,
    pub world: &'a WorldConfig,
    pub reward: &'a RewardConfig,
    /// None skips reward computation entirely (pure evaluation).
    pub reward_mode: Option<RewardMode>,
    /// Per team; mirrored teams run the policy through the chirality
    /// mirror. Empty means no team is mirrored.
    pub mirrored_teams: &'a [bool],
    /// Malfunctioning-agent fraction, re-drawn every step. Zero in
    /// training.
    pub malfunction: f64,
    /// Record per-step poses, actions and rewards into the batch.
    pub record_steps: bool,
}

/// One executed action step of every robot and rod, for trajectory files.
/// Poses are post-step; rewards are the per-agent values actually issued
/// (null for boundary-overridden, malfunctioning or reward-free agents).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    pub step: usize,
    /// Seconds since episode start after this action completed.
    pub time: f64,
    /// x, y (µm), heading (rad) per robot.
    pub robots: Vec<[f64; 3]>,
    /// x, y (µm), orientation (rad) per rod.
    pub rods: Vec<[f64; 3]>,
    pub actions: Vec<u8>,
    pub rewards: Vec<Option<f64>>,
    /// Transport target pose, when the task has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: u64,
    pub robots: usize,
    pub steps: usize,
    /// Mean |rod angular velocity| per team, rad/s.
    pub omega_abs: Vec<f64>,
    /// Mean signed rod angular velocity per team, rad/s.
    pub omega_signed: Vec<f64>,
    /// Mean robot center to own-rod segment distance, µm.
    pub mean_robot_rod_distance: f64,
    /// Mean heading-alignment torque proxy about the first rod.
    pub mean_torque_proxy: f64,
    /// Mean over all issued per-agent rewards.
    pub mean_reward: f64,
    pub success: bool,
    pub success_step: Option<usize>,
    /// Transport only: rod-target center distance and angle gap per step.
    pub center_distance_trace: Vec<f64>,
    pub angle_gap_trace: Vec<f64>,
    pub final_center_distance: f64,
    pub final_angle_gap: f64,
}

struct Staged {
    robot: usize,
    obs: Vec<f64>,
    action_net: ActionCommand,
    log_prob: f64,
    value: f64,
    excluded: bool,
}

pub fn collect_rollout(
    opts: &RolloutOptions,
    master_seed: u64,
    first_episode: u64,
    episodes: u64,
) -> Result<TransitionBatch> {
    let teams = opts.task.team_count();
    let width = opts.task.observation_width();
    opts.actor.check_io(width, 4)?;
    opts.critic.check_io(width, 1)?;
    if !opts.mirrored_teams.is_empty() && opts.mirrored_teams.len() != teams {
        return Err(SwarmError::ShapeMismatch(format!(
            "{} mirror flags for {} team(s)",
            opts.mirrored_teams.len(),
            teams
        )));
    }
    if !(0.0..=1.0).contains(&opts.malfunction) {
        return Err(SwarmError::InvalidConfig("malfunction fraction outside [0,1]".into()));
    }

    let mut batch = TransitionBatch::new(Vec::new());
    for episode in first_episode..first_episode + episodes {
        run_episode(opts, master_seed, episode, &mut batch)?;
    }
    Ok(batch)
}

fn run_episode(
    opts: &RolloutOptions,
    master_seed: u64,
    episode: u64,
    batch: &mut TransitionBatch,
) -> Result<()> {
    let world = opts.world;
    let (mut state, task) = init_episode(opts.task, opts.setup, world, master_seed, episode)?;
    let n = state.robots.len();
    let teams = task.team_count();
    let specs: Vec<_> = (0..teams).map(|t| task.observation_spec(t)).collect();
    let widths: Vec<Vec<usize>> = specs.iter().map(|s| s.species_widths()).collect();
    let sigma = world.robot_diameter;
    let target = match &task.kind {
        TaskKind::Transport { target_center, target_theta } => {
            Some((*target_center, *target_theta))
        }
        _ => None,
    };

    let mut action_rng = stream_rng(master_seed, STREAM_ACTION + episode);
    let mut malfunction_rng = stream_rng(master_seed, STREAM_MALFUNCTION + episode);

    let mut trajs: Vec<AgentTrajectory> = (0..n)
        .map(|agent| AgentTrajectory { agent, episode, steps: Vec::new() })
        .collect();
    let mut stats = EpisodeStats {
        episode,
        robots: n,
        steps: 0,
        omega_abs: vec![0.0; teams],
        omega_signed: vec![0.0; teams],
        mean_robot_rod_distance: 0.0,
        mean_torque_proxy: 0.0,
        mean_reward: 0.0,
        success: false,
        success_step: None,
        center_distance_trace: Vec::new(),
        angle_gap_trace: Vec::new(),
        final_center_distance: 0.0,
        final_angle_gap: 0.0,
    };
    let mut reward_sum = 0.0;
    let mut reward_count = 0usize;
    let mut distance_sum = 0.0;
    let mut distance_count = 0usize;

    for step in 0..task.episode_len {
        let (overrides, mut excluded) = boundary_policy(&state, world);
        let mut actions = vec![ActionCommand::Stay; n];
        let mut staged: Vec<Staged> = Vec::with_capacity(n);
        for i in 0..n {
            if !state.robots[i].active {
                continue;
            }
            let team = state.robots[i].team as usize;
            let mirrored = opts.mirrored_teams.get(team).copied().unwrap_or(false);
            let mut obs = assemble_observation(i, &state, &specs[team], sigma);
            if !obs.iter().all(|v| v.is_finite()) {
                return Err(SwarmError::InvalidState(format!(
                    "non-finite observation for robot {i} at episode {episode} step {step}",
                )));
            }
            if mirrored {
                obs = mirror_observation(&obs, &widths[team]);
            }
            let (value, _) = forward_value(opts.critic, &obs)?;
            let (action_net, log_prob, executed) = match overrides[i] {
                Some(forced) => {
                    let net = if mirrored { forced.mirrored() } else { forced };
                    (net, 0.0, forced)
                }
                None => {
                    let (dist, _) = forward_policy(opts.actor, &obs)?;
                    let (a, lp) = dist.sample(&mut action_rng);
                    let executed = if mirrored { a.mirrored() } else { a };
                    (a, lp, executed)
                }
            };
            actions[i] = executed;
            staged.push(Staged {
                robot: i,
                obs,
                action_net,
                log_prob,
                value,
                excluded: excluded[i],
            });
        }

        if opts.malfunction > 0.0 {
            for i in inject_malfunctions(&mut actions, opts.malfunction, &mut malfunction_rng) {
                excluded[i] = true;
            }
            for s in &mut staged {
                s.excluded = s.excluded || excluded[s.robot];
            }
        }

        let next = step_action(&state, &actions, world, Noise::On)?;

        let rewards: Vec<Option<f64>> = match opts.reward_mode {
            Some(RewardMode::Counterfactual) => counterfactual_rewards(
                &state, &next, &actions, &task, opts.reward, world, &excluded,
            )?
            .rewards(),
            Some(mode) => {
                baseline_rewards(mode, &state, &next, &task, opts.reward, world, &excluded)?
            }
            None => vec![None; n],
        };

        // success is checked on the post-step pose, so a success step still
        // carries its rewards and the episode never runs past it
        let mut success = false;
        if let Some(target) = target {
            let rod = &next.rods[0];
            let v = transport_potential(
                rod.center,
                rod.theta,
                rod.half_length,
                target,
                task.chain_points,
            );
            success = task.is_success(v);
            stats
                .center_distance_trace
                .push((rod.center - target.0).norm());
            stats
                .angle_gap_trace
                .push(angle_diff_mod_pi(rod.theta, target.1).abs());
        }
        let done = success || step + 1 == task.episode_len;

        let mut issued = vec![None; n];
        for s in staged {
            let mut reward = 0.0;
            if let Some(r) = rewards[s.robot] {
                if !r.is_finite() {
                    return Err(SwarmError::InvalidState(format!(
                        "non-finite reward for robot {} at episode {episode} step {step}",
                        s.robot
                    )));
                }
                // team baselines do not add the terminal bonus themselves
                let bonus = if success && opts.reward_mode == Some(RewardMode::Team) {
                    task.success_bonus
                } else {
                    0.0
                };
                reward = r + bonus;
                issued[s.robot] = Some(reward);
                reward_sum += reward;
                reward_count += 1;
            }
            trajs[s.robot].steps.push(Transition {
                agent: s.robot,
                step,
                obs: s.obs,
                action: s.action_net,
                log_prob: s.log_prob,
                reward,
                value: s.value,
                excluded: s.excluded,
                done,
            });
        }

        if opts.record_steps {
            batch.steps.push(StepRecord {
                episode,
                step,
                time: next.time,
                robots: next.robots.iter().map(|r| [r.position.x, r.position.y, r.phi]).collect(),
                rods: next.rods.iter().map(|r| [r.center.x, r.center.y, r.theta]).collect(),
                actions: actions.iter().map(|a| a.index() as u8).collect(),
                rewards: issued,
                target: target.map(|(c, th)| [c.x, c.y, th]),
            });
        }

        for t in 0..teams {
            let rod_idx = task.rod_of_team(t);
            let d = angle_diff_mod_pi(next.rods[rod_idx].theta, state.rods[rod_idx].theta)
                / world.action_duration;
            stats.omega_abs[t] += d.abs();
            stats.omega_signed[t] += d;
        }
        for (_, robot) in next.active_robots() {
            let rod = &next.rods[task.rod_of_team(robot.team as usize)];
            let (a, b) = rod.endpoints();
            distance_sum += point_segment(robot.position, a, b).0.sqrt();
            distance_count += 1;
        }
        stats.mean_torque_proxy += geometric_torque(&next);
        stats.steps += 1;
        state = next;

        if success {
            stats.success = true;
            stats.success_step = Some(step);
            break;
        }
    }

    let steps = stats.steps.max(1) as f64;
    for t in 0..teams {
        stats.omega_abs[t] /= steps;
        stats.omega_signed[t] /= steps;
    }
    stats.mean_torque_proxy /= steps;
    stats.mean_robot_rod_distance = distance_sum / distance_count.max(1) as f64;
    stats.mean_reward = reward_sum / reward_count.max(1) as f64;
    if let Some(target) = target {
        stats.final_center_distance = (state.rods[0].center - target.0).norm();
        stats.final_angle_gap = angle_diff_mod_pi(state.rods[0].theta, target.1).abs();
    }

    batch
        .trajectories
        .extend(trajs.into_iter().filter(|t| !t.steps.is_empty()));
    batch.episodes.push(stats);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec2;
    use crate::policy::Mlp;
    use crate::trainer::{compute_gae, stream_rng, STREAM_PARAM_INIT};

    fn nets(width: usize) -> (Mlp, Mlp) {
        let mut rng = stream_rng(5, STREAM_PARAM_INIT);
        (Mlp::actor(width, &mut rng), Mlp::critic(width, &mut rng))
    }

    #[test]
    fn episode_cap_bounds_the_trajectories() {
        let world = WorldConfig::default();
        let task = TaskSpec { episode_len: 5, ..TaskSpec::rotation() };
        let setup = EpisodeSetup { robots: 6, ..EpisodeSetup::default() };
        let (actor, critic) = nets(task.observation_width());
        let opts = RolloutOptions {
            actor: &actor,
            critic: &critic,
            task: &task,
            setup: &setup,
            world: &world,
            reward: &RewardConfig::default(),
            reward_mode: Some(RewardMode::Counterfactual),
            mirrored_teams: &[],
            malfunction: 0.0,
            record_steps: false,
        };
        let batch = collect_rollout(&opts, 11, 0, 2).unwrap();
        assert_eq!(batch.trajectories.len(), 12);
        assert_eq!(batch.episodes.len(), 2);
        for traj in &batch.trajectories {
            assert_eq!(traj.steps.len(), 5);
            for (k, s) in traj.steps.iter().enumerate() {
                assert_eq!(s.step, k);
                assert_eq!(s.done, k == 4);
            }
        }
        assert_eq!(batch.episodes[0].steps, 5);
    }

    #[test]
    fn boundary_overrides_mark_transitions_excluded() {
        // a rod parked next to the left wall forces part of the grid into
        // the protection margin, so those robots start overridden
        let world = WorldConfig::default();
        let task = TaskSpec { episode_len: 3, ..TaskSpec::rotation() };
        let setup = EpisodeSetup {
            robots: 8,
            rod_poses: Some(vec![(Vec2::new(25.0, 350.0), std::f64::consts::FRAC_PI_2)]),
            ..EpisodeSetup::default()
        };
        let (actor, critic) = nets(task.observation_width());
        let opts = RolloutOptions {
            actor: &actor,
            critic: &critic,
            task: &task,
            setup: &setup,
            world: &world,
            reward: &RewardConfig::default(),
            reward_mode: Some(RewardMode::Counterfactual),
            mirrored_teams: &[],
            malfunction: 0.0,
            record_steps: false,
        };
        let batch = collect_rollout(&opts, 3, 0, 1).unwrap();
        let first_step_excluded = batch
            .trajectories
            .iter()
            .filter(|t| t.steps[0].excluded)
            .count();
        assert!(first_step_excluded >= 3, "only {first_step_excluded} overridden");
        let gae = compute_gae(&batch, 0.97, 0.95).unwrap();
        for (traj, rows) in batch.trajectories.iter().zip(&gae) {
            for (s, row) in traj.steps.iter().zip(rows) {
                if s.excluded {
                    assert_eq!(s.reward, 0.0);
                    assert!(row.is_none());
                } else {
                    assert!(row.is_some());
                }
            }
        }
    }

    #[test]
    fn transport_success_terminates_the_episode_with_the_bonus() {
        let world = WorldConfig::default();
        // threshold so large the first post-step pose already qualifies
        let mut task = TaskSpec::transport(Vec2::ZERO, 0.0);
        task.success_threshold = 1e9;
        task.episode_len = 50;
        let setup = EpisodeSetup { robots: 6, ..EpisodeSetup::default() };
        let (actor, critic) = nets(task.observation_width());
        let opts = RolloutOptions {
            actor: &actor,
            critic: &critic,
            task: &task,
            setup: &setup,
            world: &world,
            reward: &RewardConfig::default(),
            reward_mode: Some(RewardMode::Counterfactual),
            mirrored_teams: &[],
            malfunction: 0.0,
            record_steps: false,
        };
        let batch = collect_rollout(&opts, 21, 0, 1).unwrap();
        let stats = &batch.episodes[0];
        assert!(stats.success);
        assert_eq!(stats.success_step, Some(0));
        assert_eq!(stats.steps, 1);
        for traj in &batch.trajectories {
            let last = traj.steps.last().unwrap();
            assert!(last.done);
            if !last.excluded {
                assert!(last.reward >= task.success_bonus);
            }
        }
        assert_eq!(stats.center_distance_trace.len(), 1);
    }

    #[test]
    fn rollouts_are_bit_reproducible() {
        let world = WorldConfig::default();
        let task = TaskSpec { episode_len: 4, ..TaskSpec::rotation() };
        let setup = EpisodeSetup { robots: 6, ..EpisodeSetup::default() };
        let (actor, critic) = nets(task.observation_width());
        let opts = RolloutOptions {
            actor: &actor,
            critic: &critic,
            task: &task,
            setup: &setup,
            world: &world,
            reward: &RewardConfig::default(),
            reward_mode: Some(RewardMode::Counterfactual),
            mirrored_teams: &[],
            malfunction: 0.0,
            record_steps: false,
        };
        let a = collect_rollout(&opts, 77, 0, 2).unwrap();
        let b = collect_rollout(&opts, 77, 0, 2).unwrap();
        for (ta, tb) in a.trajectories.iter().zip(&b.trajectories) {
            for (sa, sb) in ta.steps.iter().zip(&tb.steps) {
                assert_eq!(sa.obs, sb.obs);
                assert_eq!(sa.action, sb.action);
                assert_eq!(sa.reward, sb.reward);
                assert_eq!(sa.log_prob, sb.log_prob);
            }
        }
        let c = collect_rollout(&opts, 78, 0, 2).unwrap();
        let same = a
            .trajectories
            .iter()
            .zip(&c.trajectories)
            .all(|(x, y)| x.steps.iter().zip(&y.steps).all(|(p, q)| p.obs == q.obs));
        assert!(!same);
    }

    #[test]
    fn evaluation_mode_skips_rewards() {
        let world = WorldConfig::default();
        let task = TaskSpec { episode_len: 3, ..TaskSpec::rotation() };
        let setup = EpisodeSetup { robots: 5, ..EpisodeSetup::default() };
        let (actor, critic) = nets(task.observation_width());
        let opts = RolloutOptions {
            actor: &actor,
            critic: &critic,
            task: &task,
            setup: &setup,
            world: &world,
            reward: &RewardConfig::default(),
            reward_mode: None,
            mirrored_teams: &[],
            malfunction: 0.0,
            record_steps: false,
        };
        let batch = collect_rollout(&opts, 9, 0, 1).unwrap();
        assert!(batch
            .trajectories
            .iter()
            .flat_map(|t| &t.steps)
            .all(|s| s.reward == 0.0));
        assert_eq!(batch.episodes[0].mean_reward, 0.0);
        assert!(batch.episodes[0].omega_abs[0] >= 0.0);
    }
}
