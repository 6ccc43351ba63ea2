//! Episode orchestration and policy optimization: seeded episode setup,
//! rollout collection with parameter sharing, advantage estimation, clipped
//! policy-gradient updates, malfunction injection, team assignment, and
//! chirality mirroring.

mod rollout;
mod update;

pub use rollout::{collect_rollout, EpisodeStats, RolloutOptions, StepRecord};
pub use update::{
    compute_gae, ppo_update, GaeRow, PpoStats, Trainer, TrainerCheckpoint,
    TRAINER_CHECKPOINT_VERSION,
};

use crate::error::{Result, SwarmError};
use crate::math::{point_segment, Vec2};
use crate::perception::mirror_observation;
use crate::physics::{ActionCommand, RobotState, RodState, SimState, WorldConfig};
use crate::rewards::{RewardMode, TaskKind, TaskSpec};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Disjoint ChaCha stream ids, all off one master seed. World noise uses
/// the bare episode index (SimState::with_seed); every other consumer gets
/// its own 2^32 block. Resuming at an episode or update boundary therefore
/// reconstructs identical streams.
pub const STREAM_PLACEMENT: u64 = 1 << 32;
pub const STREAM_ACTION: u64 = 2 << 32;
pub const STREAM_UPDATE: u64 = 3 << 32;
pub const STREAM_MALFUNCTION: u64 = 4 << 32;
pub const STREAM_PARAM_INIT: u64 = 5 << 32;

pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub episodes_per_update: usize,
    pub entropy_weight: f64,
    pub reward_mode: RewardMode,
    /// Total episodes a training run aims for.
    pub episodes: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.97,
            lambda: 0.95,
            clip: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch: 256,
            episodes_per_update: 4,
            entropy_weight: 0.005,
            reward_mode: RewardMode::Counterfactual,
            episodes: 240,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.gamma) || !in_unit(self.lambda) {
            return Err(SwarmError::InvalidConfig("gamma and lambda must lie in (0,1]".into()));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(SwarmError::InvalidConfig("clip ratio must lie in (0,1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SwarmError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.episodes_per_update == 0 {
            return Err(SwarmError::InvalidConfig(
                "epochs, minibatch, and episodes_per_update must be at least 1".into(),
            ));
        }
        if !(self.entropy_weight >= 0.0) {
            return Err(SwarmError::InvalidConfig("entropy weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// One agent-step. Observations and actions are recorded in the network's
/// frame: for mirrored teams that is the mirrored frame, so updates stay
/// consistent with what the policy actually saw.
#[derive(Debug, Clone)]
pub struct Transition {
    pub agent: usize,
    pub step: usize,
    pub obs: Vec<f64>,
    pub action: ActionCommand,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// Boundary-overridden or malfunction-injected; never trained on.
    pub excluded: bool,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct AgentTrajectory {
    pub agent: usize,
    pub episode: u64,
    pub steps: Vec<Transition>,
}

#[derive(Debug, Clone)]
pub struct TransitionBatch {
    pub trajectories: Vec<AgentTrajectory>,
    pub episodes: Vec<EpisodeStats>,
    /// Per-step pose records, populated only when the rollout asks for them.
    pub steps: Vec<StepRecord>,
}

impl TransitionBatch {
    pub fn new(trajectories: Vec<AgentTrajectory>) -> TransitionBatch {
        TransitionBatch { trajectories, episodes: Vec::new(), steps: Vec::new() }
    }

    pub fn included_len(&self) -> usize {
        self.trajectories
            .iter()
            .flat_map(|t| &t.steps)
            .filter(|s| !s.excluded)
            .count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSetup {
    pub robots: usize,
    /// Square grid pitch; 3 robot diameters keeps neighbors well separated.
    pub grid_pitch: f64,
    /// One pose per rod; None places rods at default spots with random
    /// orientations.
    pub rod_poses: Option<Vec<(Vec2, f64)>>,
    /// Rod-to-target center distance for transport episodes.
    pub target_distance: f64,
}

impl Default for EpisodeSetup {
    fn default() -> Self {
        EpisodeSetup { robots: 32, grid_pitch: 18.0, rod_poses: None, target_distance: 50.0 }
    }
}

impl EpisodeSetup {
    pub fn validate(&self, cfg: &WorldConfig) -> Result<()> {
        if self.robots == 0 {
            return Err(SwarmError::InvalidConfig("robot count must be positive".into()));
        }
        if !(self.grid_pitch >= cfg.robot_diameter) {
            return Err(SwarmError::InvalidConfig(
                "grid pitch below one robot diameter would overlap robots".into(),
            ));
        }
        if !(self.target_distance > 0.0) {
            return Err(SwarmError::InvalidConfig("target distance must be positive".into()));
        }
        Ok(())
    }
}

fn default_rod_poses(
    count: usize,
    cfg: &WorldConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec2, f64)> {
    let (w, h) = (cfg.arena.x, cfg.arena.y);
    (0..count)
        .map(|k| {
            let center = if count == 1 {
                Vec2::new(w / 2.0, h / 2.0)
            } else {
                Vec2::new(w / 2.0, h * (k + 1) as f64 / (count + 1) as f64)
            };
            (center, rng.random_range(0.0..PI))
        })
        .collect()
}

fn segment_distance(p: Vec2, rod: &RodState) -> f64 {
    let (a, b) = rod.endpoints();
    point_segment(p, a, b).0.sqrt()
}

/// Candidate grid offsets in expanding square rings, each ring swept by
/// angle, so robots fill the cells closest to the rod first.
fn ring_cells(ring: i64) -> Vec<(i64, i64)> {
    if ring == 0 {
        return vec![(0, 0)];
    }
    let mut cells: Vec<(i64, i64)> = Vec::with_capacity((8 * ring) as usize);
    for i in -ring..=ring {
        for j in -ring..=ring {
            if i.abs().max(j.abs()) == ring {
                cells.push((i, j));
            }
        }
    }
    cells.sort_by(|a, b| {
        let aa = (a.1 as f64).atan2(a.0 as f64);
        let ab = (b.1 as f64).atan2(b.0 as f64);
        aa.total_cmp(&ab).then(a.cmp(b))
    });
    cells
}

/// Seeded episode initialization: rods posed, robots pushed onto a square
/// grid around their team's rod (cells overlapping any rod removed), and
/// for transport a target sampled at the commanded center distance in a
/// random direction with a random angle. Returns the concretized task.
pub fn init_episode(
    task: &TaskSpec,
    setup: &EpisodeSetup,
    cfg: &WorldConfig,
    master_seed: u64,
    episode: u64,
) -> Result<(SimState, TaskSpec)> {
    cfg.validate()?;
    setup.validate(cfg)?;
    let teams = task.team_count();
    if setup.robots < teams {
        return Err(SwarmError::InvalidConfig(format!(
            "{} robots cannot fill {} teams",
            setup.robots, teams
        )));
    }
    let rod_count = match &task.kind {
        TaskKind::MultiRotation { signs } => signs.len(),
        _ => 1,
    };
    let mut rng = stream_rng(master_seed, STREAM_PLACEMENT + episode);

    let poses = match &setup.rod_poses {
        Some(poses) => {
            if poses.len() != rod_count {
                return Err(SwarmError::InvalidConfig(format!(
                    "{} rod poses given for {} rod(s)",
                    poses.len(),
                    rod_count
                )));
            }
            poses.clone()
        }
        None => default_rod_poses(rod_count, cfg, &mut rng),
    };
    let (w, h) = (cfg.arena.x, cfg.arena.y);
    let rods: Vec<RodState> = poses.iter().map(|(c, t)| RodState::new(*c, *t)).collect();
    for rod in &rods {
        let (a, b) = rod.endpoints();
        for e in [a, b] {
            if e.x < rod.radius || e.x > w - rod.radius || e.y < rod.radius || e.y > h - rod.radius
            {
                return Err(SwarmError::InvalidConfig("rod pose leaves the arena".into()));
            }
        }
    }

    let mut task = task.clone();
    if let TaskKind::Transport { target_center, target_theta } = &mut task.kind {
        let rod = &rods[0];
        let inset = rod.radius;
        let mut placed = false;
        for _ in 0..64 {
            let dir = Vec2::from_angle(rng.random_range(0.0..TAU));
            let center = rod.center + dir * setup.target_distance;
            let theta = rng.random_range(0.0..PI);
            let ghost = RodState::new(center, theta);
            let (a, b) = ghost.endpoints();
            let inside = [a, b].iter().all(|e| {
                e.x >= inset && e.x <= w - inset && e.y >= inset && e.y <= h - inset
            });
            if inside {
                *target_center = center;
                *target_theta = theta;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SwarmError::InvalidConfig(
                "no target pose at the commanded distance fits the arena".into(),
            ));
        }
    }

    // grid placement, team by team
    let base = setup.robots / teams;
    let extra = setup.robots % teams;
    let radius = cfg.radius();
    let sigma = cfg.robot_diameter;
    let pitch = setup.grid_pitch;
    let max_ring = (w.max(h) / pitch).ceil() as i64 + 1;
    let mut robots: Vec<RobotState> = Vec::with_capacity(setup.robots);
    for team in 0..teams {
        let want = base + usize::from(team < extra);
        let own = &rods[task.rod_of_team(team)];
        let mut got = 0;
        'rings: for ring in 0..=max_ring {
            for (i, j) in ring_cells(ring) {
                if got == want {
                    break 'rings;
                }
                let p = own.center + Vec2::new(i as f64 * pitch, j as f64 * pitch);
                if p.x < radius || p.x > w - radius || p.y < radius || p.y > h - radius {
                    continue;
                }
                let own_d = segment_distance(p, own);
                if own_d < radius + own.radius {
                    continue;
                }
                let foreign = rods.iter().enumerate().any(|(k, rod)| {
                    k != task.rod_of_team(team)
                        && (segment_distance(p, rod) < radius + rod.radius
                            || segment_distance(p, rod) <= own_d)
                });
                if foreign {
                    continue;
                }
                if robots.iter().any(|r| (r.position - p).norm() < sigma) {
                    continue;
                }
                let phi = rng.random_range(-PI..PI);
                robots.push(RobotState::new(p, phi, team as u32));
                got += 1;
            }
        }
        if got < want {
            return Err(SwarmError::InvalidConfig(format!(
                "grid of pitch {pitch} places only {got} of {want} robots for team {team}",
            )));
        }
    }

    let state = SimState::new(robots, rods, Vec::new()).with_seed(master_seed, episode);
    Ok((state, task))
}

/// Nearest-rod partition. Every rod must end up with at least one robot.
pub fn assign_teams(robots: &[RobotState], rods: &[RodState]) -> Result<Vec<u32>> {
    if rods.is_empty() {
        return Err(SwarmError::InvalidConfig("no rods to assign teams to".into()));
    }
    let teams: Vec<u32> = robots
        .iter()
        .map(|r| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (k, rod) in rods.iter().enumerate() {
                let d = segment_distance(r.position, rod);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best as u32
        })
        .collect();
    for k in 0..rods.len() as u32 {
        if !teams.contains(&k) {
            return Err(SwarmError::InvalidState(format!("team {k} has no robots")));
        }
    }
    Ok(teams)
}

/// Replaces round(f*N) uniformly chosen agents' actions with uniform random
/// ones, fresh every call. Returns the overridden indices, ascending.
pub fn inject_malfunctions<R: Rng>(
    actions: &mut [ActionCommand],
    fraction: f64,
    rng: &mut R,
) -> Vec<usize> {
    let n = actions.len();
    let count = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    if count == 0 {
        return Vec::new();
    }
    let mut chosen: Vec<usize> = index::sample(rng, n, count).into_iter().collect();
    chosen.sort_unstable();
    for &i in &chosen {
        actions[i] = ActionCommand::from_index(rng.random_range(0..4)).unwrap();
    }
    chosen
}

/// Left-right reflection of an agent's frame: cone order reverses within
/// each species block and the turn actions swap.
pub fn mirror_chirality(
    obs: &[f64],
    action: ActionCommand,
    species_widths: &[usize],
) -> Result<(Vec<f64>, ActionCommand)> {
    if obs.len() != species_widths.iter().sum::<usize>() {
        return Err(SwarmError::ShapeMismatch(format!(
            "observation of width {} does not match the species layout",
            obs.len()
        )));
    }
    Ok((mirror_observation(obs, species_widths), action.mirrored()))
}
