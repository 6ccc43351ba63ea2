//! Run configuration: a TOML file with `[world]`, `[task]`, `[reward]`,
//! `[training]`, `[sweep]` and `[output]` sections. Every key has a default
//! except `task.variant`; unknown keys are rejected with the offending name.

use anyhow::{bail, Context, Result};
use microswarm::math::Vec2;
use microswarm::physics::WorldConfig;
use microswarm::rewards::{RewardConfig, TaskKind, TaskSpec};
use microswarm::trainer::{EpisodeSetup, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Run name; the default output directory is `<output.dir>/<name>`.
    pub name: String,
    /// Master seed for placement, noise, action sampling and parameter init.
    pub seed: u64,
    pub world: WorldConfig,
    pub task: TaskSection,
    pub reward: RewardConfig,
    pub training: TrainConfig,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            seed: 0,
            world: WorldConfig::default(),
            task: TaskSection::default(),
            reward: RewardConfig::default(),
            training: TrainConfig::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    /// rotation | directed_rotation | transport | multi_rotation. Required.
    pub variant: Option<String>,
    /// Commanded rotation sign for directed_rotation: +1 or -1.
    pub sign: f64,
    /// Per-rod rotation signs for multi_rotation.
    pub signs: Vec<f64>,
    pub robots: usize,
    /// Placement grid pitch, µm.
    pub grid_pitch: f64,
    /// Explicit rod poses x, y, theta; empty uses the built-in placement.
    pub rods: Vec<[f64; 3]>,
    /// Transport: distance from the rod start to the sampled target, µm.
    pub target_distance: f64,
    /// Actions per episode; defaults to 100 (rotation variants), 1000 for
    /// transport training and 3000 for transport evaluation.
    pub episode_len: Option<usize>,
    pub observe_obstacles: bool,
    /// Transport success: final potential below this, µm.
    pub success_threshold: f64,
    pub success_bonus: f64,
    /// Evaluation-time malfunctioning-agent fraction.
    pub malfunction: f64,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            variant: None,
            sign: 1.0,
            signs: Vec::new(),
            robots: 32,
            grid_pitch: 18.0,
            rods: Vec::new(),
            target_distance: 50.0,
            episode_len: None,
            observe_obstacles: false,
            success_threshold: 8.0,
            success_bonus: 500.0,
            malfunction: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Evaluation episodes per sweep point.
    pub episodes: u64,
    pub malfunction_grid: Vec<f64>,
    pub size_grid: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            episodes: 8,
            malfunction_grid: (0..10).map(|i| i as f64 / 10.0).collect(),
            size_grid: vec![9, 15, 20, 25, 35, 50, 70, 100, 140, 200],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Parent directory for run outputs.
    pub dir: String,
    /// Archive a checkpoint every this many episodes.
    pub checkpoint_every: u64,
    /// Write trajectory files during evaluation.
    pub trajectories: bool,
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "runs".into(), checkpoint_every: 40, trajectories: true, plots: true }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.task_spec(false)?;
        self.setup().validate(&self.world).with_context(|| "task")?;
        self.world.validate().with_context(|| "world")?;
        self.reward.validate().with_context(|| "reward")?;
        self.training.validate().with_context(|| "training")?;
        if !(0.0..=1.0).contains(&self.task.malfunction) {
            bail!("task.malfunction must lie in [0,1], got {}", self.task.malfunction);
        }
        if self.sweep.episodes == 0 {
            bail!("sweep.episodes must be at least 1");
        }
        for f in &self.sweep.malfunction_grid {
            if !(0.0..=1.0).contains(f) {
                bail!("sweep.malfunction_grid entries must lie in [0,1], got {f}");
            }
        }
        for n in &self.sweep.size_grid {
            if *n == 0 {
                bail!("sweep.size_grid entries must be at least 1");
            }
        }
        if self.output.checkpoint_every == 0 {
            bail!("output.checkpoint_every must be at least 1");
        }
        if self.name.is_empty() {
            bail!("name must not be empty");
        }
        Ok(())
    }

    /// Concrete task template. Evaluation lifts the transport episode cap to
    /// 3000 actions unless the config pins one.
    pub fn task_spec(&self, eval: bool) -> Result<TaskSpec> {
        let variant = match &self.task.variant {
            Some(v) => v.as_str(),
            None => bail!("task.variant required"),
        };
        let mut spec = match variant {
            "rotation" => TaskSpec::rotation(),
            "directed_rotation" => {
                if self.task.sign.abs() != 1.0 {
                    bail!("task.sign must be +1 or -1, got {}", self.task.sign);
                }
                TaskSpec {
                    kind: TaskKind::DirectedRotation { sign: self.task.sign },
                    ..TaskSpec::rotation()
                }
            }
            "transport" => {
                // placeholder target; every episode samples its own
                let center = Vec2::new(self.world.arena.x / 2.0, self.world.arena.y / 2.0);
                let mut t = TaskSpec::transport(center, 0.0);
                if eval && self.task.episode_len.is_none() {
                    t.episode_len = 3000;
                }
                t
            }
            "multi_rotation" => {
                if self.task.signs.is_empty() {
                    bail!("task.signs required for multi_rotation");
                }
                if self.task.signs.iter().any(|s| s.abs() != 1.0) {
                    bail!("task.signs entries must be +1 or -1");
                }
                if !self.task.rods.is_empty() && self.task.rods.len() != self.task.signs.len() {
                    bail!(
                        "task.rods lists {} pose(s) for {} sign(s)",
                        self.task.rods.len(),
                        self.task.signs.len()
                    );
                }
                TaskSpec {
                    kind: TaskKind::MultiRotation { signs: self.task.signs.clone() },
                    ..TaskSpec::rotation()
                }
            }
            other => bail!(
                "task.variant '{other}' unknown (rotation, directed_rotation, transport, \
                 multi_rotation)"
            ),
        };
        if let Some(len) = self.task.episode_len {
            if len == 0 {
                bail!("task.episode_len must be at least 1");
            }
            spec.episode_len = len;
        }
        spec.observe_obstacles = self.task.observe_obstacles;
        spec.success_threshold = self.task.success_threshold;
        spec.success_bonus = self.task.success_bonus;
        Ok(spec)
    }

    pub fn setup(&self) -> EpisodeSetup {
        let rod_poses = if self.task.rods.is_empty() {
            None
        } else {
            Some(
                self.task
                    .rods
                    .iter()
                    .map(|[x, y, th]| (Vec2::new(*x, *y), *th))
                    .collect(),
            )
        };
        EpisodeSetup {
            robots: self.task.robots,
            grid_pitch: self.task.grid_pitch,
            rod_poses,
            target_distance: self.task.target_distance,
        }
    }

    /// Training section with the master seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.training.clone() }
    }

    /// Teams commanded to rotate negatively run the policy through the
    /// chirality mirror.
    pub fn mirrored_teams(&self, task: &TaskSpec) -> Vec<bool> {
        match &task.kind {
            TaskKind::MultiRotation { signs } => signs.iter().map(|s| *s < 0.0).collect(),
            _ => Vec::new(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig =
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(cfg).context("serializing config")?;
    std::fs::write(path, text).with_context(|| format!("writing config {}", path.display()))?;
    Ok(())
}
