//! Frozen-policy evaluation: replays a checkpoint on fresh episodes, writing
//! a trajectory file and per-episode metrics.

use crate::config::RunConfig;
use crate::metrics::{write_metrics_csv, MetricsRow};
use crate::trajectory::{write_trajectories, TrajectoryHeader};
use anyhow::{Context, Result};
use microswarm::trainer::{collect_rollout, RolloutOptions, Trainer, TrainerCheckpoint, TransitionBatch};
use std::path::{Path, PathBuf};

pub struct EvalSummary {
    pub episodes: u64,
    pub successes: usize,
    pub mean_abs_omega: f64,
    pub metrics: PathBuf,
    pub trajectories: Option<PathBuf>,
}

pub fn load_trainer(path: &Path) -> Result<Trainer> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    Ok(Trainer::from_checkpoint(TrainerCheckpoint::from_json(&text)?)?)
}

pub fn run_eval(
    cfg: &RunConfig,
    checkpoint: &Path,
    episodes: u64,
    out_dir: &Path,
) -> Result<EvalSummary> {
    let task = cfg.task_spec(true)?;
    let setup = cfg.setup();
    let trainer = load_trainer(checkpoint)?;
    trainer
        .actor
        .check_io(task.observation_width(), 4)
        .context("checkpoint does not fit the task observation width")?;

    let mirrored = cfg.mirrored_teams(&task);
    let opts = RolloutOptions {
        actor: &trainer.actor,
        critic: &trainer.critic,
        task: &task,
        setup: &setup,
        world: &cfg.world,
        reward: &cfg.reward,
        reward_mode: Some(cfg.training.reward_mode),
        mirrored_teams: &mirrored,
        malfunction: cfg.task.malfunction,
        record_steps: cfg.output.trajectories,
    };
    let batch = collect_rollout(&opts, cfg.seed, 0, episodes)?;

    std::fs::create_dir_all(out_dir)?;
    let metrics_path = out_dir.join("metrics.csv");
    let rows: Vec<MetricsRow> = batch.episodes.iter().map(MetricsRow::from).collect();
    write_metrics_csv(&metrics_path, &rows)?;

    let trajectories = if cfg.output.trajectories {
        let path = out_dir.join("trajectories.jsonl");
        write_step_file(&path, cfg, &task_name(cfg), &batch)?;
        Some(path)
    } else {
        None
    };

    let successes = batch.episodes.iter().filter(|e| e.success).count();
    let mean_abs_omega = batch.episodes.iter().map(|e| e.omega_abs[0]).sum::<f64>()
        / batch.episodes.len().max(1) as f64;
    Ok(EvalSummary {
        episodes,
        successes,
        mean_abs_omega,
        metrics: metrics_path,
        trajectories,
    })
}

fn task_name(cfg: &RunConfig) -> String {
    cfg.task.variant.clone().unwrap_or_default()
}

fn write_step_file(
    path: &Path,
    cfg: &RunConfig,
    task: &str,
    batch: &TransitionBatch,
) -> Result<()> {
    let robots = batch.steps.first().map(|s| s.robots.len()).unwrap_or(0);
    let rods = batch.steps.first().map(|s| s.rods.len()).unwrap_or(0);
    let header =
        TrajectoryHeader::new(robots, rods, cfg.world.action_duration, cfg.seed, task);
    write_trajectories(path, &header, &batch.steps)
}
