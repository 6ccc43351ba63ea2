//! Evaluation-only sweeps over malfunction fraction or swarm size. Each
//! point replays the same seeds with no further training; performance is the
//! mean |omega| of the first rod, normalized so the best point's mean is
//! exactly 1.

use crate::config::RunConfig;
use crate::eval::load_trainer;
use crate::svg::{LinePlot, Series, PALETTE};
use anyhow::{bail, Context, Result};
use microswarm::trainer::{collect_rollout, init_episode, EpisodeSetup, RolloutOptions};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Malfunction,
    Size,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Malfunction => "malfunction",
            Axis::Size => "size",
        }
    }
}

pub struct SweepPoint {
    pub value: f64,
    /// Mean |omega| of rod 0 per evaluation episode.
    pub runs: Vec<f64>,
    pub mean: f64,
    pub normalized: f64,
}

pub struct SweepTable {
    pub axis: Axis,
    pub points: Vec<SweepPoint>,
    pub csv: PathBuf,
}

pub fn run_sweep(
    cfg: &RunConfig,
    checkpoint: &Path,
    axis: Axis,
    values: Option<Vec<f64>>,
    episodes: Option<u64>,
    out_dir: &Path,
) -> Result<SweepTable> {
    let task = cfg.task_spec(true)?;
    let trainer = load_trainer(checkpoint)?;
    trainer
        .actor
        .check_io(task.observation_width(), 4)
        .context("checkpoint does not fit the task observation width")?;
    let episodes = episodes.unwrap_or(cfg.sweep.episodes);
    let mirrored = cfg.mirrored_teams(&task);

    let values = match (&values, axis) {
        (Some(v), _) => v.clone(),
        (None, Axis::Malfunction) => cfg.sweep.malfunction_grid.clone(),
        (None, Axis::Size) => cfg.sweep.size_grid.iter().map(|n| *n as f64).collect(),
    };
    if values.is_empty() {
        bail!("sweep needs at least one axis value");
    }
    for v in &values {
        match axis {
            Axis::Malfunction if !(0.0..=1.0).contains(v) => {
                bail!("malfunction fraction {v} outside [0,1]")
            }
            Axis::Size if *v < 1.0 || v.fract() != 0.0 => {
                bail!("swarm size {v} is not a positive integer")
            }
            _ => {}
        }
    }

    let mut points = Vec::new();
    for v in &values {
        let (setup, malfunction): (EpisodeSetup, f64) = match axis {
            Axis::Malfunction => (cfg.setup(), *v),
            Axis::Size => (EpisodeSetup { robots: *v as usize, ..cfg.setup() }, 0.0),
        };
        // placement dry run surfaces arena-capacity failures before the
        // expensive part
        init_episode(&task, &setup, &cfg.world, cfg.seed, 0)
            .with_context(|| format!("sweep point {}={v} cannot be set up", axis.name()))?;
        let opts = RolloutOptions {
            actor: &trainer.actor,
            critic: &trainer.critic,
            task: &task,
            setup: &setup,
            world: &cfg.world,
            reward: &cfg.reward,
            reward_mode: None,
            mirrored_teams: &mirrored,
            malfunction,
            record_steps: false,
        };
        let batch = collect_rollout(&opts, cfg.seed, 0, episodes)?;
        let runs: Vec<f64> = batch.episodes.iter().map(|e| e.omega_abs[0]).collect();
        let mean = runs.iter().sum::<f64>() / runs.len().max(1) as f64;
        println!("{} = {v}: mean |omega| {mean:.5} rad/s over {episodes} episode(s)", axis.name());
        points.push(SweepPoint { value: *v, runs, mean, normalized: 0.0 });
    }

    let omega_max = points.iter().map(|p| p.mean).fold(f64::NEG_INFINITY, f64::max);
    if !(omega_max > 0.0) {
        bail!("sweep collapsed: no point produced positive mean |omega|");
    }
    for p in &mut points {
        p.normalized = p.mean / omega_max;
    }

    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join(format!("sweep_{}.csv", axis.name()));
    let mut text = String::from("axis,value,run,mean_abs_omega_rad_per_s,normalized\n");
    for p in &points {
        for (i, r) in p.runs.iter().enumerate() {
            let _ = writeln!(
                text,
                "{},{},{i},{r},{}",
                axis.name(),
                p.value,
                r / omega_max
            );
        }
        let _ = writeln!(text, "{},{},mean,{},{}", axis.name(), p.value, p.mean, p.normalized);
    }
    std::fs::write(&csv, text)?;

    if cfg.output.plots {
        let plot = LinePlot {
            title: format!("{} sweep: {}", axis.name(), cfg.name),
            x_label: match axis {
                Axis::Malfunction => "malfunctioning fraction".into(),
                Axis::Size => "swarm size".into(),
            },
            y_label: "normalized performance".into(),
            series: vec![Series {
                name: "mean of episodes".into(),
                color: PALETTE[0],
                points: points.iter().map(|p| (p.value, p.normalized)).collect(),
            }],
            marks: true,
        };
        std::fs::write(out_dir.join(format!("sweep_{}.svg", axis.name())), plot.render())?;
    }

    Ok(SweepTable { axis, points, csv })
}
