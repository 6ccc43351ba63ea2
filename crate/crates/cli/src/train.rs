//! Training entry point: runs updates until the configured episode budget,
//! streaming per-episode metrics and keeping the newest checkpoint on disk
//! so a diverged or interrupted run can resume from the last good state.

use crate::config::RunConfig;
use crate::metrics::{MetricsRow, METRICS_HEADER};
use crate::svg::{LinePlot, Series, PALETTE};
use anyhow::{bail, Context, Result};
use microswarm::trainer::{Trainer, TrainerCheckpoint};
use std::path::{Path, PathBuf};

pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub episodes: u64,
}

pub fn run_train(cfg: &RunConfig, out_dir: &Path, resume: Option<&Path>) -> Result<TrainArtifacts> {
    let task = cfg.task_spec(false)?;
    let setup = cfg.setup();
    let train = cfg.train_config();
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let ckpt_path = out_dir.join("checkpoint.json");
    let metrics_path = out_dir.join("metrics.csv");

    let mut trainer = match resume {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading checkpoint {}", path.display()))?;
            let t = Trainer::from_checkpoint(TrainerCheckpoint::from_json(&text)?)?;
            t.actor.check_io(task.observation_width(), 4).context("checkpoint does not fit the task")?;
            println!("resuming at episode {} from {}", t.episode, path.display());
            t
        }
        None => Trainer::new(&task, &train)?,
    };

    // Completed-episode lines carried over on resume; kept verbatim so a
    // resumed run's metrics file is byte-identical to an uninterrupted one.
    let mut lines: Vec<String> = Vec::new();
    if resume.is_some() && metrics_path.exists() {
        let text = std::fs::read_to_string(&metrics_path)?;
        for line in text.lines().skip(1) {
            let episode: u64 = line
                .split(',')
                .next()
                .unwrap_or_default()
                .parse()
                .with_context(|| format!("unreadable metrics line: {line}"))?;
            if episode < trainer.episode {
                lines.push(line.to_string());
            }
        }
    }

    let mut curve: Vec<(f64, f64)> = lines
        .iter()
        .map(|l| {
            let mut it = l.split(',');
            let ep: f64 = it.next().unwrap_or("0").parse().unwrap_or(0.0);
            let omega: f64 = it
                .nth(1)
                .and_then(|c| c.split(';').next())
                .unwrap_or("0")
                .parse()
                .unwrap_or(0.0);
            (ep, omega)
        })
        .collect();

    std::fs::write(&ckpt_path, trainer.checkpoint().to_json()?)?;
    let target = train.episodes;
    while trainer.episode < target {
        let update = trainer.update;
        let result = trainer.run_update(&task, &setup, &cfg.world, &cfg.reward, &train);
        let (eps, stats) = match result {
            Ok(v) => v,
            Err(e) => {
                flush_metrics(&metrics_path, &lines)?;
                bail!(
                    "training diverged at update {update}: {e}; last good checkpoint retained \
                     at {}",
                    ckpt_path.display()
                );
            }
        };
        for e in &eps {
            curve.push((e.episode as f64, e.omega_abs[0]));
            lines.push(MetricsRow::from(e).to_csv_line());
        }
        flush_metrics(&metrics_path, &lines)?;
        std::fs::write(&ckpt_path, trainer.checkpoint().to_json()?)?;
        let crossed = |ep: u64| (ep / cfg.output.checkpoint_every) as i64;
        if crossed(trainer.episode) > crossed(trainer.episode - eps.len() as u64) {
            let archived = out_dir.join(format!("checkpoint_ep{}.json", trainer.episode));
            std::fs::write(archived, trainer.checkpoint().to_json()?)?;
        }
        let omega: f64 =
            eps.iter().map(|e| e.omega_abs[0]).sum::<f64>() / eps.len().max(1) as f64;
        println!(
            "update {update} episode {} | omega {omega:.5} rad/s | value loss {:.4} | \
             entropy {:.3} | clip {:.2}",
            trainer.episode, stats.value_loss, stats.entropy, stats.clip_fraction
        );
    }

    if cfg.output.plots {
        let rolling: Vec<(f64, f64)> = curve
            .windows(20.min(curve.len().max(1)))
            .map(|w| (w[w.len() - 1].0, w.iter().map(|p| p.1).sum::<f64>() / w.len() as f64))
            .collect();
        let plot = LinePlot {
            title: format!("learning curve: {}", cfg.name),
            x_label: "episode".into(),
            y_label: "mean |omega| (rad/s)".into(),
            series: vec![
                Series { name: "per episode".into(), color: PALETTE[0], points: curve },
                Series { name: "20-episode mean".into(), color: PALETTE[1], points: rolling },
            ],
            marks: false,
        };
        std::fs::write(out_dir.join("learning_curve.svg"), plot.render())?;
    }

    Ok(TrainArtifacts { checkpoint: ckpt_path, metrics: metrics_path, episodes: trainer.episode })
}

fn flush_metrics(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}
