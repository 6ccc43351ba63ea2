use anyhow::Result;
use clap::{Parser, Subcommand};
use microswarm::SwarmError;
use microswarm_cli::sweep::Axis;
use microswarm_cli::{config, eval, metrics, replay, sweep, train};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "microswarm", version, about = "Microrobot swarm training, evaluation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy; resumable by passing the checkpoint of an earlier run.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Resume training from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides the episode budget.
        #[arg(long)]
        episodes: Option<u64>,
        /// Output directory; default <output.dir>/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a frozen checkpoint, writing trajectories and metrics.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluation episodes.
        #[arg(long, default_value_t = 20)]
        episodes: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluation-only sweep over malfunction fraction or swarm size.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values; default grid from the config.
        #[arg(long)]
        values: Option<String>,
        /// Episodes per sweep point.
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute per-episode metrics from a trajectory file.
    Metrics {
        /// Trajectory file (.jsonl).
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render trajectory episodes as SVG scenes.
    Replay {
        /// Trajectory file (.jsonl).
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{}: {e:#}", category(&e));
        std::process::exit(1);
    }
}

fn category(e: &anyhow::Error) -> &'static str {
    if let Some(s) = e.downcast_ref::<SwarmError>() {
        return match s {
            SwarmError::InvalidConfig(_) | SwarmError::ShapeMismatch(_) => "config error",
            SwarmError::BadCheckpoint(_) => "checkpoint error",
            SwarmError::InvalidState(_) => "run error",
            SwarmError::Io(_) => "io error",
            SwarmError::Json(_) => "format error",
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "io error";
    }
    if e.downcast_ref::<toml::de::Error>().is_some() {
        return "config error";
    }
    "error"
}

fn out_dir(cfg: &config::RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| Path::new(&cfg.output.dir).join(&cfg.name))
}

fn load(config: &Path, seed: Option<u64>, episodes: Option<u64>) -> Result<config::RunConfig> {
    let mut cfg = config::load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = episodes {
        cfg.training.episodes = e;
    }
    Ok(cfg)
}

fn parse_values(axis: Axis, text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let v: f64 = part
            .parse()
            .map_err(|_| anyhow::anyhow!("--values entry '{part}' is not a number"))?;
        if axis == Axis::Malfunction && !(0.0..=1.0).contains(&v) {
            anyhow::bail!("malfunction fraction {v} outside [0,1]");
        }
        out.push(v);
    }
    if out.is_empty() {
        anyhow::bail!("--values is empty");
    }
    Ok(out)
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train { config, seed, checkpoint, episodes, out } => {
            let cfg = load(&config, seed, episodes)?;
            let dir = out_dir(&cfg, out);
            let art = train::run_train(&cfg, &dir, checkpoint.as_deref())?;
            println!(
                "trained through episode {}; checkpoint {} metrics {}",
                art.episodes,
                art.checkpoint.display(),
                art.metrics.display()
            );
        }
        Command::Eval { config, checkpoint, seed, episodes, out } => {
            let cfg = load(&config, seed, None)?;
            let dir = out_dir(&cfg, out);
            let summary = eval::run_eval(&cfg, &checkpoint, episodes, &dir)?;
            println!(
                "{} episode(s): {} success(es), mean |omega| {:.5} rad/s -> {}",
                summary.episodes,
                summary.successes,
                summary.mean_abs_omega,
                dir.display()
            );
        }
        Command::Sweep { config, checkpoint, axis, values, episodes, seed, out } => {
            let cfg = load(&config, seed, None)?;
            let dir = out_dir(&cfg, out);
            let values = values.map(|t| parse_values(axis, &t)).transpose()?;
            let table = sweep::run_sweep(&cfg, &checkpoint, axis, values, episodes, &dir)?;
            println!("{} point(s) -> {}", table.points.len(), table.csv.display());
        }
        Command::Metrics { input, out } => {
            let dir = out.unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).into());
            metrics::run_metrics(&input, &dir)?;
        }
        Command::Replay { input, out } => {
            let dir = out.unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).into());
            replay::run_replay(&input, &dir)?;
        }
    }
    Ok(())
}
