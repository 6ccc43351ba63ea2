//! Trajectory files: JSON Lines, a header object on the first line followed
//! by one record per executed action step. The header carries the format
//! version and units; readers refuse versions newer than they understand.

use anyhow::{bail, Context, Result};
use microswarm::trainer::StepRecord;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const TRAJECTORY_FORMAT: &str = "microswarm-trajectory";
pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format: String,
    pub version: u32,
    pub units: UnitsNote,
    pub robots: usize,
    pub rods: usize,
    /// Wall time one action takes, seconds.
    pub action_duration_s: f64,
    pub seed: u64,
    pub task: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitsNote {
    pub length: String,
    pub angle: String,
    pub time: String,
}

impl UnitsNote {
    pub fn standard() -> Self {
        UnitsNote { length: "um".into(), angle: "rad".into(), time: "s".into() }
    }
}

impl TrajectoryHeader {
    pub fn new(robots: usize, rods: usize, action_duration_s: f64, seed: u64, task: &str) -> Self {
        TrajectoryHeader {
            format: TRAJECTORY_FORMAT.into(),
            version: TRAJECTORY_VERSION,
            units: UnitsNote::standard(),
            robots,
            rods,
            action_duration_s,
            seed,
            task: task.into(),
        }
    }
}

#[derive(Debug)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    pub steps: Vec<StepRecord>,
}

pub fn write_trajectories(
    path: &Path,
    header: &TrajectoryHeader,
    steps: &[StepRecord],
) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for s in steps {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<TrajectoryFile> {
    let file =
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let first = match lines.next() {
        Some(l) => l.context("line 1: read failed")?,
        None => bail!("line 1: empty file, expected a trajectory header"),
    };
    let header: TrajectoryHeader = serde_json::from_str(&first)
        .map_err(|e| anyhow::anyhow!("line 1: malformed header: {e}"))?;
    if header.format != TRAJECTORY_FORMAT {
        bail!("line 1: format '{}' is not '{TRAJECTORY_FORMAT}'", header.format);
    }
    if header.version > TRAJECTORY_VERSION {
        bail!(
            "line 1: trajectory version {} is newer than the supported {}",
            header.version,
            TRAJECTORY_VERSION
        );
    }
    let mut steps = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.with_context(|| format!("line {n}: read failed"))?;
        if line.trim().is_empty() {
            bail!("line {n}: blank line inside trajectory data");
        }
        let rec: StepRecord = serde_json::from_str(&line)
            .map_err(|e| anyhow::anyhow!("line {n}: malformed record: {e}"))?;
        if rec.robots.len() != header.robots || rec.rods.len() != header.rods {
            bail!(
                "line {n}: record lists {} robot(s) and {} rod(s), header says {} and {}",
                rec.robots.len(),
                rec.rods.len(),
                header.robots,
                header.rods
            );
        }
        steps.push(rec);
    }
    Ok(TrajectoryFile { header, steps })
}
