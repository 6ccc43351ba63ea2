//! Per-episode metrics: produced live during training/evaluation from
//! episode statistics, or recomputed from a trajectory file alone. Units are
//! carried in the CSV column names: µm for lengths, rad for angles, s for
//! time.

use crate::trajectory::TrajectoryFile;
use anyhow::{bail, Result};
use microswarm::math::{angle_diff_mod_pi, point_segment, Vec2};
use microswarm::physics::{RobotState, RodState, SimState};
use microswarm::rewards::{geometric_torque, transport_potential};
use microswarm::trainer::{EpisodeStats, StepRecord};
use std::path::Path;

pub const METRICS_HEADER: &str = "episode,steps,mean_abs_omega_rad_per_s,\
mean_signed_omega_rad_per_s,mean_robot_rod_distance_um,mean_torque_um,mean_reward,success,\
success_step,final_center_distance_um,final_angle_gap_rad,center_distance_trace_um,\
angle_gap_trace_rad";

/// Robots this close to the rod surface count as "at the rod" for the axial
/// distribution (contact range; one robot diameter plus the rod radius).
pub const AXIAL_CONTACT_RANGE: f64 = 9.0;
pub const AXIAL_BINS: usize = 20;
pub const AXIAL_SPAN: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub episode: u64,
    pub steps: usize,
    pub omega_abs: Vec<f64>,
    pub omega_signed: Vec<f64>,
    pub distance: f64,
    pub torque: f64,
    pub reward: f64,
    pub success: bool,
    pub success_step: Option<usize>,
    pub final_center_distance: f64,
    pub final_angle_gap: f64,
    pub center_distance_trace: Vec<f64>,
    pub angle_gap_trace: Vec<f64>,
}

impl From<&EpisodeStats> for MetricsRow {
    fn from(e: &EpisodeStats) -> Self {
        MetricsRow {
            episode: e.episode,
            steps: e.steps,
            omega_abs: e.omega_abs.clone(),
            omega_signed: e.omega_signed.clone(),
            distance: e.mean_robot_rod_distance,
            torque: e.mean_torque_proxy,
            reward: e.mean_reward,
            success: e.success,
            success_step: e.success_step,
            final_center_distance: e.final_center_distance,
            final_angle_gap: e.final_angle_gap,
            center_distance_trace: e.center_distance_trace.clone(),
            angle_gap_trace: e.angle_gap_trace.clone(),
        }
    }
}

fn join(vals: &[f64]) -> String {
    vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Long traces are thinned to at most 26 samples; the final point is kept.
fn sampled(trace: &[f64]) -> Vec<f64> {
    if trace.is_empty() {
        return Vec::new();
    }
    let stride = trace.len().div_ceil(25).max(1);
    let mut out: Vec<f64> = trace.iter().step_by(stride).copied().collect();
    if (trace.len() - 1) % stride != 0 {
        out.push(*trace.last().unwrap());
    }
    out
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.steps,
            join(&self.omega_abs),
            join(&self.omega_signed),
            self.distance,
            self.torque,
            self.reward,
            self.success,
            self.success_step.map(|s| s.to_string()).unwrap_or_default(),
            self.final_center_distance,
            self.final_angle_gap,
            join(&sampled(&self.center_distance_trace)),
            join(&sampled(&self.angle_gap_trace)),
        )
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.to_csv_line());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AxialHistogram {
    pub episode: u64,
    pub counts: Vec<u64>,
}

impl AxialHistogram {
    pub fn bin_edges(i: usize) -> (f64, f64) {
        let w = 2.0 * AXIAL_SPAN / AXIAL_BINS as f64;
        (-AXIAL_SPAN + i as f64 * w, -AXIAL_SPAN + (i + 1) as f64 * w)
    }
}

fn state_from_record(rec: &StepRecord) -> SimState {
    let robots = rec
        .robots
        .iter()
        .map(|[x, y, phi]| RobotState::new(Vec2::new(*x, *y), *phi, 0))
        .collect();
    let rods =
        rec.rods.iter().map(|[x, y, th]| RodState::new(Vec2::new(*x, *y), *th)).collect();
    SimState::new(robots, rods, Vec::new())
}

/// Recomputes per-episode metrics from poses alone. Robot-rod distances use
/// the nearest rod; angular velocity needs two consecutive records, so an
/// episode's first step contributes no omega sample.
pub fn evaluate_metrics(
    file: &TrajectoryFile,
) -> Result<(Vec<MetricsRow>, Vec<AxialHistogram>)> {
    if file.steps.is_empty() {
        bail!("trajectory has no step records");
    }
    let dt = file.header.action_duration_s;
    if !(dt > 0.0) {
        bail!("header action_duration_s must be positive");
    }
    let mut rows = Vec::new();
    let mut hists = Vec::new();
    let mut i = 0;
    while i < file.steps.len() {
        let episode = file.steps[i].episode;
        let mut j = i;
        while j < file.steps.len() && file.steps[j].episode == episode {
            j += 1;
        }
        let recs = &file.steps[i..j];
        let (row, hist) = episode_metrics(episode, recs, dt)?;
        rows.push(row);
        hists.push(hist);
        i = j;
    }
    Ok((rows, hists))
}

fn episode_metrics(
    episode: u64,
    recs: &[StepRecord],
    dt: f64,
) -> Result<(MetricsRow, AxialHistogram)> {
    let rods = recs[0].rods.len();
    let mut omega_abs = vec![0.0; rods];
    let mut omega_signed = vec![0.0; rods];
    for w in recs.windows(2) {
        for r in 0..rods {
            let d = angle_diff_mod_pi(w[1].rods[r][2], w[0].rods[r][2]) / dt;
            omega_abs[r] += d.abs();
            omega_signed[r] += d;
        }
    }
    let omega_samples = (recs.len() - 1).max(1) as f64;
    for r in 0..rods {
        omega_abs[r] /= omega_samples;
        omega_signed[r] /= omega_samples;
    }

    let mut distance_sum = 0.0;
    let mut distance_n = 0usize;
    let mut torque_sum = 0.0;
    let mut reward_sum = 0.0;
    let mut reward_n = 0usize;
    let mut counts = vec![0u64; AXIAL_BINS];
    let bin_w = 2.0 * AXIAL_SPAN / AXIAL_BINS as f64;
    let mut center_trace = Vec::new();
    let mut gap_trace = Vec::new();

    for rec in recs {
        let state = state_from_record(rec);
        for robot in &state.robots {
            let mut best = f64::INFINITY;
            let mut best_rod = 0;
            for (ri, rod) in state.rods.iter().enumerate() {
                let (a, b) = rod.endpoints();
                let d2 = point_segment(robot.position, a, b).0;
                if d2 < best {
                    best = d2;
                    best_rod = ri;
                }
            }
            let rod = &state.rods[best_rod];
            let d = best.sqrt();
            distance_sum += d;
            distance_n += 1;
            if d <= AXIAL_CONTACT_RANGE {
                let s = (robot.position - rod.center).dot(rod.axis());
                if (-AXIAL_SPAN..AXIAL_SPAN).contains(&s) {
                    counts[((s + AXIAL_SPAN) / bin_w) as usize] += 1;
                }
            }
        }
        torque_sum += geometric_torque(&state);
        for r in rec.rewards.iter().flatten() {
            reward_sum += r;
            reward_n += 1;
        }
        if let Some([tx, ty, tth]) = rec.target {
            let rod = &state.rods[0];
            center_trace.push((rod.center - Vec2::new(tx, ty)).norm());
            gap_trace.push(angle_diff_mod_pi(rod.theta, tth).abs());
        }
    }

    let mut success = false;
    let mut success_step = None;
    let mut final_center_distance = 0.0;
    let mut final_angle_gap = 0.0;
    if let Some([tx, ty, tth]) = recs[0].target {
        let target = (Vec2::new(tx, ty), tth);
        let last = recs.last().unwrap();
        let rod = RodState::new(Vec2::new(last.rods[0][0], last.rods[0][1]), last.rods[0][2]);
        // judged on the final pose with the stock threshold; a run with a
        // custom threshold terminates where its own rule says, which this
        // recomputation cannot know
        let v = transport_potential(rod.center, rod.theta, rod.half_length, target, 60);
        if v < 8.0 {
            success = true;
            success_step = Some(last.step);
        }
        final_center_distance = *center_trace.last().unwrap();
        final_angle_gap = *gap_trace.last().unwrap();
    }

    let row = MetricsRow {
        episode,
        steps: recs.len(),
        omega_abs,
        omega_signed,
        distance: distance_sum / distance_n.max(1) as f64,
        torque: torque_sum / recs.len() as f64,
        reward: reward_sum / reward_n.max(1) as f64,
        success,
        success_step,
        final_center_distance,
        final_angle_gap,
        center_distance_trace: center_trace,
        angle_gap_trace: gap_trace,
    };
    Ok((row, AxialHistogram { episode, counts }))
}

pub fn write_axial_csv(path: &Path, hists: &[AxialHistogram]) -> Result<()> {
    let mut text = String::from("episode,bin_low_um,bin_high_um,count\n");
    for h in hists {
        for (i, c) in h.counts.iter().enumerate() {
            let (lo, hi) = AxialHistogram::bin_edges(i);
            text.push_str(&format!("{},{lo},{hi},{c}\n", h.episode));
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn run_metrics(input: &Path, out_dir: &Path) -> Result<()> {
    let file = crate::trajectory::read_trajectories(input)?;
    let (rows, hists) = evaluate_metrics(&file)?;
    std::fs::create_dir_all(out_dir)?;
    write_metrics_csv(&out_dir.join("metrics.csv"), &rows)?;
    write_axial_csv(&out_dir.join("axial_histogram.csv"), &hists)?;
    println!(
        "{} episode(s), {} step record(s) -> {}",
        rows.len(),
        file.steps.len(),
        out_dir.display()
    );
    Ok(())
}
