use microswarm::trainer::StepRecord;
use microswarm_cli::trajectory::{
    read_trajectories, write_trajectories, TrajectoryHeader, TRAJECTORY_VERSION,
};
use std::path::PathBuf;

fn record(episode: u64, step: usize, theta: f64) -> StepRecord {
    StepRecord {
        episode,
        step,
        time: (step + 1) as f64 * 10.0,
        robots: vec![[100.0, 200.0, 0.5], [110.0, 210.0, 1.5]],
        rods: vec![[300.0, 350.0, theta]],
        actions: vec![0, 2],
        rewards: vec![Some(0.1), None],
        target: None,
    }
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn round_trip_preserves_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "t.jsonl");
    let header = TrajectoryHeader::new(2, 1, 10.0, 42, "rotation");
    let steps: Vec<StepRecord> = (0..5).map(|s| record(0, s, 0.01 * s as f64)).collect();
    write_trajectories(&path, &header, &steps).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 6, "header line plus one line per step");

    let back = read_trajectories(&path).unwrap();
    assert_eq!(back.header.robots, 2);
    assert_eq!(back.header.seed, 42);
    assert_eq!(back.header.units.length, "um");
    assert_eq!(back.steps.len(), 5);
    assert_eq!(back.steps[3].rods[0][2], 0.03);
    assert_eq!(back.steps[3].rewards, vec![Some(0.1), None]);
}

#[test]
fn newer_versions_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "future.jsonl");
    let mut header = TrajectoryHeader::new(1, 1, 10.0, 0, "rotation");
    header.version = TRAJECTORY_VERSION + 1;
    write_trajectories(&path, &header, &[]).unwrap();
    let err = format!("{:#}", read_trajectories(&path).unwrap_err());
    assert!(err.contains("newer than the supported"), "{err}");
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn wrong_format_marker_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "alien.jsonl");
    let mut header = TrajectoryHeader::new(1, 1, 10.0, 0, "rotation");
    header.format = "something-else".into();
    write_trajectories(&path, &header, &[]).unwrap();
    let err = format!("{:#}", read_trajectories(&path).unwrap_err());
    assert!(err.contains("something-else"), "{err}");
}

#[test]
fn malformed_lines_are_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "bad.jsonl");
    let header = TrajectoryHeader::new(2, 1, 10.0, 0, "rotation");
    write_trajectories(&path, &header, &[record(0, 0, 0.0)]).unwrap();
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{not json\n");
    std::fs::write(&path, text).unwrap();
    let err = format!("{:#}", read_trajectories(&path).unwrap_err());
    assert!(err.contains("line 3") && err.contains("malformed record"), "{err}");
}

#[test]
fn blank_lines_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "blank.jsonl");
    let header = TrajectoryHeader::new(2, 1, 10.0, 0, "rotation");
    write_trajectories(&path, &header, &[record(0, 0, 0.0)]).unwrap();
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push('\n');
    text.push_str(&serde_json::to_string(&record(0, 1, 0.01)).unwrap());
    text.push('\n');
    std::fs::write(&path, text).unwrap();
    let err = format!("{:#}", read_trajectories(&path).unwrap_err());
    assert!(err.contains("line 3") && err.contains("blank"), "{err}");
}

#[test]
fn record_counts_must_match_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "mismatch.jsonl");
    let header = TrajectoryHeader::new(3, 1, 10.0, 0, "rotation");
    write_trajectories(&path, &header, &[record(0, 0, 0.0)]).unwrap();
    let err = format!("{:#}", read_trajectories(&path).unwrap_err());
    assert!(err.contains("line 2") && err.contains("header says 3"), "{err}");
}

#[test]
fn empty_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let err = format!("{:#}", read_trajectories(&path).unwrap_err());
    assert!(err.contains("line 1"), "{err}");
}
