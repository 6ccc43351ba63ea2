use microswarm::trainer::StepRecord;
use microswarm_cli::metrics::{evaluate_metrics, AxialHistogram, METRICS_HEADER};
use microswarm_cli::trajectory::{TrajectoryFile, TrajectoryHeader};

fn file_with(steps: Vec<StepRecord>, robots: usize) -> TrajectoryFile {
    TrajectoryFile {
        header: TrajectoryHeader::new(robots, 1, 10.0, 0, "rotation"),
        steps,
    }
}

fn step(episode: u64, step: usize, robots: Vec<[f64; 3]>, rod: [f64; 3]) -> StepRecord {
    StepRecord {
        episode,
        step,
        time: (step + 1) as f64 * 10.0,
        robots,
        rods: vec![rod],
        actions: Vec::new(),
        rewards: Vec::new(),
        target: None,
    }
}

#[test]
fn uniform_rotation_recovers_the_angular_velocity() {
    // 0.01 rad per 10 s action = 1e-3 rad/s, both senses
    for sign in [1.0, -1.0] {
        let steps: Vec<StepRecord> = (0..51)
            .map(|s| {
                step(0, s, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, sign * 0.01 * s as f64])
            })
            .collect();
        let (rows, _) = evaluate_metrics(&file_with(steps, 1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].omega_abs[0] - 1e-3).abs() < 1e-12, "{}", rows[0].omega_abs[0]);
        assert!(
            (rows[0].omega_signed[0] - sign * 1e-3).abs() < 1e-12,
            "{}",
            rows[0].omega_signed[0]
        );
    }
}

#[test]
fn rod_orientation_wraps_modulo_pi() {
    // crossing the pi/2 representative boundary must not spike omega
    let steps: Vec<StepRecord> = (0..11)
        .map(|s| step(0, s, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 1.5 + 0.01 * s as f64]))
        .collect();
    let (rows, _) = evaluate_metrics(&file_with(steps, 1)).unwrap();
    assert!((rows[0].omega_signed[0] - 1e-3).abs() < 1e-12, "{}", rows[0].omega_signed[0]);
}

#[test]
fn stationary_rod_has_zero_omega_and_exact_distance() {
    // robot 10 um above the rod axis midpoint
    let steps: Vec<StepRecord> = (0..5)
        .map(|s| step(0, s, vec![[300.0, 360.0, 0.0]], [300.0, 350.0, 0.0]))
        .collect();
    let (rows, hists) = evaluate_metrics(&file_with(steps, 1)).unwrap();
    assert_eq!(rows[0].omega_abs[0], 0.0);
    assert_eq!(rows[0].omega_signed[0], 0.0);
    assert!((rows[0].distance - 10.0).abs() < 1e-12);
    // 10 um is outside the 9 um contact range
    assert_eq!(hists[0].counts.iter().sum::<u64>(), 0);
}

#[test]
fn single_record_episodes_have_no_omega_samples() {
    let steps = vec![step(0, 0, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.3])];
    let (rows, _) = evaluate_metrics(&file_with(steps, 1)).unwrap();
    assert_eq!(rows[0].omega_abs[0], 0.0);
}

#[test]
fn axial_histogram_is_symmetric_for_mirrored_robots() {
    let robots = vec![[300.0 - 27.5, 355.0, 0.0], [300.0 + 27.5, 355.0, 0.0]];
    let steps: Vec<StepRecord> =
        (0..3).map(|s| step(0, s, robots.clone(), [300.0, 350.0, 0.0])).collect();
    let (_, hists) = evaluate_metrics(&file_with(steps, 2)).unwrap();
    let counts = &hists[0].counts;
    assert_eq!(counts.iter().sum::<u64>(), 6, "both robots in contact every record");
    let (lo, hi) = AxialHistogram::bin_edges(4);
    assert_eq!((lo, hi), (-30.0, -25.0));
    assert_eq!(counts[4], 3);
    assert_eq!(counts[15], 3, "mirror bin [25,30) holds the mirrored robot");
    assert_eq!(counts[4], counts[15]);
}

#[test]
fn rewards_average_over_issued_entries_only() {
    let mut s0 = step(0, 0, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.0]);
    s0.rewards = vec![Some(1.0), None, Some(3.0)];
    let mut s1 = step(0, 1, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.0]);
    s1.rewards = vec![None, None, None];
    let (rows, _) = evaluate_metrics(&file_with(vec![s0, s1], 1)).unwrap();
    assert_eq!(rows[0].reward, 2.0);
}

#[test]
fn transport_success_is_judged_on_the_final_pose() {
    let target = Some([300.0, 350.0, 0.0]);
    let far = [140.0, 260.0, 0.9];
    let mut on_target: Vec<StepRecord> = vec![
        step(0, 0, vec![[10.0, 10.0, 0.0]], far),
        step(0, 1, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.0]),
    ];
    for s in &mut on_target {
        s.target = target;
    }
    let (rows, _) = evaluate_metrics(&file_with(on_target, 1)).unwrap();
    assert!(rows[0].success);
    assert_eq!(rows[0].success_step, Some(1));
    assert_eq!(rows[0].final_center_distance, 0.0);
    assert_eq!(rows[0].center_distance_trace.len(), 2);

    let mut away: Vec<StepRecord> = vec![
        step(1, 0, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.0]),
        step(1, 1, vec![[10.0, 10.0, 0.0]], far),
    ];
    for s in &mut away {
        s.target = target;
    }
    let (rows, _) = evaluate_metrics(&file_with(away, 1)).unwrap();
    assert!(!rows[0].success, "an early crossing does not count, the final pose does");
    assert!(rows[0].final_center_distance > 100.0);
}

#[test]
fn episodes_are_grouped_in_order() {
    let steps = vec![
        step(3, 0, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.0]),
        step(3, 1, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.01]),
        step(4, 0, vec![[10.0, 10.0, 0.0]], [300.0, 350.0, 0.0]),
    ];
    let (rows, hists) = evaluate_metrics(&file_with(steps, 1)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].episode, rows[1].episode), (3, 4));
    assert_eq!(hists.len(), 2);
    assert_eq!((rows[0].steps, rows[1].steps), (2, 1));
}

#[test]
fn csv_lines_thin_long_traces() {
    let target = Some([300.0, 350.0, 0.0]);
    let mut steps: Vec<StepRecord> = (0..100)
        .map(|s| step(0, s, vec![[10.0, 10.0, 0.0]], [300.0 + s as f64, 350.0, 0.0]))
        .collect();
    for s in &mut steps {
        s.target = target;
    }
    let (rows, _) = evaluate_metrics(&file_with(steps, 1)).unwrap();
    let line = rows[0].to_csv_line();
    let fields: Vec<&str> = line.split(',').collect();
    assert_eq!(fields.len(), METRICS_HEADER.split(',').count());
    let trace: Vec<&str> = fields[11].split(';').collect();
    assert!(trace.len() <= 26, "trace thinned to at most 26 samples, got {}", trace.len());
    let last: f64 = trace.last().unwrap().parse().unwrap();
    assert_eq!(last, 99.0, "the final sample survives thinning");
}
