//! Brute-force oracle for advantage estimation.
//!
//! The oracle evaluates the defining sum directly: for every included step
//! t, A_t = sum over k >= t within the same unbroken chain of
//! (gamma*lambda)^(k-t) * delta_k, with delta_k = r_k + gamma * V_{k+1} *
//! (1 - done_k) - V_k. Chains break where a transition is excluded; the
//! bootstrap V_{k+1} is the next recorded critic value regardless of that
//! transition's exclusion flag, and 0 past the end of the trajectory.
//!
//! Frozen before the library implementation; do not edit to make a failure
//! pass.

use microswarm::physics::ActionCommand;
use microswarm::trainer::{compute_gae, AgentTrajectory, Transition, TransitionBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn transition(step: usize, reward: f64, value: f64, excluded: bool, done: bool) -> Transition {
    Transition {
        agent: 0,
        step,
        obs: Vec::new(),
        action: ActionCommand::Stay,
        log_prob: 0.0,
        reward,
        value,
        excluded,
        done,
    }
}

fn oracle(steps: &[Transition], gamma: f64, lambda: f64) -> Vec<Option<f64>> {
    let n = steps.len();
    let mut out = vec![None; n];
    for t in 0..n {
        if steps[t].excluded {
            continue;
        }
        let mut acc = 0.0;
        let mut weight = 1.0;
        let mut k = t;
        loop {
            let next_value = if k + 1 < n { steps[k + 1].value } else { 0.0 };
            let not_done = if steps[k].done { 0.0 } else { 1.0 };
            let delta = steps[k].reward + gamma * next_value * not_done - steps[k].value;
            acc += weight * delta;
            if steps[k].done || k + 1 >= n || steps[k + 1].excluded {
                break;
            }
            weight *= gamma * lambda;
            k += 1;
        }
        out[t] = Some(acc);
    }
    out
}

#[test]
fn matches_brute_force_on_random_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6ae5);
    for case in 0..1000 {
        let len = rng.random_range(1..=12);
        let gamma = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.5..1.0);
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let excluded = rng.random::<f64>() < 0.25;
            // done may fire anywhere; later steps then form a fresh chain
            let done = rng.random::<f64>() < 0.15 || t == len - 1;
            steps.push(transition(
                t,
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.0..1.0),
                excluded,
                done,
            ));
        }
        let expected = oracle(&steps, gamma, lambda);

        let batch = TransitionBatch::new(vec![AgentTrajectory {
            agent: 0,
            episode: case,
            steps: steps.clone(),
        }]);
        let got = compute_gae(&batch, gamma, lambda).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].len(), len);
        for t in 0..len {
            match (&expected[t], &got[0][t]) {
                (None, None) => {}
                (Some(want), Some(row)) => {
                    assert!(
                        (want - row.advantage).abs() < 1e-10,
                        "case {case} step {t}: oracle {want}, got {}",
                        row.advantage
                    );
                    assert!(
                        (row.value_target - (row.advantage + steps[t].value)).abs() < 1e-12,
                        "value target must be advantage plus baseline"
                    );
                }
                (want, got) => panic!("case {case} step {t}: {want:?} vs {got:?}"),
            }
        }
    }
}

#[test]
fn undiscounted_full_trace_telescopes_to_return_minus_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x77aa);
    for _ in 0..100 {
        let len = rng.random_range(1..=10);
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            steps.push(transition(
                t,
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                false,
                t == len - 1,
            ));
        }
        let batch = TransitionBatch::new(vec![AgentTrajectory {
            agent: 3,
            episode: 0,
            steps: steps.clone(),
        }]);
        let got = compute_gae(&batch, 1.0, 1.0).unwrap();
        for t in 0..len {
            let remaining: f64 = steps[t..].iter().map(|s| s.reward).sum();
            let adv = got[0][t].as_ref().unwrap().advantage;
            assert!((adv - (remaining - steps[t].value)).abs() < 1e-10);
        }
    }
}

#[test]
fn zero_rewards_and_values_give_zero_advantages() {
    let steps: Vec<Transition> =
        (0..6).map(|t| transition(t, 0.0, 0.0, false, t == 5)).collect();
    let batch =
        TransitionBatch::new(vec![AgentTrajectory { agent: 0, episode: 0, steps }]);
    for row in compute_gae(&batch, 0.97, 0.95).unwrap()[0].iter() {
        assert_eq!(row.as_ref().unwrap().advantage, 0.0);
    }
}

#[test]
fn out_of_order_steps_are_rejected() {
    let steps = vec![
        transition(0, 0.1, 0.0, false, false),
        transition(2, 0.1, 0.0, false, false),
        transition(1, 0.1, 0.0, false, true),
    ];
    let batch =
        TransitionBatch::new(vec![AgentTrajectory { agent: 0, episode: 0, steps }]);
    assert!(compute_gae(&batch, 0.97, 0.95).is_err());
}
