//! Committed reference fixture: checkpoints and expected forward outputs
//! produced by an independent implementation (tools/gen_reference_fixture.py).
//! Agreement to 1e-12 pins both the checkpoint format and the arithmetic.

use microswarm::policy::{deserialize_params, forward_policy, forward_value};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    input: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    value: f64,
}

#[derive(Deserialize)]
struct Expected {
    cases: Vec<Case>,
}

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {path}: {e}"))
}

#[test]
fn reference_checkpoints_reproduce_recorded_outputs() {
    let actor = deserialize_params(&fixture("reference_actor.json")).unwrap();
    let critic = deserialize_params(&fixture("reference_critic.json")).unwrap();
    let expected: Expected = serde_json::from_str(&fixture("reference_forward.json")).unwrap();
    assert!(!expected.cases.is_empty());

    let mut worst: f64 = 0.0;
    for case in &expected.cases {
        let (dist, cache) = forward_policy(&actor, &case.input).unwrap();
        let (value, _) = forward_value(&critic, &case.input).unwrap();
        for (got, want) in cache.output.iter().zip(&case.logits) {
            worst = worst.max((got - want).abs());
        }
        for (got, want) in dist.probs.iter().zip(&case.probs) {
            worst = worst.max((got - want).abs());
        }
        worst = worst.max((value - case.value).abs());
    }
    assert!(worst < 1e-12, "worst forward disagreement {worst:e}");
}

#[test]
fn reference_checkpoints_have_the_production_architecture() {
    let actor = deserialize_params(&fixture("reference_actor.json")).unwrap();
    let critic = deserialize_params(&fixture("reference_critic.json")).unwrap();
    assert!(actor.check_io(10, 4).is_ok());
    assert!(critic.check_io(10, 1).is_ok());
    let widths: Vec<usize> = actor.layers.iter().map(|l| l.rows).collect();
    assert_eq!(widths, vec![32, 16, 16, 4]);
}
