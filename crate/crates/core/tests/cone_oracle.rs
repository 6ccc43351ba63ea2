//! Brute-force re-evaluation of the cone encoding on random scenes.
//!
//! The reference below is written independently of the library code: plain
//! interval scans, no caching, no early exits. Frozen before the library
//! implementation; do not edit to make a failure pass.

use microswarm::math::Vec2;
use microswarm::perception::{encode_cones, ConeLayout};
use microswarm::physics::RobotState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

fn reference_encode(
    focal: Vec2,
    phi: f64,
    points: &[Vec2],
    cones: usize,
    fov: f64,
    sigma: f64,
) -> Vec<f64> {
    let width = fov / cones as f64;
    let mut out = vec![0.0f64; cones];
    for p in points {
        let d = ((p.x - focal.x).powi(2) + (p.y - focal.y).powi(2)).sqrt();
        let contribution = if d == 0.0 { 1.0 } else { (sigma / d).min(1.0) };
        let mut bearing = (p.y - focal.y).atan2(p.x - focal.x) - phi;
        while bearing < -PI {
            bearing += TAU;
        }
        while bearing >= PI {
            bearing -= TAU;
        }
        for l in 0..cones {
            let lo = -fov / 2.0 + l as f64 * width;
            let hi = lo + width;
            if bearing >= lo && bearing < hi {
                out[l] += contribution;
                break;
            }
        }
    }
    for v in out.iter_mut() {
        *v = v.min(1.0);
    }
    out
}

#[test]
fn matches_brute_force_on_random_scenes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let layouts = [(5usize, PI), (10usize, TAU)];
    for scene in 0..1000 {
        let (cones, fov) = layouts[scene % 2];
        let layout = ConeLayout { cones, fov };
        let focal_pos = Vec2::new(rng.random_range(0.0..600.0), rng.random_range(0.0..700.0));
        let phi = rng.random_range(-PI..PI);
        let n = rng.random_range(0..80);
        let points: Vec<Vec2> = (0..n)
            .map(|_| {
                Vec2::new(rng.random_range(0.0..600.0), rng.random_range(0.0..700.0))
            })
            .collect();
        let focal = RobotState::new(focal_pos, phi, 0);

        let got = encode_cones(&focal, &points, &layout, 6.0);
        let want = reference_encode(focal_pos, phi, &points, cones, fov, 6.0);
        assert_eq!(got.len(), want.len());
        for (l, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!(
                (g - w).abs() < 1e-12,
                "scene {scene}, cone {l}: got {g}, reference {w}"
            );
        }
    }
}
