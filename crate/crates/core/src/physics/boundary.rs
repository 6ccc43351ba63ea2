//! Inward-steering override near the arena walls. Robots inside the margin
//! are commanded back toward the interior and their transitions are masked
//! out of training.

use super::{ActionCommand, SimState, WorldConfig, TURN_ANGLE};
use crate::math::{angle_diff, Vec2};

/// Per-robot override (None when the robot is free) and the exclusion mask.
pub fn boundary_policy(
    state: &SimState,
    cfg: &WorldConfig,
) -> (Vec<Option<ActionCommand>>, Vec<bool>) {
    let n = state.robots.len();
    let mut overrides = vec![None; n];
    let mut mask = vec![false; n];
    let m = cfg.boundary_margin;

    for (i, r) in state.robots.iter().enumerate() {
        if !r.active {
            continue;
        }
        let mut inward = Vec2::ZERO;
        if r.position.x < m {
            inward.x += 1.0;
        }
        if r.position.x > cfg.arena.x - m {
            inward.x -= 1.0;
        }
        if r.position.y < m {
            inward.y += 1.0;
        }
        if r.position.y > cfg.arena.y - m {
            inward.y -= 1.0;
        }
        if inward == Vec2::ZERO {
            continue;
        }
        let delta = angle_diff(inward.angle(), r.phi);
        let cmd = if delta.abs() <= TURN_ANGLE {
            ActionCommand::Forward
        } else if delta > 0.0 {
            ActionCommand::TurnLeft
        } else {
            ActionCommand::TurnRight
        };
        overrides[i] = Some(cmd);
        mask[i] = true;
    }
    (overrides, mask)
}
