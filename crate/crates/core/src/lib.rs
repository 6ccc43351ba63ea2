//! Simulation and training stack for light-driven microrobot swarms:
//! overdamped disk robots pushing rod cargo, cone-sensor observations,
//! counterfactual per-agent rewards and PPO on a small shared policy net.

pub mod error;
pub mod math;
pub mod perception;
pub mod physics;
pub mod policy;
pub mod rewards;
pub mod trainer;

pub use error::{Result, SwarmError};
