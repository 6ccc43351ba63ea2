//! Harness around the simulation/training library: run configuration,
//! training, evaluation, sweeps, trajectory files, metrics and plots.

pub mod config;
pub mod eval;
pub mod metrics;
pub mod replay;
pub mod svg;
pub mod sweep;
pub mod trajectory;
pub mod train;
