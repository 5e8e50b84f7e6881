//! Monte Carlo harness: configured algorithms run over shared seeded data
//! streams, deviation metrics are ensemble-averaged in the linear domain,
//! and results persist as CSV tables plus a JSON manifest.

pub mod config;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod sweep;

pub use config::{
    AlgorithmSpec, CriterionKind, Experiment, ExperimentConfig, ModelSpec, NoiseSpec, RunSpec,
    ScalarOrPerNode, TopologySpec,
};
pub use metrics::{network_msd, steady_state_msd, to_db, DB_FLOOR_LINEAR};
pub use output::{curves_csv, manifest_json, steady_state_csv, sweep_csv, sweep_manifest_json};
pub use runner::{
    estimate_step_moments, run_monte_carlo, AlgorithmResult, DivergedRun, RunResult,
    DIVERGENCE_SENTINEL_LINEAR, DIVERGENCE_THRESHOLD,
};
pub use sweep::{parameter_sweep, SweepGrid, SweepResult, SweepRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown sweep parameter '{0}'")]
    UnknownSweepParam(String),
    #[error("steady-state window {window} exceeds trajectory length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error(transparent)]
    Topology(#[from] crate::network::TopologyError),
    #[error(transparent)]
    Signal(#[from] crate::signal::ParamError),
    #[error(transparent)]
    Algorithm(#[from] crate::diffusion::ConfigError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}
