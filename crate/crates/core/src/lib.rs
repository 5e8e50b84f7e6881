//! Robust distributed parameter estimation over adaptive networks.
//!
//! Nodes of a connected network jointly estimate an unknown parameter vector
//! from noisy linear measurements by combining local gradient adaptation with
//! convex fusion of neighbor estimates. The crate provides:
//!
//! * [`network`] — random geometric topologies and combination weight matrices,
//! * [`signal`] — measurement models and impulsive (alpha-stable) noise,
//! * [`diffusion`] — the per-iteration adapt/combine machinery for the
//!   correntropy, least-squares, p-power, and error-entropy criteria,
//! * [`analysis`] — mean and mean-square convergence models (stability bounds,
//!   mean error recursion, transient deviation prediction),
//! * [`experiment`] — a seeded, paired-stream Monte Carlo harness with CSV and
//!   JSON outputs.
//!
//! All randomness is derived from explicit seeds; every run is a pure function
//! of its configuration.

pub use nalgebra;

pub mod analysis;
pub mod diffusion;
pub mod experiment;
pub mod network;
pub mod rng;
pub mod signal;

pub use diffusion::{AlgorithmConfig, Criterion, Mode, NetworkState};
pub use experiment::{ExperimentConfig, RunResult};
pub use network::{CombinationMatrix, CombinationRule, NetworkTopology};
pub use signal::{AlphaStableParams, MeasurementModel, NoiseModel};
