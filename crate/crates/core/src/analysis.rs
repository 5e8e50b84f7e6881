//! Mean and mean-square convergence models for the adapt-then-combine
//! correntropy diffusion network.
//!
//! The network-wide recursions operate on stacked `MN`-dimensional error
//! vectors and, for second-order behavior, on `M^2 N^2`-dimensional
//! block-vectorized weighting matrices. See [`blockmat`] for the block
//! Kronecker machinery, [`mean`] for stability bounds and the mean error
//! recursion, and [`transient`] for the semi-analytic deviation model.

pub mod blockmat;
pub mod mean;
pub mod transient;

pub use blockmat::{block_kron, bvec, unbvec};
pub use mean::{
    estimate_kernel_expectation, mean_error_recursion, mean_stability_bound, ErrorSpec,
    GlobalModel, KernelGain, MeanRecursion, StabilityBound,
};
pub use transient::{build_fourth_moment, transient_msd_model, StepMoments, TransientModel,
    TransientPrediction};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("matrix dimension {got} is not a multiple of the block size {block}")]
    BlockMismatch { got: usize, block: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("the transient model requires finite-variance noise")]
    InfiniteVarianceNoise,
}

/// Spectral radius of a square matrix (largest eigenvalue modulus).
pub fn spectral_radius(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
