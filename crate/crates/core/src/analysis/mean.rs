//! Mean-convergence machinery: the expected-step bound that keeps the
//! network unbiased, and the stacked mean error recursion.

use nalgebra::{DMatrix, DVector};

use super::{spectral_radius, AnalysisError};
use crate::diffusion::gaussian_kernel;
use crate::network::CombinationMatrix;
use crate::rng::{self, purpose};
use crate::signal::{MeasurementModel, NoiseModel};

/// Distribution of the adaptation error used when estimating the expected
/// kernel gain.
#[derive(Debug, Clone)]
pub enum ErrorSpec {
    /// Deterministic error value (its kernel gain is exact, no sampling).
    Constant(f64),
    /// Errors drawn from a noise model.
    Noise(NoiseModel),
}

/// Monte Carlo estimate of `E[G_sigma(e)]` over the given error
/// distribution. Deterministic per seed; exact for constant errors.
pub fn estimate_kernel_expectation(
    spec: &ErrorSpec,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> f64 {
    match spec {
        ErrorSpec::Constant(e) => gaussian_kernel(*e, sigma),
        ErrorSpec::Noise(model) => {
            assert!(n_samples >= 1);
            let mut gate = rng::stream(seed, &[purpose::KERNEL_EXPECTATION, 0]);
            let mut amp = rng::stream(seed, &[purpose::KERNEL_EXPECTATION, 1]);
            let mut sum = 0.0;
            for _ in 0..n_samples {
                sum += gaussian_kernel(model.sample(&mut gate, &mut amp), sigma);
            }
            sum / n_samples as f64
        }
    }
}

/// How to evaluate the expected kernel gain inside the step-size bound.
#[derive(Debug, Clone)]
pub enum KernelGain {
    /// The kernel peak `G_sigma(0)`: the largest possible gain, hence the
    /// most conservative bound.
    WorstCase,
    /// Monte Carlo over an error distribution.
    Estimated {
        spec: ErrorSpec,
        samples: usize,
        seed: u64,
    },
    /// Monte Carlo over the l1-norm envelope of the error,
    /// `G_sigma(tau * ||u||_1 + |d|)`, for estimates with l1 norm below
    /// `tau`.
    L1Bound {
        tau: f64,
        model: MeasurementModel,
        noise: NoiseModel,
        node: usize,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBound {
    /// Largest mean-stable step size: `2 / (lambda_max * E[gain])`.
    pub eta_max: f64,
    /// The expected kernel gain used.
    pub kernel_gain: f64,
}

/// Mean-stability step-size bound for one node with regressor spectral peak
/// `lambda_max` and kernel size `sigma`.
pub fn mean_stability_bound(lambda_max: f64, sigma: f64, gain: &KernelGain) -> StabilityBound {
    assert!(lambda_max > 0.0, "regressor power must be positive");
    let kernel_gain = match gain {
        KernelGain::WorstCase => gaussian_kernel(0.0, sigma),
        KernelGain::Estimated {
            spec,
            samples,
            seed,
        } => estimate_kernel_expectation(spec, sigma, *samples, *seed),
        KernelGain::L1Bound {
            tau,
            model,
            noise,
            node,
            samples,
            seed,
        } => {
            assert!(*samples >= 1);
            let mut reg = rng::stream(*seed, &[purpose::STABILITY_PROBE, 0]);
            let mut gate = rng::stream(*seed, &[purpose::STABILITY_PROBE, 1]);
            let mut amp = rng::stream(*seed, &[purpose::STABILITY_PROBE, 2]);
            let mut sum = 0.0;
            for _ in 0..*samples {
                let (u, d) =
                    crate::signal::generate_node_datum(model, noise, *node, &mut reg, &mut gate, &mut amp);
                let envelope = tau * u.iter().map(|x| x.abs()).sum::<f64>() + d.abs();
                sum += gaussian_kernel(envelope, sigma);
            }
            sum / *samples as f64
        }
    };
    StabilityBound {
        eta_max: 2.0 / (lambda_max * kernel_gain),
        kernel_gain,
    }
}

/// Block-diagonal regressor autocorrelation for white per-node regressors:
/// node `k` contributes the block `variance_k * I_m`.
pub fn regressor_autocorrelation(variances: &[f64], m: usize) -> DMatrix<f64> {
    let n = variances.len();
    let mut r = DMatrix::zeros(n * m, n * m);
    for (k, &v) in variances.iter().enumerate() {
        for a in 0..m {
            r[(k * m + a, k * m + a)] = v;
        }
    }
    r
}

/// Lift a combination matrix to the stacked network space. The stacked
/// update `W = B * Phi` applies column `k` of the combination matrix to
/// node `k`'s fusion, so the block structure is the transposed matrix
/// Kronecker the identity.
pub fn block_combiner(matrix: &CombinationMatrix, m: usize) -> DMatrix<f64> {
    matrix
        .as_matrix()
        .transpose()
        .kronecker(&DMatrix::identity(m, m))
}

/// The stacked first- and second-order description of the network that the
/// convergence models consume.
#[derive(Debug, Clone)]
pub struct GlobalModel {
    n: usize,
    m: usize,
    combiner: DMatrix<f64>,
    regressor_autocorrelation: DMatrix<f64>,
    regressor_variances: Vec<f64>,
    expected_step: Vec<f64>,
    noise_variances: Vec<f64>,
}

impl GlobalModel {
    /// Assemble the model from per-node quantities.
    ///
    /// `expected_step[k]` is `E[rho_k]`, the mean effective step of node `k`
    /// (for the least-squares criterion this is just the step size; for the
    /// kernel criterion it is the step times the expected kernel gain).
    pub fn new(
        combiner: &CombinationMatrix,
        m: usize,
        regressor_variances: Vec<f64>,
        expected_step: Vec<f64>,
        noise_variances: Vec<f64>,
    ) -> Result<Self, AnalysisError> {
        let n = combiner.n();
        if regressor_variances.len() != n
            || expected_step.len() != n
            || noise_variances.len() != n
        {
            return Err(AnalysisError::Dimension(format!(
                "per-node vectors must have length {n}"
            )));
        }
        Ok(Self {
            n,
            m,
            combiner: block_combiner(combiner, m),
            regressor_autocorrelation: regressor_autocorrelation(&regressor_variances, m),
            regressor_variances,
            expected_step,
            noise_variances,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn block_combiner(&self) -> &DMatrix<f64> {
        &self.combiner
    }

    pub fn regressor_autocorrelation_matrix(&self) -> &DMatrix<f64> {
        &self.regressor_autocorrelation
    }

    pub fn regressor_variances(&self) -> &[f64] {
        &self.regressor_variances
    }

    pub fn expected_step(&self) -> &[f64] {
        &self.expected_step
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    /// Block-diagonal expected step matrix `E[Y]`.
    pub fn expected_step_matrix(&self) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.n * self.m, self.n * self.m);
        for (k, &rho) in self.expected_step.iter().enumerate() {
            for a in 0..self.m {
                y[(k * self.m + a, k * self.m + a)] = rho;
            }
        }
        y
    }

    /// The mean error transition `B (I - E[Y] R_U)`.
    pub fn mean_transition(&self) -> DMatrix<f64> {
        let mn = self.n * self.m;
        let z = DMatrix::identity(mn, mn)
            - self.expected_step_matrix() * &self.regressor_autocorrelation;
        &self.combiner * z
    }
}

/// Trajectory of the stacked mean error under the linear recursion, plus the
/// spectral radius that decides whether it decays.
#[derive(Debug, Clone)]
pub struct MeanRecursion {
    /// `E[W_err(i)]` for `i = 0..=iterations`.
    pub trajectory: Vec<DVector<f64>>,
    pub spectral_radius: f64,
    pub stable: bool,
}

/// Iterate the mean error recursion from `initial` for `iterations` steps.
pub fn mean_error_recursion(
    model: &GlobalModel,
    initial: &DVector<f64>,
    iterations: usize,
) -> Result<MeanRecursion, AnalysisError> {
    let mn = model.n() * model.m();
    if initial.len() != mn {
        return Err(AnalysisError::Dimension(format!(
            "initial error must have length {mn}, got {}",
            initial.len()
        )));
    }
    let transition = model.mean_transition();
    let radius = spectral_radius(&transition);
    let mut trajectory = Vec::with_capacity(iterations + 1);
    trajectory.push(initial.clone());
    for _ in 0..iterations {
        let next = &transition * trajectory.last().unwrap();
        trajectory.push(next);
    }
    Ok(MeanRecursion {
        trajectory,
        spectral_radius: radius,
        stable: radius < 1.0,
    })
}
