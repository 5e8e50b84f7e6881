//! Semi-analytic transient model of the network mean-square deviation for
//! the adapt-then-combine kernel-weighted update.
//!
//! The stacked error covariance `K(i) = E[W_err(i) W_err(i)^T]`, block
//! vectorized in the regressor eigenbasis, evolves as
//!
//! ```text
//! k(i) = (Bb (.) Bb) * [ bracket(i) * k(i-1) + chi(i) ]
//! bracket(i) = I - (Lambda E[Y(i)] (.) I) - (I (.) Lambda E[Y(i)])
//!              + E[Y(i) (.) Y(i)] * A
//! chi(i) = bvec( R_v  E[Y(i)^2] Lambda )
//! ```
//!
//! where `(.)` is the block Kronecker product, `Bb` the combiner in the
//! eigenbasis, `A` the Gaussian regressor fourth-moment operator (exact on
//! symmetric weightings), and `E[Y]`, `E[Y^2]` the per-iteration moments of
//! the effective step. Those moments depend on the error distribution, which
//! has no closed form here, so the caller supplies them — typically
//! estimated from a pilot Monte Carlo run. The network deviation is read out
//! against the identity weighting: `msd(i) = k(i) . bvec(I) / N`.
//!
//! The model only applies to finite-variance (Gaussian-regime) noise, and
//! its state has `M^2 N^2` entries: intended for small networks.

use nalgebra::{DMatrix, DVector};

use super::blockmat::{block_kron, bvec};
use super::mean::GlobalModel;
use super::{spectral_radius, AnalysisError};

/// Per-node moments of the effective step at one iteration:
/// `mean[k] = E[rho_k(i)]`, `second[k] = E[rho_k(i)^2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMoments {
    pub mean: Vec<f64>,
    pub second: Vec<f64>,
}

impl StepMoments {
    /// Deterministic steps (least-squares): `rho = eta` exactly.
    pub fn deterministic(eta: &[f64]) -> Self {
        Self {
            mean: eta.to_vec(),
            second: eta.iter().map(|e| e * e).collect(),
        }
    }
}

/// Gaussian fourth-moment operator `A` for per-node regressor eigenvalues.
///
/// Chunk `(j, i)` holds `E[s_j (x) s_i]` with `s_k = u_k u_k^T`: for
/// `i != j` the diagonal block `Lambda_j (x) Lambda_i`; for `i == j` the
/// symmetric-weighting form `2 Lambda (x) Lambda + vecd(Lambda) vecd(Lambda)^T`.
pub fn build_fourth_moment(lambda: &[DVector<f64>]) -> DMatrix<f64> {
    let n = lambda.len();
    let m = lambda[0].len();
    let mm = m * m;
    let mut a = DMatrix::zeros(n * n * mm, n * n * mm);
    for j in 0..n {
        for i in 0..n {
            let chunk = (j * n + i) * mm;
            if i != j {
                for av in 0..m {
                    for cv in 0..m {
                        let idx = chunk + av * m + cv;
                        a[(idx, idx)] = lambda[j][av] * lambda[i][cv];
                    }
                }
            } else {
                for av in 0..m {
                    for cv in 0..m {
                        let idx = chunk + av * m + cv;
                        a[(idx, idx)] += 2.0 * lambda[j][av] * lambda[j][cv];
                    }
                }
                for av in 0..m {
                    for bv in 0..m {
                        a[(chunk + av * m + av, chunk + bv * m + bv)] +=
                            lambda[j][av] * lambda[j][bv];
                    }
                }
            }
        }
    }
    a
}

/// The iteration-independent pieces of the transient recursion.
#[derive(Debug, Clone)]
pub struct TransientModel {
    n: usize,
    m: usize,
    q: DMatrix<f64>,
    lambda: Vec<DVector<f64>>,
    propagate: DMatrix<f64>,
    fourth: DMatrix<f64>,
    noise_variances: Vec<f64>,
}

/// Predicted deviation trajectory and the stability verdict of the final
/// transition.
#[derive(Debug, Clone)]
pub struct TransientPrediction {
    /// Network MSD after each iteration, linear scale, length `iterations`.
    pub msd: Vec<f64>,
    /// The same trajectory in dB (floored at 1e-30 linear).
    pub msd_db: Vec<f64>,
    /// Spectral radius of the transition built from the last moment row.
    pub spectral_radius: f64,
    pub stable: bool,
    /// Fixed-point network MSD (linear) when the transition is stable.
    pub steady_state: Option<f64>,
}

fn to_db(linear: f64) -> f64 {
    10.0 * linear.max(1e-30).log10()
}

impl TransientModel {
    pub fn new(model: &GlobalModel) -> Result<Self, AnalysisError> {
        let (n, m) = (model.n(), model.m());
        for &v in model.noise_variances() {
            if !v.is_finite() || v < 0.0 {
                return Err(AnalysisError::InfiniteVarianceNoise);
            }
        }

        // Per-node eigendecomposition of the regressor autocorrelation.
        // White regressors give diagonal blocks, where Q is the identity.
        let r = model.regressor_autocorrelation_matrix();
        let mn = n * m;
        let mut q = DMatrix::identity(mn, mn);
        let mut lambda = Vec::with_capacity(n);
        let clamp = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
        for k in 0..n {
            let block = r.view((k * m, k * m), (m, m)).into_owned();
            let diagonal = (0..m)
                .all(|a| (0..m).all(|b| a == b || block[(a, b)] == 0.0));
            if diagonal {
                lambda.push(DVector::from_fn(m, |a, _| clamp(block[(a, a)])));
            } else {
                let eig = block.symmetric_eigen();
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&a, &b| {
                    eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap()
                });
                let vals = DVector::from_fn(m, |a, _| clamp(eig.eigenvalues[order[a]]));
                for (a, &src) in order.iter().enumerate() {
                    q.view_mut((k * m, k * m + a), (m, 1))
                        .copy_from(&eig.eigenvectors.column(src));
                }
                lambda.push(vals);
            }
        }

        let b_bar = q.transpose() * model.block_combiner() * &q;
        let propagate = block_kron(&b_bar, &b_bar, m)?;
        let fourth = build_fourth_moment(&lambda);
        Ok(Self {
            n,
            m,
            q,
            lambda,
            propagate,
            fourth,
            noise_variances: model.noise_variances().to_vec(),
        })
    }

    fn check_moments(&self, moments: &[StepMoments]) -> Result<(), AnalysisError> {
        if moments.is_empty() {
            return Err(AnalysisError::Dimension(
                "at least one moment row is required".into(),
            ));
        }
        for row in moments {
            if row.mean.len() != self.n || row.second.len() != self.n {
                return Err(AnalysisError::Dimension(format!(
                    "moment rows must have one entry per node ({})",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// Diagonal coefficients of the bracket and the driving vector for one
    /// iteration's moments, in bvec index order.
    fn coefficients(&self, row: &StepMoments) -> (DVector<f64>, DVector<f64>) {
        let (n, m) = (self.n, self.m);
        let mm = m * m;
        let mut diag = DVector::zeros(n * n * mm);
        let mut chi = DVector::zeros(n * n * mm);
        for j in 0..n {
            for i in 0..n {
                let chunk = (j * n + i) * mm;
                for a in 0..m {
                    for c in 0..m {
                        let idx = chunk + a * m + c;
                        diag[idx] = 1.0
                            - row.mean[j] * self.lambda[j][a]
                            - row.mean[i] * self.lambda[i][c];
                    }
                }
                if i == j {
                    for a in 0..m {
                        chi[chunk + a * m + a] =
                            self.noise_variances[j] * row.second[j] * self.lambda[j][a];
                    }
                }
            }
        }
        (diag, chi)
    }

    fn step_products(&self, row: &StepMoments) -> DVector<f64> {
        let (n, m) = (self.n, self.m);
        let mm = m * m;
        let mut eyy = DVector::zeros(n * n * mm);
        for j in 0..n {
            for i in 0..n {
                let v = if i == j {
                    row.second[j]
                } else {
                    row.mean[i] * row.mean[j]
                };
                let chunk = (j * n + i) * mm;
                for t in 0..mm {
                    eyy[chunk + t] = v;
                }
            }
        }
        eyy
    }

    /// The forward transition matrix for one moment row:
    /// `T = (Bb (.) Bb) * bracket`.
    pub fn transition(&self, row: &StepMoments) -> DMatrix<f64> {
        let (diag, _) = self.coefficients(row);
        let eyy = self.step_products(row);
        let size = diag.len();
        let mut bracket = DMatrix::zeros(size, size);
        for r in 0..size {
            for c in 0..size {
                bracket[(r, c)] = eyy[r] * self.fourth[(r, c)];
            }
        }
        for r in 0..size {
            bracket[(r, r)] += diag[r];
        }
        &self.propagate * bracket
    }

    /// Run the recursion for `iterations` steps. Rows of `moments` map to
    /// iterations one-to-one; the last row is reused once exhausted.
    pub fn predict(
        &self,
        initial_error: &DVector<f64>,
        moments: &[StepMoments],
        iterations: usize,
    ) -> Result<TransientPrediction, AnalysisError> {
        self.check_moments(moments)?;
        let mn = self.n * self.m;
        if initial_error.len() != mn {
            return Err(AnalysisError::Dimension(format!(
                "initial error must have length {mn}"
            )));
        }

        let w_bar = self.q.transpose() * initial_error;
        let outer = &w_bar * w_bar.transpose();
        let mut k = bvec(&outer, self.m)?;
        let target = bvec(&DMatrix::identity(mn, mn), self.m)? / self.n as f64;

        let mut msd = Vec::with_capacity(iterations);
        for i in 0..iterations {
            let row = &moments[i.min(moments.len() - 1)];
            let (diag, chi) = self.coefficients(row);
            let eyy = self.step_products(row);
            let ak = &self.fourth * &k;
            let mut fed = DVector::zeros(k.len());
            for idx in 0..k.len() {
                fed[idx] = diag[idx] * k[idx] + eyy[idx] * ak[idx] + chi[idx];
            }
            k = &self.propagate * fed;
            msd.push(k.dot(&target));
        }

        let last = moments.last().unwrap();
        let transition = self.transition(last);
        let radius = spectral_radius(&transition);
        let stable = radius < 1.0;
        let steady_state = if stable {
            let size = transition.nrows();
            let (_, chi) = self.coefficients(last);
            let rhs = &self.propagate * chi;
            let system = DMatrix::identity(size, size) - transition;
            system.lu().solve(&rhs).map(|fixed| fixed.dot(&target))
        } else {
            None
        };

        Ok(TransientPrediction {
            msd_db: msd.iter().map(|&x| to_db(x)).collect(),
            msd,
            spectral_radius: radius,
            stable,
            steady_state,
        })
    }
}

/// Build the model and run the prediction in one call.
pub fn transient_msd_model(
    model: &GlobalModel,
    initial_error: &DVector<f64>,
    moments: &[StepMoments],
    iterations: usize,
) -> Result<TransientPrediction, AnalysisError> {
    TransientModel::new(model)?.predict(initial_error, moments, iterations)
}
