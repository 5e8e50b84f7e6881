//! Per-iteration adaptation and combination for diffusion estimation.
//!
//! Every iteration runs up to three phases over the network:
//!
//! 1. fusion of prior estimates with the `beta` matrix,
//! 2. a local gradient step on measurement data, weighted by `alpha` when
//!    neighbors share raw data,
//! 3. fusion of the adapted intermediates with the `delta` matrix.
//!
//! Adapt-then-combine (ATC) keeps only phases 2-3, combine-then-adapt (CTA)
//! phases 1-2, and the non-cooperative mode phase 2 alone. The adaptation
//! criterion is pluggable: correntropy (a Gaussian kernel of the error scales
//! the step, rejecting outliers), plain least squares, p-power, or a windowed
//! error-entropy gradient.

use std::collections::VecDeque;
use std::f64::consts::SQRT_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{build_combination_matrix, CombinationMatrix, CombinationRule, NetworkTopology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("step size must be > 0, got {0}")]
    StepSize(f64),
    #[error("kernel size must be > 0, got {0}")]
    KernelSize(f64),
    #[error("power exponent must lie in [1, 2], got {0}")]
    PowerExponent(f64),
    #[error("error window length must be >= 1")]
    WindowLength,
    #[error("per-node step sizes must have one entry per node ({expected}), got {got}")]
    StepSizeLength { expected: usize, got: usize },
    #[error("combination matrix dimension {got} does not match the network ({expected})")]
    MatrixDimension { expected: usize, got: usize },
    #[error("data-sharing weights require a per-datum criterion; the error-entropy window cannot be shared")]
    SharedDataWithWindow,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("non-finite input to incremental update")]
    NonFinite,
    #[error("non-finite update at node {node}")]
    NonFiniteAtNode { node: usize },
}

/// Adaptation criterion with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "lowercase")]
pub enum Criterion {
    /// Correntropy with Gaussian kernel size `sigma`.
    Mcc { sigma: f64 },
    /// Least mean squares.
    Lms,
    /// Least mean p-power, `1 <= p <= 2`.
    Lmp { p: f64 },
    /// Error entropy over a window of the last `window` errors, kernel size
    /// `sigma` (pairwise differences are smoothed at `sigma * sqrt(2)`).
    Mee { sigma: f64, window: usize },
}

impl Criterion {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            Criterion::Mcc { sigma } | Criterion::Mee { sigma, .. } if !(sigma > 0.0) => {
                Err(ConfigError::KernelSize(sigma))
            }
            Criterion::Mee { window, .. } if window == 0 => Err(ConfigError::WindowLength),
            Criterion::Lmp { p } if !(1.0..=2.0).contains(&p) => {
                Err(ConfigError::PowerExponent(p))
            }
            _ => Ok(()),
        }
    }

    fn uses_window(&self) -> bool {
        matches!(self, Criterion::Mee { .. })
    }
}

/// Phase ordering of adaptation and fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Atc,
    Cta,
    General,
    #[serde(rename = "noncoop")]
    NonCoop,
}

/// A fully resolved algorithm: criterion, step sizes, and the three
/// combination matrices. Construct through [`AlgorithmConfig::atc`],
/// [`AlgorithmConfig::cta`], [`AlgorithmConfig::noncoop`], or
/// [`AlgorithmConfig::general`]; the mode constructors pin the unused
/// matrices to the identity.
#[derive(Debug, Clone)]
pub struct AlgorithmConfig {
    criterion: Criterion,
    mode: Mode,
    eta: Vec<f64>,
    beta: CombinationMatrix,
    alpha: CombinationMatrix,
    delta: CombinationMatrix,
}

impl AlgorithmConfig {
    pub fn atc(
        topology: &NetworkTopology,
        criterion: Criterion,
        eta: f64,
        combiner: CombinationMatrix,
    ) -> Result<Self, ConfigError> {
        let identity = build_combination_matrix(topology, CombinationRule::Identity);
        Self::build(
            topology,
            criterion,
            Mode::Atc,
            eta,
            identity.clone(),
            identity,
            combiner,
        )
    }

    pub fn cta(
        topology: &NetworkTopology,
        criterion: Criterion,
        eta: f64,
        combiner: CombinationMatrix,
    ) -> Result<Self, ConfigError> {
        let identity = build_combination_matrix(topology, CombinationRule::Identity);
        Self::build(
            topology,
            criterion,
            Mode::Cta,
            eta,
            combiner,
            identity.clone(),
            identity,
        )
    }

    pub fn noncoop(
        topology: &NetworkTopology,
        criterion: Criterion,
        eta: f64,
    ) -> Result<Self, ConfigError> {
        let identity = build_combination_matrix(topology, CombinationRule::Identity);
        Self::build(
            topology,
            criterion,
            Mode::NonCoop,
            eta,
            identity.clone(),
            identity.clone(),
            identity,
        )
    }

    pub fn general(
        topology: &NetworkTopology,
        criterion: Criterion,
        eta: f64,
        beta: CombinationMatrix,
        alpha: CombinationMatrix,
        delta: CombinationMatrix,
    ) -> Result<Self, ConfigError> {
        Self::build(topology, criterion, Mode::General, eta, beta, alpha, delta)
    }

    fn build(
        topology: &NetworkTopology,
        criterion: Criterion,
        mode: Mode,
        eta: f64,
        beta: CombinationMatrix,
        alpha: CombinationMatrix,
        delta: CombinationMatrix,
    ) -> Result<Self, ConfigError> {
        criterion.validate()?;
        if !(eta > 0.0) {
            return Err(ConfigError::StepSize(eta));
        }
        let n = topology.n();
        for m in [&beta, &alpha, &delta] {
            if m.n() != n {
                return Err(ConfigError::MatrixDimension {
                    expected: n,
                    got: m.n(),
                });
            }
        }
        if criterion.uses_window() && !alpha.is_identity() {
            return Err(ConfigError::SharedDataWithWindow);
        }
        Ok(Self {
            criterion,
            mode,
            eta: vec![eta; n],
            beta,
            alpha,
            delta,
        })
    }

    /// Replace the shared step size with per-node values.
    pub fn with_eta_per_node(mut self, eta: Vec<f64>) -> Result<Self, ConfigError> {
        if eta.len() != self.n() {
            return Err(ConfigError::StepSizeLength {
                expected: self.n(),
                got: eta.len(),
            });
        }
        for &e in &eta {
            if !(e > 0.0) {
                return Err(ConfigError::StepSize(e));
            }
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn criterion(&self) -> &Criterion {
        &self.criterion
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn eta(&self, node: usize) -> f64 {
        self.eta[node]
    }

    pub fn delta_matrix(&self) -> &CombinationMatrix {
        &self.delta
    }

    pub fn beta_matrix(&self) -> &CombinationMatrix {
        &self.beta
    }

    pub fn alpha_matrix(&self) -> &CombinationMatrix {
        &self.alpha
    }

    /// The fusion matrix that couples estimates across nodes for this mode
    /// (`delta` for ATC, `beta` for CTA, identity for non-cooperative).
    pub fn estimate_coupling(&self) -> &CombinationMatrix {
        match self.mode {
            Mode::Atc | Mode::General => &self.delta,
            Mode::Cta => &self.beta,
            Mode::NonCoop => &self.delta,
        }
    }
}

/// Ring buffer of the most recent `(error, regressor)` pairs for the
/// error-entropy criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorWindow {
    capacity: usize,
    entries: VecDeque<(f64, DVector<f64>)>,
}

impl ErrorWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, error: f64, regressor: DVector<f64>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((error, regressor));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = &(f64, DVector<f64>)> {
        self.entries.iter()
    }
}

/// Per-node estimates and bookkeeping carried across iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    weights: Vec<DVector<f64>>,
    intermediates: Vec<DVector<f64>>,
    histories: Option<Vec<ErrorWindow>>,
    iteration: u64,
}

impl NetworkState {
    /// All-zero initial estimates for `n` nodes of dimension `m`.
    pub fn zeros(n: usize, m: usize, config: &AlgorithmConfig) -> Self {
        let histories = match config.criterion() {
            Criterion::Mee { window, .. } => Some(vec![ErrorWindow::new(*window); n]),
            _ => None,
        };
        Self {
            weights: vec![DVector::zeros(m); n],
            intermediates: vec![DVector::zeros(m); n],
            histories,
            iteration: 0,
        }
    }

    pub fn weights(&self) -> &[DVector<f64>] {
        &self.weights
    }

    pub fn weight(&self, node: usize) -> &DVector<f64> {
        &self.weights[node]
    }

    /// Post-adaptation intermediates from the most recent iteration.
    pub fn intermediates(&self) -> &[DVector<f64>] {
        &self.intermediates
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .fold(0.0_f64, |m, &x| m.max(x.abs()))
    }
}

/// Gaussian kernel of the error: `exp(-e^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`.
///
/// Strictly positive, maximized at `e = 0`. Panics when `sigma <= 0`.
pub fn gaussian_kernel(e: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "kernel size must be > 0, got {sigma}");
    (-e * e / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// The equivalent variable step of the correntropy update: `eta * G_sigma(e)`.
/// Decays to zero for large errors, which is the outlier-rejection mechanism.
pub fn effective_step(e: f64, eta: f64, sigma: f64) -> f64 {
    eta * gaussian_kernel(e, sigma)
}

/// Gradient term of a per-datum criterion at error `e` and regressor `u`.
fn criterion_gradient(criterion: &Criterion, e: f64, u: &DVector<f64>) -> DVector<f64> {
    match *criterion {
        Criterion::Mcc { sigma } => u * (gaussian_kernel(e, sigma) * e),
        Criterion::Lms => u * e,
        Criterion::Lmp { p } => {
            if e == 0.0 {
                DVector::zeros(u.len())
            } else {
                u * (e.abs().powf(p - 1.0) * e.signum())
            }
        }
        Criterion::Mee { .. } => unreachable!("windowed criterion has no per-datum gradient"),
    }
}

/// Gradient of the empirical quadratic information potential over the stored
/// window (pairwise Gaussian kernels of error differences at size
/// `sigma * sqrt(2)`).
fn information_potential_gradient(window: &ErrorWindow, sigma: f64, m: usize) -> DVector<f64> {
    let s = sigma * SQRT_2;
    let len = window.len() as f64;
    let mut grad = DVector::zeros(m);
    let entries: Vec<&(f64, DVector<f64>)> = window.iter().collect();
    for i in 0..entries.len() {
        for j in 0..i {
            let de = entries[i].0 - entries[j].0;
            let g = gaussian_kernel(de, s) * de;
            grad.axpy(g, &(&entries[i].1 - &entries[j].1), 1.0);
        }
    }
    // Ordered pairs (i, j) and (j, i) contribute equally.
    grad * (2.0 / (len * len))
}

/// One local gradient step from `w` on the datum `(u, d)`.
///
/// The error-entropy criterion pushes the fresh `(error, regressor)` pair
/// into `history` before evaluating its window gradient; the other criteria
/// ignore `history`.
pub fn incremental_update(
    w: &DVector<f64>,
    u: &DVector<f64>,
    d: f64,
    criterion: &Criterion,
    eta: f64,
    history: Option<&mut ErrorWindow>,
) -> Result<DVector<f64>, StepError> {
    if !d.is_finite()
        || w.iter().any(|x| !x.is_finite())
        || u.iter().any(|x| !x.is_finite())
    {
        return Err(StepError::NonFinite);
    }
    let e = d - w.dot(u);
    if !e.is_finite() {
        return Err(StepError::NonFinite);
    }
    match criterion {
        Criterion::Mee { sigma, .. } => {
            let window = history.expect("error-entropy update requires a window");
            window.push(e, u.clone());
            let grad = information_potential_gradient(window, *sigma, w.len());
            Ok(w + grad * eta)
        }
        _ => Ok(w + criterion_gradient(criterion, e, u) * eta),
    }
}

/// Fuse the neighborhood estimates into node `k`'s estimate: the convex
/// combination down column `k` of the weight matrix.
pub fn combine(
    estimates: &[DVector<f64>],
    weights: &CombinationMatrix,
    k: usize,
) -> DVector<f64> {
    let m = estimates[k].len();
    let mut out = DVector::zeros(m);
    for (l, est) in estimates.iter().enumerate() {
        let w = weights.entry(l, k);
        if w != 0.0 {
            out.axpy(w, est, 1.0);
        }
    }
    out
}

/// Result of advancing the network by one iteration.
#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub state: NetworkState,
    /// Per-node adaptation error on the node's own datum, measured at the
    /// estimate the adaptation starts from. Feeds step-size diagnostics and
    /// the semi-analytic transient model.
    pub adaptation_errors: Vec<f64>,
}

/// Advance all nodes by one iteration over the data snapshot `data`
/// (one `(regressor, measurement)` pair per node).
///
/// Pure function of `(state, data, config)`: identical inputs give identical
/// outputs.
pub fn run_iteration(
    state: &NetworkState,
    data: &[(DVector<f64>, f64)],
    config: &AlgorithmConfig,
) -> Result<IterationOutput, StepError> {
    let n = config.n();
    assert_eq!(data.len(), n, "one datum per node required");
    assert_eq!(state.weights.len(), n, "state/config node count mismatch");

    // Diffusion I.
    let phi: Vec<DVector<f64>> = if config.beta.is_identity() {
        state.weights.clone()
    } else {
        (0..n).map(|k| combine(&state.weights, &config.beta, k)).collect()
    };

    // Incremental step.
    let mut histories = state.histories.clone();
    let mut errors = vec![0.0; n];
    let mut psi = Vec::with_capacity(n);
    for k in 0..n {
        let (u, d) = &data[k];
        let eta = config.eta(k);
        let attach = |e| match e {
            StepError::NonFinite => StepError::NonFiniteAtNode { node: k },
            other => other,
        };
        let updated = if config.alpha.is_identity() {
            let history = histories.as_mut().map(|h| &mut h[k]);
            let next =
                incremental_update(&phi[k], u, *d, &config.criterion, eta, history)
                    .map_err(attach)?;
            errors[k] = d - phi[k].dot(u);
            next
        } else {
            // Shared raw data: every neighbor datum is evaluated at this
            // node's own intermediate estimate.
            let mut acc = phi[k].clone();
            for l in 0..n {
                let a = config.alpha.entry(l, k);
                if a == 0.0 {
                    continue;
                }
                let (ul, dl) = &data[l];
                if !dl.is_finite() || ul.iter().any(|x| !x.is_finite()) {
                    return Err(StepError::NonFiniteAtNode { node: k });
                }
                let el = dl - phi[k].dot(ul);
                if !el.is_finite() {
                    return Err(StepError::NonFiniteAtNode { node: k });
                }
                acc.axpy(eta * a, &criterion_gradient(&config.criterion, el, ul), 1.0);
            }
            errors[k] = d - phi[k].dot(u);
            acc
        };
        psi.push(updated);
    }

    // Diffusion II.
    let weights: Vec<DVector<f64>> = if config.delta.is_identity() {
        psi.clone()
    } else {
        (0..n).map(|k| combine(&psi, &config.delta, k)).collect()
    };

    Ok(IterationOutput {
        state: NetworkState {
            weights,
            intermediates: psi,
            histories,
            iteration: state.iteration + 1,
        },
        adaptation_errors: errors,
    })
}
