//! Measurement models, regressors, and impulsive noise.
//!
//! Each node observes `d_k(i) = w_o^T u_k(i) + n_k(i)` with white Gaussian
//! regressors and noise that is either Gaussian or a Bernoulli-gated
//! alpha-stable process (an occurrence gate of probability `c` multiplying a
//! heavy-tailed amplitude). Alpha-stable draws use the Chambers-Mallows-Stuck
//! transformation.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, purpose};

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("alpha must lie in (0, 2], got {0}")]
    Alpha(f64),
    #[error("beta must lie in [-1, 1], got {0}")]
    Beta(f64),
    #[error("dispersion must be > 0, got {0}")]
    Dispersion(f64),
    #[error("location must be finite, got {0}")]
    Location(f64),
    #[error("variance must be >= 0, got {0}")]
    Variance(f64),
    #[error("arrival probability must lie in [0, 1], got {0}")]
    ArrivalProbability(f64),
    #[error("regressor variance must be > 0, got {0}")]
    RegressorVariance(f64),
    #[error("parameter dimension must be >= 1")]
    Dimension,
}

/// Parameters of an alpha-stable distribution, specified through its
/// characteristic function: exponent `alpha`, symmetry `beta`, dispersion
/// `lambda`, location `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaStableParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "dispersion")]
    pub lambda: f64,
    #[serde(default)]
    pub delta: f64,
}

impl AlphaStableParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64, delta: f64) -> Result<Self, ParamError> {
        let p = Self {
            alpha,
            beta,
            lambda,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric standard-dispersion parameters `(alpha, 0, 1, 0)`.
    pub fn symmetric(alpha: f64) -> Result<Self, ParamError> {
        Self::new(alpha, 0.0, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(ParamError::Alpha(self.alpha));
        }
        if !(-1.0..=1.0).contains(&self.beta) {
            return Err(ParamError::Beta(self.beta));
        }
        if !(self.lambda > 0.0) {
            return Err(ParamError::Dispersion(self.lambda));
        }
        if !self.delta.is_finite() {
            return Err(ParamError::Location(self.delta));
        }
        Ok(())
    }
}

fn clamp_open_unit(x: f64) -> f64 {
    x.clamp(1e-15, 1.0 - 1e-15)
}

/// One Chambers-Mallows-Stuck draw with unit scale in the parameterization
/// whose characteristic function is
/// `exp(-|t|^a [1 - j*b*sgn(t)*tan(pi a/2)])` for `a != 1` and
/// `exp(-|t| [1 + j*b*(2/pi)*sgn(t)*ln|t|])` for `a = 1`.
fn cms_standard<R: Rng + ?Sized>(alpha: f64, skew: f64, rng: &mut R) -> f64 {
    let v = PI * (clamp_open_unit(rng.gen::<f64>()) - 0.5);
    let w = -clamp_open_unit(rng.gen::<f64>()).ln();
    if alpha == 1.0 {
        let b = FRAC_PI_2 + skew * v;
        (2.0 / PI) * (b * v.tan() - skew * ((FRAC_PI_2 * w * v.cos()) / b).ln())
    } else {
        let zeta = skew * (FRAC_PI_2 * alpha).tan();
        let b0 = zeta.atan() / alpha;
        let scale = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
        let phi = alpha * (v + b0);
        let ratio = ((v - phi).cos() / w).max(f64::MIN_POSITIVE);
        scale * phi.sin() / v.cos().powf(1.0 / alpha) * ratio.powf((1.0 - alpha) / alpha)
    }
}

/// Draw one alpha-stable value with the given parameters.
///
/// The sign conventions of the characteristic function above flip between
/// the `alpha != 1` and `alpha = 1` regimes, and scaling by the dispersion
/// shifts the location when `alpha = 1`; both corrections are applied here so
/// the returned draw matches `(alpha, beta, lambda, delta)` exactly.
pub fn sample_alpha_stable<R: Rng + ?Sized>(params: &AlphaStableParams, rng: &mut R) -> f64 {
    let AlphaStableParams {
        alpha,
        beta,
        lambda,
        delta,
    } = *params;
    if alpha == 1.0 {
        let x = cms_standard(1.0, beta, rng);
        lambda * x + (2.0 / PI) * beta * lambda * lambda.ln() + delta
    } else {
        let x = cms_standard(alpha, -beta, rng);
        lambda.powf(1.0 / alpha) * x + delta
    }
}

/// Per-node measurement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseModel {
    Gaussian {
        variance: f64,
    },
    Impulsive {
        arrival_probability: f64,
        stable: AlphaStableParams,
    },
}

impl NoiseModel {
    pub fn gaussian(variance: f64) -> Self {
        NoiseModel::Gaussian { variance }
    }

    pub fn impulsive(arrival_probability: f64, stable: AlphaStableParams) -> Self {
        NoiseModel::Impulsive {
            arrival_probability,
            stable,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        match self {
            NoiseModel::Gaussian { variance } => {
                if !(*variance >= 0.0) {
                    return Err(ParamError::Variance(*variance));
                }
            }
            NoiseModel::Impulsive {
                arrival_probability,
                stable,
            } => {
                if !(0.0..=1.0).contains(arrival_probability) {
                    return Err(ParamError::ArrivalProbability(*arrival_probability));
                }
                stable.validate()?;
            }
        }
        Ok(())
    }

    /// Noise variance in zero-mean finite-variance regimes, `None` for
    /// heavy-tailed configurations (any gated stable amplitude with
    /// exponent below two, or a nonzero location).
    pub fn variance(&self) -> Option<f64> {
        match self {
            NoiseModel::Gaussian { variance } => Some(*variance),
            NoiseModel::Impulsive {
                arrival_probability,
                stable,
            } => {
                if *arrival_probability == 0.0 {
                    Some(0.0)
                } else if stable.alpha == 2.0 && stable.delta == 0.0 {
                    // The exponent-two law is Gaussian with variance twice
                    // the dispersion.
                    Some(arrival_probability * 2.0 * stable.lambda)
                } else {
                    None
                }
            }
        }
    }

    /// Draw one noise value.
    ///
    /// The gate and amplitude consume separate streams, and the amplitude is
    /// drawn whether or not the gate fires, so the amplitude sequence is
    /// identical across arrival probabilities and gate sets are nested in
    /// `c`. Sweeps over `c` therefore compare against common impulses.
    pub fn sample<R: Rng + ?Sized, S: Rng + ?Sized>(&self, gate: &mut R, amplitude: &mut S) -> f64 {
        match self {
            NoiseModel::Gaussian { variance } => {
                let z: f64 = amplitude.sample(StandardNormal);
                z * variance.sqrt()
            }
            NoiseModel::Impulsive {
                arrival_probability,
                stable,
            } => {
                let fired = gate.gen::<f64>() < *arrival_probability;
                let amp = sample_alpha_stable(stable, amplitude);
                if fired {
                    amp
                } else {
                    0.0
                }
            }
        }
    }
}

/// The linear measurement model: dimension, true parameter vector, and
/// per-node regressor variances.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    true_weights: DVector<f64>,
    regressor_variances: Vec<f64>,
}

impl MeasurementModel {
    pub fn new(
        true_weights: DVector<f64>,
        regressor_variances: Vec<f64>,
    ) -> Result<Self, ParamError> {
        if true_weights.is_empty() {
            return Err(ParamError::Dimension);
        }
        if regressor_variances.is_empty() {
            return Err(ParamError::Dimension);
        }
        for &v in &regressor_variances {
            if !(v > 0.0) {
                return Err(ParamError::RegressorVariance(v));
            }
        }
        Ok(Self {
            true_weights,
            regressor_variances,
        })
    }

    /// Unit regressor variance at every one of `n` nodes.
    pub fn with_unit_regressors(true_weights: DVector<f64>, n: usize) -> Result<Self, ParamError> {
        Self::new(true_weights, vec![1.0; n])
    }

    pub fn m(&self) -> usize {
        self.true_weights.len()
    }

    pub fn n(&self) -> usize {
        self.regressor_variances.len()
    }

    pub fn true_weights(&self) -> &DVector<f64> {
        &self.true_weights
    }

    pub fn regressor_variance(&self, node: usize) -> f64 {
        self.regressor_variances[node]
    }

    pub fn regressor_variances(&self) -> &[f64] {
        &self.regressor_variances
    }
}

/// Draw the unknown parameter vector: standard normal entries scaled by
/// `1/sqrt(m)`, so its expected squared norm is one.
pub fn init_true_weights(m: usize, seed: u64) -> DVector<f64> {
    let mut rng = rng::stream(seed, &[purpose::TRUE_WEIGHTS]);
    let scale = 1.0 / (m as f64).sqrt();
    DVector::from_fn(m, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * scale
    })
}

/// Draw one `(regressor, measurement)` pair for node `node`.
pub fn generate_node_datum<R: Rng + ?Sized, S: Rng + ?Sized, T: Rng + ?Sized>(
    model: &MeasurementModel,
    noise: &NoiseModel,
    node: usize,
    regressor_rng: &mut R,
    gate_rng: &mut S,
    amplitude_rng: &mut T,
) -> (DVector<f64>, f64) {
    let sd = model.regressor_variance(node).sqrt();
    let u = DVector::from_fn(model.m(), |_, _| {
        let z: f64 = regressor_rng.sample(StandardNormal);
        z * sd
    });
    let n = noise.sample(gate_rng, amplitude_rng);
    let d = model.true_weights().dot(&u) + n;
    (u, d)
}

/// Seed-derived per-node data source: one independent stream per purpose, so
/// regressors and noise are independent across nodes and across runs.
#[derive(Debug, Clone)]
pub struct NodeDataStream {
    node: usize,
    regressor: ChaCha8Rng,
    gate: ChaCha8Rng,
    amplitude: ChaCha8Rng,
}

impl NodeDataStream {
    pub fn new(master_seed: u64, run: u64, node: usize) -> Self {
        let tag = node as u64;
        Self {
            node,
            regressor: rng::stream(master_seed, &[purpose::REGRESSOR, run, tag]),
            gate: rng::stream(master_seed, &[purpose::NOISE_GATE, run, tag]),
            amplitude: rng::stream(master_seed, &[purpose::NOISE_AMPLITUDE, run, tag]),
        }
    }

    pub fn next(&mut self, model: &MeasurementModel, noise: &NoiseModel) -> (DVector<f64>, f64) {
        generate_node_datum(
            model,
            noise,
            self.node,
            &mut self.regressor,
            &mut self.gate,
            &mut self.amplitude,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng_for(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn params_validate_ranges() {
        assert!(AlphaStableParams::new(1.2, 0.0, 1.0, 0.0).is_ok());
        assert!(AlphaStableParams::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(AlphaStableParams::new(2.1, 0.0, 1.0, 0.0).is_err());
        assert!(AlphaStableParams::new(1.2, 1.5, 1.0, 0.0).is_err());
        assert!(AlphaStableParams::new(1.2, 0.0, 0.0, 0.0).is_err());
        assert!(AlphaStableParams::new(1.2, 0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn true_weights_scale_is_identity_for_m_1() {
        let w = init_true_weights(1, 5);
        let mut raw = rng::stream(5, &[purpose::TRUE_WEIGHTS]);
        let z: f64 = raw.sample(StandardNormal);
        assert_eq!(w[0], z);
    }

    #[test]
    fn true_weights_deterministic_per_seed() {
        assert_eq!(init_true_weights(10, 9), init_true_weights(10, 9));
        assert_ne!(init_true_weights(10, 9), init_true_weights(10, 10));
    }

    #[test]
    fn true_weights_expected_squared_norm_is_one() {
        let m = 10;
        let mean: f64 = (0..10_000)
            .map(|s| init_true_weights(m, s as u64).norm_squared())
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn tiny_dispersion_concentrates_at_location() {
        let params = AlphaStableParams::new(2.0, 0.0, 1e-30, 5.0).unwrap();
        let mut rng = rng_for(1);
        for _ in 0..100 {
            let x = sample_alpha_stable(&params, &mut rng);
            assert!((x - 5.0).abs() < 1e-10, "x {x}");
        }
    }

    #[test]
    fn alpha_two_matches_gaussian_moments() {
        // At alpha = 2 the law is Gaussian with variance 2*lambda.
        let params = AlphaStableParams::symmetric(2.0).unwrap();
        let mut rng = rng_for(2);
        let n = 200_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_alpha_stable(&params, &mut rng);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 2.0).abs() < 0.05, "var {var}");
    }

    /// Empirical characteristic function against the analytic one, skewed
    /// branch with `alpha != 1`, pinning the symmetry-sign convention.
    #[test]
    fn characteristic_function_matches_for_skewed_nonunit_alpha() {
        let params = AlphaStableParams::new(1.5, 0.5, 2.0, 1.0).unwrap();
        let mut rng = rng_for(3);
        let n = 400_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_alpha_stable(&params, &mut rng))
            .collect();
        for &t in &[0.7_f64, -0.7, 0.3] {
            let (mut re, mut im) = (0.0, 0.0);
            for &x in &draws {
                re += (t * x).cos();
                im += (t * x).sin();
            }
            re /= n as f64;
            im /= n as f64;
            let s = (FRAC_PI_2 * params.alpha).tan();
            let mag = (-params.lambda * t.abs().powf(params.alpha)).exp();
            let phase = params.delta * t
                - params.lambda * t.abs().powf(params.alpha) * params.beta * t.signum() * s;
            let (ere, eim) = (mag * phase.cos(), mag * phase.sin());
            let err = ((re - ere).powi(2) + (im - eim).powi(2)).sqrt();
            assert!(err < 0.01, "t={t}: ecf=({re},{im}) expected=({ere},{eim})");
        }
    }

    /// Same check on the logarithmic `alpha = 1` branch with skew and a
    /// non-unit dispersion, which exercises the scale-induced shift.
    #[test]
    fn characteristic_function_matches_for_alpha_one_skewed() {
        let params = AlphaStableParams::new(1.0, 0.7, 1.5, -2.0).unwrap();
        let mut rng = rng_for(4);
        let n = 400_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_alpha_stable(&params, &mut rng))
            .collect();
        for &t in &[0.5_f64, 2.0, -1.3] {
            let (mut re, mut im) = (0.0, 0.0);
            for &x in &draws {
                re += (t * x).cos();
                im += (t * x).sin();
            }
            re /= n as f64;
            im /= n as f64;
            let s = (2.0 / PI) * t.abs().ln();
            let mag = (-params.lambda * t.abs()).exp();
            let phase = params.delta * t - params.lambda * t.abs() * params.beta * t.signum() * s;
            let (ere, eim) = (mag * phase.cos(), mag * phase.sin());
            let err = ((re - ere).powi(2) + (im - eim).powi(2)).sqrt();
            assert!(err < 0.01, "t={t}: ecf=({re},{im}) expected=({ere},{eim})");
        }
    }

    #[test]
    fn gate_never_fires_at_zero_probability() {
        let params = AlphaStableParams::symmetric(1.2).unwrap();
        let model = NoiseModel::impulsive(0.0, params);
        let (mut g, mut a) = (rng_for(5), rng_for(6));
        for _ in 0..1000 {
            assert_eq!(model.sample(&mut g, &mut a), 0.0);
        }
    }

    #[test]
    fn gate_always_fires_at_unit_probability() {
        let params = AlphaStableParams::symmetric(1.2).unwrap();
        let model = NoiseModel::impulsive(1.0, params);
        let (mut g, mut a) = (rng_for(5), rng_for(6));
        let mut a2 = rng_for(6);
        for _ in 0..1000 {
            let got = model.sample(&mut g, &mut a);
            let want = sample_alpha_stable(&params, &mut a2);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn gate_rate_matches_arrival_probability() {
        let params = AlphaStableParams::symmetric(1.2).unwrap();
        let model = NoiseModel::impulsive(0.2, params);
        let (mut g, mut a) = (rng_for(7), rng_for(8));
        let n = 100_000;
        let nonzero = (0..n)
            .filter(|_| model.sample(&mut g, &mut a) != 0.0)
            .count();
        let frac = nonzero as f64 / n as f64;
        assert!((frac - 0.2).abs() < 0.01, "frac {frac}");
    }

    #[test]
    fn noiseless_measurement_is_exact_projection() {
        let w = DVector::from_vec(vec![0.3, -1.1, 0.7]);
        let model = MeasurementModel::with_unit_regressors(w.clone(), 2).unwrap();
        let noise = NoiseModel::gaussian(0.0);
        let mut stream = NodeDataStream::new(11, 0, 1);
        let (u, d) = stream.next(&model, &noise);
        assert_eq!(d, w.dot(&u));
    }

    #[test]
    fn zero_signal_measurement_equals_noise() {
        let w = DVector::zeros(4);
        let model = MeasurementModel::with_unit_regressors(w, 3).unwrap();
        let params = AlphaStableParams::symmetric(1.2).unwrap();
        let noise = NoiseModel::impulsive(1.0, params);
        let mut stream = NodeDataStream::new(13, 2, 0);
        let (_, d) = stream.next(&model, &noise);
        // Replay the identical amplitude stream to recover the noise draw.
        let mut amp = rng::stream(13, &[purpose::NOISE_AMPLITUDE, 2, 0]);
        let want = sample_alpha_stable(&params, &mut amp);
        assert_eq!(d, want);
    }

    #[test]
    fn regressor_covariance_is_diagonal_with_configured_variance() {
        let m = 4;
        let w = DVector::zeros(m);
        let model = MeasurementModel::with_unit_regressors(w, 1).unwrap();
        let noise = NoiseModel::gaussian(0.0);
        let mut stream = NodeDataStream::new(17, 0, 0);
        let n = 100_000;
        let mut cov = nalgebra::DMatrix::<f64>::zeros(m, m);
        for _ in 0..n {
            let (u, _) = stream.next(&model, &noise);
            cov += &u * u.transpose();
        }
        cov /= n as f64;
        let err = (&cov - nalgebra::DMatrix::<f64>::identity(m, m)).norm();
        assert!(err < 0.02, "Frobenius deviation {err}");
    }

    #[test]
    fn data_stream_is_pure_function_of_seed() {
        let w = init_true_weights(6, 1);
        let model = MeasurementModel::with_unit_regressors(w, 4).unwrap();
        let params = AlphaStableParams::symmetric(1.2).unwrap();
        let noise = NoiseModel::impulsive(0.2, params);
        let mut a = NodeDataStream::new(23, 1, 3);
        let mut b = NodeDataStream::new(23, 1, 3);
        for _ in 0..50 {
            let (ua, da) = a.next(&model, &noise);
            let (ub, db) = b.next(&model, &noise);
            assert_eq!(ua, ub);
            assert_eq!(da, db);
        }
    }

    #[test]
    fn regressors_are_uncorrelated_across_nodes_and_lags() {
        let w = DVector::zeros(1);
        let model = MeasurementModel::with_unit_regressors(w, 2).unwrap();
        let noise = NoiseModel::gaussian(0.0);
        let mut s0 = NodeDataStream::new(29, 0, 0);
        let mut s1 = NodeDataStream::new(29, 0, 1);
        let n = 10_000;
        let x0: Vec<f64> = (0..n).map(|_| s0.next(&model, &noise).0[0]).collect();
        let x1: Vec<f64> = (0..n).map(|_| s1.next(&model, &noise).0[0]).collect();
        let band = 3.0 / (n as f64).sqrt();
        // Across nodes at lag zero.
        let cross: f64 = x0.iter().zip(&x1).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!(cross.abs() < band, "cross-correlation {cross}");
        // Across time within one node, lags 1..4.
        for lag in 1..4 {
            let auto: f64 = x0[..n - lag]
                .iter()
                .zip(&x0[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (n - lag) as f64;
            assert!(auto.abs() < band, "lag {lag} autocorrelation {auto}");
        }
    }

    /// Heavy-tail witness: for alpha < 2 the gated-noise sample variance
    /// keeps growing with the sample count in most seeds. Statistical smoke
    /// test over a handful of seeds, not a hard distributional assert.
    #[test]
    fn gated_stable_variance_grows_with_sample_count() {
        let params = AlphaStableParams::symmetric(1.2).unwrap();
        let model = NoiseModel::impulsive(0.2, params);
        let mut growing = 0;
        let seeds = 5;
        for seed in 0..seeds {
            let (mut g, mut a) = (rng_for(100 + seed), rng_for(200 + seed));
            let mut sumsq = 0.0;
            let mut var_small = 0.0;
            for i in 0..1_000_000u32 {
                let x = model.sample(&mut g, &mut a);
                sumsq += x * x;
                if i + 1 == 10_000 {
                    var_small = sumsq / 10_000.0;
                }
            }
            let var_large = sumsq / 1_000_000.0;
            if var_large > var_small {
                growing += 1;
            }
        }
        assert!(growing * 2 > seeds, "variance grew in {growing}/{seeds} seeds");
    }
}
