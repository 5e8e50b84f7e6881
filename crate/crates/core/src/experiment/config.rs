//! Experiment configuration: a JSON document mirroring the harness inputs
//! field for field. Unknown keys are rejected everywhere so config typos
//! fail loudly instead of silently running defaults.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::diffusion::{AlgorithmConfig, Criterion, Mode};
use crate::network::{
    build_combination_matrix, CombinationRule, NetworkTopology,
};
use crate::signal::{init_true_weights, MeasurementModel, NoiseModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub n: usize,
    pub region: f64,
    pub radius: f64,
    pub seed: u64,
}

/// One value for every node, or explicit per-node values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrPerNode {
    Scalar(f64),
    PerNode(Vec<f64>),
}

impl ScalarOrPerNode {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>, ExperimentError> {
        match self {
            ScalarOrPerNode::Scalar(v) => Ok(vec![*v; n]),
            ScalarOrPerNode::PerNode(vs) => {
                if vs.len() != n {
                    return Err(ExperimentError::Config(format!(
                        "expected {n} per-node values, got {}",
                        vs.len()
                    )));
                }
                Ok(vs.clone())
            }
        }
    }
}

fn default_regressor_variance() -> ScalarOrPerNode {
    ScalarOrPerNode::Scalar(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Parameter dimension.
    pub m: usize,
    /// Seed for the unknown parameter draw.
    pub weight_seed: u64,
    #[serde(default = "default_regressor_variance")]
    pub regressor_variance: ScalarOrPerNode,
}

/// Noise section; this is [`NoiseModel`] verbatim.
pub type NoiseSpec = NoiseModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Mcc,
    Lms,
    Lmp,
    Mee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Display name; doubles as the CSV column label.
    pub name: String,
    pub criterion: CriterionKind,
    pub mode: Mode,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_per_node: Option<Vec<f64>>,
    /// Estimate-fusion rule overrides for the general mode (phase defaults:
    /// `beta` and `delta` take the experiment combiner, `alpha` the
    /// identity).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_rule: Option<CombinationRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_rule: Option<CombinationRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rule: Option<CombinationRule>,
}

impl AlgorithmSpec {
    fn reject(&self, field: &str) -> ExperimentError {
        ExperimentError::Config(format!(
            "algorithm '{}': field '{field}' does not apply to criterion {:?}",
            self.name, self.criterion
        ))
    }

    fn require<T: Copy>(&self, value: Option<T>, field: &str) -> Result<T, ExperimentError> {
        value.ok_or_else(|| {
            ExperimentError::Config(format!(
                "algorithm '{}': criterion {:?} requires field '{field}'",
                self.name, self.criterion
            ))
        })
    }

    pub fn build_criterion(&self) -> Result<Criterion, ExperimentError> {
        match self.criterion {
            CriterionKind::Mcc => {
                if self.p.is_some() {
                    return Err(self.reject("p"));
                }
                if self.window.is_some() {
                    return Err(self.reject("window"));
                }
                Ok(Criterion::Mcc {
                    sigma: self.require(self.sigma, "sigma")?,
                })
            }
            CriterionKind::Lms => {
                if self.sigma.is_some() {
                    return Err(self.reject("sigma"));
                }
                if self.p.is_some() {
                    return Err(self.reject("p"));
                }
                if self.window.is_some() {
                    return Err(self.reject("window"));
                }
                Ok(Criterion::Lms)
            }
            CriterionKind::Lmp => {
                if self.sigma.is_some() {
                    return Err(self.reject("sigma"));
                }
                if self.window.is_some() {
                    return Err(self.reject("window"));
                }
                Ok(Criterion::Lmp {
                    p: self.require(self.p, "p")?,
                })
            }
            CriterionKind::Mee => {
                if self.p.is_some() {
                    return Err(self.reject("p"));
                }
                Ok(Criterion::Mee {
                    sigma: self.require(self.sigma, "sigma")?,
                    window: self.require(self.window, "window")?,
                })
            }
        }
    }

    fn build(
        &self,
        topology: &NetworkTopology,
        combiner: CombinationRule,
    ) -> Result<AlgorithmConfig, ExperimentError> {
        let criterion = self.build_criterion()?;
        let combine = |rule: CombinationRule| build_combination_matrix(topology, rule);
        let forbid = |opt: Option<CombinationRule>, field: &str| {
            if opt.is_some() {
                Err(ExperimentError::Config(format!(
                    "algorithm '{}': '{field}' only applies to the general mode",
                    self.name
                )))
            } else {
                Ok(())
            }
        };
        let cfg = match self.mode {
            Mode::Atc => {
                forbid(self.beta_rule, "beta_rule")?;
                forbid(self.alpha_rule, "alpha_rule")?;
                let fuse = combine(self.delta_rule.unwrap_or(combiner));
                AlgorithmConfig::atc(topology, criterion, self.eta, fuse)?
            }
            Mode::Cta => {
                forbid(self.alpha_rule, "alpha_rule")?;
                forbid(self.delta_rule, "delta_rule")?;
                let fuse = combine(self.beta_rule.unwrap_or(combiner));
                AlgorithmConfig::cta(topology, criterion, self.eta, fuse)?
            }
            Mode::NonCoop => {
                forbid(self.beta_rule, "beta_rule")?;
                forbid(self.alpha_rule, "alpha_rule")?;
                forbid(self.delta_rule, "delta_rule")?;
                AlgorithmConfig::noncoop(topology, criterion, self.eta)?
            }
            Mode::General => AlgorithmConfig::general(
                topology,
                criterion,
                self.eta,
                combine(self.beta_rule.unwrap_or(combiner)),
                combine(self.alpha_rule.unwrap_or(CombinationRule::Identity)),
                combine(self.delta_rule.unwrap_or(combiner)),
            )?,
        };
        match &self.eta_per_node {
            Some(eta) => Ok(cfg.with_eta_per_node(eta.clone())?),
            None => Ok(cfg),
        }
    }
}

fn default_steady_window() -> usize {
    100
}

fn default_pilot_runs() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub iterations: usize,
    pub monte_carlo_runs: usize,
    /// Master seed; every stream in the experiment derives from it.
    pub seed: u64,
    #[serde(default = "default_steady_window")]
    pub steady_window: usize,
    /// Monte Carlo runs used to estimate effective-step moments for the
    /// transient prediction.
    #[serde(default = "default_pilot_runs")]
    pub pilot_runs: usize,
    /// Redraw the unknown parameter vector per run instead of sharing one
    /// realization across the ensemble.
    #[serde(default)]
    pub regenerate_weights_per_run: bool,
}

fn default_combiner() -> CombinationRule {
    CombinationRule::Metropolis
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub model: ModelSpec,
    pub noise: NoiseSpec,
    #[serde(default = "default_combiner")]
    pub combiner: CombinationRule,
    pub algorithms: Vec<AlgorithmSpec>,
    pub run: RunSpec,
    /// Optional parameter grid for the sweep subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<super::sweep::SweepGrid>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.topology.n == 0 {
            return Err(ExperimentError::Config("topology.n must be >= 1".into()));
        }
        if self.model.m == 0 {
            return Err(ExperimentError::Config("model.m must be >= 1".into()));
        }
        self.noise.validate()?;
        if self.run.steady_window == 0 {
            return Err(ExperimentError::Config(
                "run.steady_window must be >= 1".into(),
            ));
        }
        if self.run.iterations < self.run.steady_window {
            return Err(ExperimentError::Config(format!(
                "run.iterations ({}) must be >= run.steady_window ({})",
                self.run.iterations, self.run.steady_window
            )));
        }
        if self.run.monte_carlo_runs == 0 {
            return Err(ExperimentError::Config(
                "run.monte_carlo_runs must be >= 1".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(ExperimentError::Config(
                "at least one algorithm is required".into(),
            ));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if a.name.is_empty() || a.name.contains(',') {
                return Err(ExperimentError::Config(format!(
                    "algorithm {i}: name must be non-empty and comma-free"
                )));
            }
            a.build_criterion()?;
            if self
                .algorithms
                .iter()
                .skip(i + 1)
                .any(|b| b.name == a.name)
            {
                return Err(ExperimentError::Config(format!(
                    "duplicate algorithm name '{}'",
                    a.name
                )));
            }
        }
        self.model
            .regressor_variance
            .resolve(self.topology.n)?
            .iter()
            .try_for_each(|&v| {
                if v > 0.0 {
                    Ok(())
                } else {
                    Err(ExperimentError::Config(format!(
                        "regressor variance must be > 0, got {v}"
                    )))
                }
            })?;
        Ok(())
    }

    /// Resolve the configuration into concrete simulation objects.
    pub fn build(&self) -> Result<Experiment, ExperimentError> {
        self.validate()?;
        let topology = crate::network::generate_topology(
            self.topology.n,
            self.topology.region,
            self.topology.radius,
            self.topology.seed,
        )?;
        let variances = self.model.regressor_variance.resolve(self.topology.n)?;
        let weights = init_true_weights(self.model.m, self.model.weight_seed);
        let model = MeasurementModel::new(weights, variances)?;
        let algorithms = self
            .algorithms
            .iter()
            .map(|spec| Ok((spec.name.clone(), spec.build(&topology, self.combiner)?)))
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        Ok(Experiment {
            config: self.clone(),
            topology,
            model,
            algorithms,
        })
    }
}

/// A validated, fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub topology: NetworkTopology,
    pub model: MeasurementModel,
    pub algorithms: Vec<(String, AlgorithmConfig)>,
}

impl Default for ExperimentConfig {
    /// Desk-scale defaults: a 20-node geometric network, 10-dimensional
    /// parameter, gated alpha-stable noise at arrival probability 0.2, and
    /// the standard algorithm roster with Metropolis fusion.
    fn default() -> Self {
        let stable = crate::signal::AlphaStableParams {
            alpha: 1.2,
            beta: 0.0,
            lambda: 1.0,
            delta: 0.0,
        };
        let algo = |name: &str, criterion: CriterionKind, mode: Mode, eta: f64| AlgorithmSpec {
            name: name.into(),
            criterion,
            mode,
            eta,
            sigma: None,
            p: None,
            window: None,
            eta_per_node: None,
            beta_rule: None,
            alpha_rule: None,
            delta_rule: None,
        };
        let with_sigma = |mut a: AlgorithmSpec, sigma: f64| {
            a.sigma = Some(sigma);
            a
        };
        let with_p = |mut a: AlgorithmSpec, p: f64| {
            a.p = Some(p);
            a
        };
        let with_window = |mut a: AlgorithmSpec, w: usize| {
            a.window = Some(w);
            a
        };
        ExperimentConfig {
            topology: TopologySpec {
                n: 20,
                region: 1.2,
                radius: 0.45,
                seed: 1,
            },
            model: ModelSpec {
                m: 10,
                weight_seed: 7,
                regressor_variance: ScalarOrPerNode::Scalar(1.0),
            },
            noise: NoiseModel::impulsive(0.2, stable),
            combiner: CombinationRule::Metropolis,
            algorithms: vec![
                with_sigma(algo("ATC-DMCC", CriterionKind::Mcc, Mode::Atc, 0.06), 1.0),
                with_sigma(algo("CTA-DMCC", CriterionKind::Mcc, Mode::Cta, 0.06), 1.0),
                with_p(algo("ATC-DLMP", CriterionKind::Lmp, Mode::Atc, 0.03), 1.2),
                with_p(algo("CTA-DLMP", CriterionKind::Lmp, Mode::Cta, 0.03), 1.2),
                algo("ATC-DLMS", CriterionKind::Lms, Mode::Atc, 0.03),
                algo("CTA-DLMS", CriterionKind::Lms, Mode::Cta, 0.03),
                algo("LMS", CriterionKind::Lms, Mode::NonCoop, 0.03),
                with_window(
                    with_sigma(algo("ATC-DMEE", CriterionKind::Mee, Mode::Atc, 0.06), 1.0),
                    8,
                ),
            ],
            run: RunSpec {
                iterations: 500,
                monte_carlo_runs: 50,
                seed: 42,
                steady_window: 100,
                pilot_runs: 100,
                regenerate_weights_per_run: false,
            },
            sweep: None,
        }
    }
}
