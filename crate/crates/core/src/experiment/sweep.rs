//! Parameter sweeps: a named grid of values is applied over the base
//! configuration, one Monte Carlo experiment per Cartesian-product point,
//! emitting a long-format table of steady-state deviations.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::config::{CriterionKind, ExperimentConfig};
use super::runner::run_monte_carlo;
use super::ExperimentError;
use crate::signal::NoiseModel;

/// Named parameter lists, in declaration order. Valid names: `sigma`, `c`,
/// `alpha`, `p`, `L`, `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SweepGrid(pub IndexMap<String, Vec<f64>>);

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `(name, value)` pairs in grid order.
    pub params: Vec<(String, f64)>,
    pub algorithm: String,
    pub msd_db: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

const VALID_KEYS: [&str; 6] = ["sigma", "c", "alpha", "p", "L", "eta"];

fn apply(config: &mut ExperimentConfig, key: &str, value: f64) -> Result<(), ExperimentError> {
    let mut touched = false;
    match key {
        "sigma" => {
            for a in &mut config.algorithms {
                if matches!(a.criterion, CriterionKind::Mcc | CriterionKind::Mee) {
                    a.sigma = Some(value);
                    touched = true;
                }
            }
            if !touched {
                return Err(ExperimentError::Config(
                    "sweep parameter 'sigma': no kernel-criterion algorithm in the list".into(),
                ));
            }
        }
        "eta" => {
            for a in &mut config.algorithms {
                if a.eta_per_node.is_some() {
                    return Err(ExperimentError::Config(format!(
                        "sweep parameter 'eta' conflicts with per-node steps on '{}'",
                        a.name
                    )));
                }
                a.eta = value;
            }
        }
        "p" => {
            for a in &mut config.algorithms {
                if matches!(a.criterion, CriterionKind::Lmp) {
                    a.p = Some(value);
                    touched = true;
                }
            }
            if !touched {
                return Err(ExperimentError::Config(
                    "sweep parameter 'p': no p-power algorithm in the list".into(),
                ));
            }
        }
        "L" => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(ExperimentError::Config(format!(
                    "sweep parameter 'L' must be a positive integer, got {value}"
                )));
            }
            for a in &mut config.algorithms {
                if matches!(a.criterion, CriterionKind::Mee) {
                    a.window = Some(value as usize);
                    touched = true;
                }
            }
            if !touched {
                return Err(ExperimentError::Config(
                    "sweep parameter 'L': no error-entropy algorithm in the list".into(),
                ));
            }
        }
        "c" => match &mut config.noise {
            NoiseModel::Impulsive {
                arrival_probability,
                ..
            } => *arrival_probability = value,
            NoiseModel::Gaussian { .. } => {
                return Err(ExperimentError::Config(
                    "sweep parameter 'c' requires impulsive noise".into(),
                ))
            }
        },
        "alpha" => match &mut config.noise {
            NoiseModel::Impulsive { stable, .. } => stable.alpha = value,
            NoiseModel::Gaussian { .. } => {
                return Err(ExperimentError::Config(
                    "sweep parameter 'alpha' requires impulsive noise".into(),
                ))
            }
        },
        other => return Err(ExperimentError::UnknownSweepParam(other.into())),
    }
    Ok(())
}

/// Run the Cartesian product of the grid over the base configuration.
pub fn parameter_sweep(
    base: &ExperimentConfig,
    grid: &SweepGrid,
) -> Result<SweepResult, ExperimentError> {
    for key in grid.0.keys() {
        if !VALID_KEYS.contains(&key.as_str()) {
            return Err(ExperimentError::UnknownSweepParam(key.clone()));
        }
    }
    for (key, values) in &grid.0 {
        if values.is_empty() {
            return Err(ExperimentError::Config(format!(
                "sweep parameter '{key}' has no values"
            )));
        }
    }

    let param_names: Vec<String> = grid.0.keys().cloned().collect();
    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (key, values) in &grid.0 {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut row = prefix.clone();
                    row.push((key.clone(), v));
                    row
                })
            })
            .collect();
    }

    let mut rows = Vec::new();
    for point in &points {
        let mut config = base.clone();
        config.sweep = None;
        for (key, value) in point {
            apply(&mut config, key, *value)?;
        }
        config.validate()?;
        let result = run_monte_carlo(&config.build()?)?;
        for algo in &result.algorithms {
            rows.push(SweepRow {
                params: point.clone(),
                algorithm: algo.name.clone(),
                msd_db: algo.steady_state_db,
            });
        }
    }

    Ok(SweepResult { param_names, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Mode;
    use crate::experiment::config::{
        AlgorithmSpec, ModelSpec, RunSpec, ScalarOrPerNode, TopologySpec,
    };
    use crate::network::CombinationRule;
    use crate::signal::AlphaStableParams;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            topology: TopologySpec {
                n: 4,
                region: 1.2,
                radius: 1.0,
                seed: 2,
            },
            model: ModelSpec {
                m: 3,
                weight_seed: 5,
                regressor_variance: ScalarOrPerNode::Scalar(1.0),
            },
            noise: NoiseModel::impulsive(0.2, AlphaStableParams::symmetric(1.2).unwrap()),
            combiner: CombinationRule::Metropolis,
            algorithms: vec![AlgorithmSpec {
                name: "ATC-DMCC".into(),
                criterion: CriterionKind::Mcc,
                mode: Mode::Atc,
                eta: 0.1,
                sigma: Some(1.0),
                p: None,
                window: None,
                eta_per_node: None,
                beta_rule: None,
                alpha_rule: None,
                delta_rule: None,
            }],
            run: RunSpec {
                iterations: 60,
                monte_carlo_runs: 2,
                seed: 7,
                steady_window: 20,
                pilot_runs: 4,
                regenerate_weights_per_run: false,
            },
            sweep: None,
        }
    }

    fn grid(pairs: &[(&str, &[f64])]) -> SweepGrid {
        SweepGrid(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
        )
    }

    #[test]
    fn empty_grid_is_a_single_run() {
        let result = parameter_sweep(&base(), &grid(&[])).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert!(result.rows[0].params.is_empty());
    }

    #[test]
    fn product_size_is_the_grid_product() {
        let g = grid(&[("sigma", &[1.0, 2.0]), ("alpha", &[1.2, 1.8])]);
        let result = parameter_sweep(&base(), &g).unwrap();
        assert_eq!(result.rows.len(), 4);
        assert_eq!(result.param_names, vec!["sigma", "alpha"]);
        // Declaration-order product: sigma-major.
        assert_eq!(result.rows[0].params[0].1, 1.0);
        assert_eq!(result.rows[0].params[1].1, 1.2);
        assert_eq!(result.rows[1].params[1].1, 1.8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parameter_sweep(&base(), &grid(&[("sigmma", &[1.0])])).unwrap_err();
        assert!(matches!(err, ExperimentError::UnknownSweepParam(_)));
    }

    #[test]
    fn inapplicable_keys_are_rejected() {
        // No p-power algorithm in the roster.
        assert!(parameter_sweep(&base(), &grid(&[("p", &[1.2])])).is_err());
        // Gaussian noise has no arrival probability.
        let mut cfg = base();
        cfg.noise = NoiseModel::gaussian(0.01);
        assert!(parameter_sweep(&cfg, &grid(&[("c", &[0.1])])).is_err());
    }

    #[test]
    fn window_values_must_be_integers() {
        let mut cfg = base();
        cfg.algorithms[0] = AlgorithmSpec {
            name: "ATC-DMEE".into(),
            criterion: CriterionKind::Mee,
            mode: Mode::Atc,
            eta: 0.1,
            sigma: Some(1.0),
            p: None,
            window: Some(4),
            eta_per_node: None,
            beta_rule: None,
            alpha_rule: None,
            delta_rule: None,
        };
        assert!(parameter_sweep(&cfg, &grid(&[("L", &[4.5])])).is_err());
        assert!(parameter_sweep(&cfg, &grid(&[("L", &[4.0])])).is_ok());
    }
}
