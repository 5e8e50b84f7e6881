//! The Monte Carlo runner.
//!
//! Runs are independent work items (parallelized with rayon) whose streams
//! derive from `(master seed, run index, node, purpose)`; ensemble
//! aggregation is a sequential reduction in ascending run order, so results
//! are bit-identical regardless of thread scheduling. Every algorithm in the
//! roster consumes the same per-run data stream, which makes comparisons
//! paired: removing an algorithm never changes another's result.

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::Experiment;
use super::metrics::{steady_state_msd, to_db};
use super::ExperimentError;
use crate::analysis::StepMoments;
use crate::diffusion::{run_iteration, Criterion, NetworkState};
use crate::rng::derive_seed;
use crate::signal::{init_true_weights, MeasurementModel, NodeDataStream};

/// Any weight magnitude beyond this marks the run diverged for that
/// algorithm.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Linear deviation recorded from the divergence iteration onward
/// (+100 dB), so unstable baselines still plot meaningfully.
pub const DIVERGENCE_SENTINEL_LINEAR: f64 = 1e10;

/// Tag offset separating pilot-run streams from the main ensemble.
const PILOT_RUN_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivergedRun {
    pub run: usize,
    pub iteration: usize,
}

/// Ensemble results for one algorithm.
#[derive(Debug, Clone)]
pub struct AlgorithmResult {
    pub name: String,
    /// Ensemble-averaged network deviation per iteration, linear scale.
    pub network_msd_linear: Vec<f64>,
    /// The same trajectory in dB.
    pub network_msd_db: Vec<f64>,
    /// Per-node steady-state deviation in dB.
    pub per_node_msd_db: Vec<f64>,
    /// Network steady-state deviation in dB.
    pub steady_state_db: f64,
    pub diverged_runs: Vec<DivergedRun>,
}

/// Output of one Monte Carlo experiment.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithms: Vec<AlgorithmResult>,
    pub run_seeds: Vec<u64>,
    pub iterations: usize,
    pub nodes: usize,
    pub wall_time_ms: u128,
}

impl RunResult {
    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmResult> {
        self.algorithms.iter().find(|a| a.name == name)
    }

    /// True when every algorithm diverged in every run.
    pub fn fully_diverged(&self) -> bool {
        let runs = self.run_seeds.len();
        !self.algorithms.is_empty()
            && self
                .algorithms
                .iter()
                .all(|a| a.diverged_runs.len() == runs)
    }
}

struct SingleRun {
    /// Per algorithm: node-squared deviations, flattened `[iteration * n + node]`.
    node_sq_dev: Vec<Vec<f64>>,
    diverged: Vec<Option<usize>>,
}

fn model_for_run(experiment: &Experiment, run: usize) -> MeasurementModel {
    if experiment.config.run.regenerate_weights_per_run {
        let seed = derive_seed(experiment.config.model.weight_seed, &[run as u64 + 1]);
        let weights = init_true_weights(experiment.model.m(), seed);
        MeasurementModel::new(weights, experiment.model.regressor_variances().to_vec())
            .expect("variances already validated")
    } else {
        experiment.model.clone()
    }
}

fn simulate_run(experiment: &Experiment, run: usize) -> SingleRun {
    let n = experiment.topology.n();
    let m = experiment.model.m();
    let iterations = experiment.config.run.iterations;
    let master = experiment.config.run.seed;
    let model = model_for_run(experiment, run);
    let noise = &experiment.config.noise;
    let w_o = model.true_weights();

    let mut streams: Vec<NodeDataStream> = (0..n)
        .map(|k| NodeDataStream::new(master, run as u64, k))
        .collect();

    let algos = &experiment.algorithms;
    let mut states: Vec<NetworkState> = algos
        .iter()
        .map(|(_, cfg)| NetworkState::zeros(n, m, cfg))
        .collect();
    let mut diverged: Vec<Option<usize>> = vec![None; algos.len()];
    let mut node_sq_dev: Vec<Vec<f64>> = vec![vec![0.0; iterations * n]; algos.len()];

    for i in 0..iterations {
        let data: Vec<(DVector<f64>, f64)> =
            streams.iter_mut().map(|s| s.next(&model, noise)).collect();
        for (a, (_, cfg)) in algos.iter().enumerate() {
            if diverged[a].is_none() {
                match run_iteration(&states[a], &data, cfg) {
                    Ok(out) => {
                        if out.state.all_finite()
                            && out.state.max_abs_weight() <= DIVERGENCE_THRESHOLD
                        {
                            states[a] = out.state;
                        } else {
                            diverged[a] = Some(i + 1);
                        }
                    }
                    Err(_) => diverged[a] = Some(i + 1),
                }
            }
            let row = &mut node_sq_dev[a][i * n..(i + 1) * n];
            if diverged[a].is_some() {
                row.fill(DIVERGENCE_SENTINEL_LINEAR);
            } else {
                for (k, slot) in row.iter_mut().enumerate() {
                    *slot = (w_o - states[a].weight(k)).norm_squared();
                }
            }
        }
    }

    SingleRun {
        node_sq_dev,
        diverged,
    }
}

/// Run the full Monte Carlo ensemble for a resolved experiment.
pub fn run_monte_carlo(experiment: &Experiment) -> Result<RunResult, ExperimentError> {
    let started = std::time::Instant::now();
    let n = experiment.topology.n();
    let iterations = experiment.config.run.iterations;
    let runs = experiment.config.run.monte_carlo_runs;
    let window = experiment.config.run.steady_window;
    let master = experiment.config.run.seed;

    let per_run: Vec<SingleRun> = (0..runs)
        .into_par_iter()
        .map(|r| simulate_run(experiment, r))
        .collect();

    let run_seeds: Vec<u64> = (0..runs)
        .map(|r| derive_seed(master, &[r as u64]))
        .collect();

    let mut algorithms = Vec::with_capacity(experiment.algorithms.len());
    for (a, (name, _)) in experiment.algorithms.iter().enumerate() {
        // Linear-domain ensemble average, fixed run order.
        let mut ensemble = vec![0.0_f64; iterations * n];
        let mut diverged_runs = Vec::new();
        for (r, single) in per_run.iter().enumerate() {
            for (acc, v) in ensemble.iter_mut().zip(&single.node_sq_dev[a]) {
                *acc += v;
            }
            if let Some(iteration) = single.diverged[a] {
                diverged_runs.push(DivergedRun { run: r, iteration });
            }
        }
        for v in ensemble.iter_mut() {
            *v /= runs as f64;
        }

        let network_msd_linear: Vec<f64> = (0..iterations)
            .map(|i| ensemble[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
            .collect();
        let network_msd_db: Vec<f64> = network_msd_linear.iter().map(|&x| to_db(x)).collect();
        let per_node_msd_db: Vec<f64> = (0..n)
            .map(|k| {
                let node_traj: Vec<f64> =
                    (0..iterations).map(|i| ensemble[i * n + k]).collect();
                steady_state_msd(&node_traj, window)
            })
            .collect::<Result<_, _>>()?;
        let steady_state_db = steady_state_msd(&network_msd_linear, window)?;

        algorithms.push(AlgorithmResult {
            name: name.clone(),
            network_msd_linear,
            network_msd_db,
            per_node_msd_db,
            steady_state_db,
            diverged_runs,
        });
    }

    Ok(RunResult {
        algorithms,
        run_seeds,
        iterations,
        nodes: n,
        wall_time_ms: started.elapsed().as_millis(),
    })
}

/// Estimate per-iteration effective-step moments `E[rho_k(i)]` and
/// `E[rho_k(i)^2]` for a kernel-criterion algorithm from a pilot Monte Carlo
/// ensemble. Pilot streams live in a tag space disjoint from the main runs,
/// so the estimates are independent of any comparison ensemble.
pub fn estimate_step_moments(
    experiment: &Experiment,
    algorithm: &str,
    pilot_runs: usize,
) -> Result<Vec<StepMoments>, ExperimentError> {
    let (_, cfg) = experiment
        .algorithms
        .iter()
        .find(|(name, _)| name == algorithm)
        .ok_or_else(|| {
            ExperimentError::Config(format!("no algorithm named '{algorithm}' in the config"))
        })?;
    let sigma = match cfg.criterion() {
        Criterion::Mcc { sigma } => *sigma,
        other => {
            return Err(ExperimentError::Config(format!(
                "step moments require the kernel criterion, got {other:?}"
            )))
        }
    };
    if pilot_runs == 0 {
        return Err(ExperimentError::Config("pilot_runs must be >= 1".into()));
    }

    let n = experiment.topology.n();
    let m = experiment.model.m();
    let iterations = experiment.config.run.iterations;
    let master = experiment.config.run.seed;
    let noise = &experiment.config.noise;

    let accumulate = |run: usize| -> (Vec<f64>, Vec<f64>) {
        let model = experiment.model.clone();
        let mut streams: Vec<NodeDataStream> = (0..n)
            .map(|k| NodeDataStream::new(master, PILOT_RUN_BASE + run as u64, k))
            .collect();
        let mut state = NetworkState::zeros(n, m, cfg);
        let mut mean = vec![0.0; iterations * n];
        let mut second = vec![0.0; iterations * n];
        for i in 0..iterations {
            let data: Vec<(DVector<f64>, f64)> =
                streams.iter_mut().map(|s| s.next(&model, noise)).collect();
            let out = run_iteration(&state, &data, cfg).expect("finite pilot data");
            for k in 0..n {
                let rho = cfg.eta(k)
                    * crate::diffusion::gaussian_kernel(out.adaptation_errors[k], sigma);
                mean[i * n + k] = rho;
                second[i * n + k] = rho * rho;
            }
            state = out.state;
        }
        (mean, second)
    };

    let partials: Vec<(Vec<f64>, Vec<f64>)> =
        (0..pilot_runs).into_par_iter().map(accumulate).collect();

    let mut mean = vec![0.0; iterations * n];
    let mut second = vec![0.0; iterations * n];
    for (pm, ps) in &partials {
        for idx in 0..iterations * n {
            mean[idx] += pm[idx];
            second[idx] += ps[idx];
        }
    }
    let scale = 1.0 / pilot_runs as f64;
    Ok((0..iterations)
        .map(|i| StepMoments {
            mean: (0..n).map(|k| mean[i * n + k] * scale).collect(),
            second: (0..n).map(|k| second[i * n + k] * scale).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{
        AlgorithmSpec, CriterionKind, ExperimentConfig, ModelSpec, RunSpec, ScalarOrPerNode,
        TopologySpec,
    };
    use crate::diffusion::Mode;
    use crate::network::CombinationRule;
    use crate::signal::NoiseModel;

    fn small_config(algorithms: Vec<AlgorithmSpec>) -> ExperimentConfig {
        ExperimentConfig {
            topology: TopologySpec {
                n: 5,
                region: 1.2,
                radius: 0.9,
                seed: 3,
            },
            model: ModelSpec {
                m: 4,
                weight_seed: 11,
                regressor_variance: ScalarOrPerNode::Scalar(1.0),
            },
            noise: NoiseModel::gaussian(0.01),
            combiner: CombinationRule::Metropolis,
            algorithms,
            run: RunSpec {
                iterations: 120,
                monte_carlo_runs: 4,
                seed: 9,
                steady_window: 40,
                pilot_runs: 8,
                regenerate_weights_per_run: false,
            },
            sweep: None,
        }
    }

    fn mcc(name: &str, mode: Mode, eta: f64) -> AlgorithmSpec {
        AlgorithmSpec {
            name: name.into(),
            criterion: CriterionKind::Mcc,
            mode,
            eta,
            sigma: Some(1.0),
            p: None,
            window: None,
            eta_per_node: None,
            beta_rule: None,
            alpha_rule: None,
            delta_rule: None,
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let cfg = small_config(vec![mcc("ATC-DMCC", Mode::Atc, 0.1)]);
        let a = run_monte_carlo(&cfg.build().unwrap()).unwrap();
        let b = run_monte_carlo(&cfg.build().unwrap()).unwrap();
        assert_eq!(
            a.algorithms[0].network_msd_linear,
            b.algorithms[0].network_msd_linear
        );
        assert_eq!(a.algorithms[0].per_node_msd_db, b.algorithms[0].per_node_msd_db);
        assert_eq!(a.run_seeds, b.run_seeds);
    }

    #[test]
    fn algorithm_order_does_not_change_results() {
        let a = run_monte_carlo(
            &small_config(vec![
                mcc("ATC-DMCC", Mode::Atc, 0.1),
                mcc("CTA-DMCC", Mode::Cta, 0.1),
            ])
            .build()
            .unwrap(),
        )
        .unwrap();
        let b = run_monte_carlo(
            &small_config(vec![
                mcc("CTA-DMCC", Mode::Cta, 0.1),
                mcc("ATC-DMCC", Mode::Atc, 0.1),
            ])
            .build()
            .unwrap(),
        )
        .unwrap();
        assert_eq!(
            a.algorithm("ATC-DMCC").unwrap().network_msd_db,
            b.algorithm("ATC-DMCC").unwrap().network_msd_db
        );
        assert_eq!(
            a.algorithm("CTA-DMCC").unwrap().network_msd_db,
            b.algorithm("CTA-DMCC").unwrap().network_msd_db
        );
    }

    #[test]
    fn deleting_an_algorithm_leaves_others_untouched() {
        let full = run_monte_carlo(
            &small_config(vec![
                mcc("ATC-DMCC", Mode::Atc, 0.1),
                mcc("CTA-DMCC", Mode::Cta, 0.1),
            ])
            .build()
            .unwrap(),
        )
        .unwrap();
        let solo = run_monte_carlo(
            &small_config(vec![mcc("ATC-DMCC", Mode::Atc, 0.1)])
                .build()
                .unwrap(),
        )
        .unwrap();
        assert_eq!(
            full.algorithm("ATC-DMCC").unwrap().network_msd_linear,
            solo.algorithm("ATC-DMCC").unwrap().network_msd_linear
        );
    }

    #[test]
    fn noiseless_cooperative_run_converges_hard() {
        let mut cfg = small_config(vec![mcc("ATC-DMCC", Mode::Atc, 0.2)]);
        cfg.noise = NoiseModel::gaussian(0.0);
        cfg.run.iterations = 2000;
        cfg.run.monte_carlo_runs = 1;
        cfg.run.steady_window = 100;
        let result = run_monte_carlo(&cfg.build().unwrap()).unwrap();
        let final_db = *result.algorithms[0].network_msd_db.last().unwrap();
        assert!(final_db < -60.0, "final MSD {final_db} dB");
        assert!(result.algorithms[0].diverged_runs.is_empty());
    }

    #[test]
    fn divergent_step_is_recorded_not_crashed() {
        // A grossly unstable step blows up the least-squares update.
        let mut cfg = small_config(vec![AlgorithmSpec {
            name: "DLMS".into(),
            criterion: CriterionKind::Lms,
            mode: Mode::Atc,
            eta: 50.0,
            sigma: None,
            p: None,
            window: None,
            eta_per_node: None,
            beta_rule: None,
            alpha_rule: None,
            delta_rule: None,
        }]);
        cfg.run.monte_carlo_runs = 2;
        let result = run_monte_carlo(&cfg.build().unwrap()).unwrap();
        assert_eq!(result.algorithms[0].diverged_runs.len(), 2);
        assert!(result.fully_diverged());
        // Sentinel tail pins the trajectory at +100 dB.
        assert_eq!(
            *result.algorithms[0].network_msd_db.last().unwrap(),
            to_db(DIVERGENCE_SENTINEL_LINEAR)
        );
    }

    #[test]
    fn ensemble_average_is_linear_domain() {
        let cfg = small_config(vec![mcc("ATC-DMCC", Mode::Atc, 0.1)]);
        let exp = cfg.build().unwrap();
        let result = run_monte_carlo(&exp).unwrap();
        // Recompute run 0 and run 1 manually; their mean must match the
        // two-run ensemble in linear domain.
        let mut two = cfg.clone();
        two.run.monte_carlo_runs = 2;
        let pair = run_monte_carlo(&two.build().unwrap()).unwrap();
        let r0 = simulate_run(&exp, 0);
        let r1 = simulate_run(&exp, 1);
        let n = 5;
        let i = 37;
        let manual = (0..n)
            .map(|k| (r0.node_sq_dev[0][i * n + k] + r1.node_sq_dev[0][i * n + k]) / 2.0)
            .sum::<f64>()
            / n as f64;
        assert!((pair.algorithms[0].network_msd_linear[i] - manual).abs() < 1e-15);
        let _ = result;
    }

    #[test]
    fn per_run_weight_regeneration_changes_the_target() {
        let mut cfg = small_config(vec![mcc("ATC-DMCC", Mode::Atc, 0.1)]);
        cfg.run.regenerate_weights_per_run = true;
        let exp = cfg.build().unwrap();
        let a = model_for_run(&exp, 0);
        let b = model_for_run(&exp, 1);
        assert_ne!(a.true_weights(), b.true_weights());
    }

    #[test]
    fn pilot_moments_have_sane_shape_and_scale() {
        let cfg = small_config(vec![mcc("ATC-DMCC", Mode::Atc, 0.1)]);
        let exp = cfg.build().unwrap();
        let moments = estimate_step_moments(&exp, "ATC-DMCC", 8).unwrap();
        assert_eq!(moments.len(), 120);
        let peak = 0.1 * crate::diffusion::gaussian_kernel(0.0, 1.0);
        for row in &moments {
            assert_eq!(row.mean.len(), 5);
            for (&m1, &m2) in row.mean.iter().zip(&row.second) {
                assert!(m1 > 0.0 && m1 <= peak + 1e-12);
                // Second moments dominate squared means (Jensen).
                assert!(m2 + 1e-15 >= m1 * m1);
            }
        }
    }

    #[test]
    fn pilot_rejects_non_kernel_algorithms() {
        let mut spec = mcc("DLMS", Mode::Atc, 0.1);
        spec.criterion = CriterionKind::Lms;
        spec.sigma = None;
        let cfg = small_config(vec![spec]);
        let exp = cfg.build().unwrap();
        assert!(estimate_step_moments(&exp, "DLMS", 4).is_err());
    }
}
