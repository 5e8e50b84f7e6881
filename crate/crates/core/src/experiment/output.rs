//! Result persistence: CSV tables and the JSON manifest. Formatting is
//! fixed-precision and locale-free, so identical results always serialize to
//! identical bytes.

use super::config::ExperimentConfig;
use super::runner::RunResult;
use super::sweep::SweepResult;

/// `curves.csv`: header `iteration,<algo>_msd_db,...`, one row per
/// iteration (1-based).
pub fn curves_csv(result: &RunResult) -> String {
    let mut s = String::from("iteration");
    for algo in &result.algorithms {
        s.push_str(&format!(",{}_msd_db", algo.name));
    }
    s.push('\n');
    for i in 0..result.iterations {
        s.push_str(&(i + 1).to_string());
        for algo in &result.algorithms {
            s.push_str(&format!(",{:.6}", algo.network_msd_db[i]));
        }
        s.push('\n');
    }
    s
}

/// `steady_state.csv`: header `node,<algo>_msd_db,...`, one row per node
/// (1-based).
pub fn steady_state_csv(result: &RunResult) -> String {
    let mut s = String::from("node");
    for algo in &result.algorithms {
        s.push_str(&format!(",{}_msd_db", algo.name));
    }
    s.push('\n');
    for k in 0..result.nodes {
        s.push_str(&(k + 1).to_string());
        for algo in &result.algorithms {
            s.push_str(&format!(",{:.6}", algo.per_node_msd_db[k]));
        }
        s.push('\n');
    }
    s
}

/// `sweep.csv`: long format `param1,...,algo,msd_db`.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = String::new();
    for name in &sweep.param_names {
        s.push_str(name);
        s.push(',');
    }
    s.push_str("algo,msd_db\n");
    for row in &sweep.rows {
        for (_, value) in &row.params {
            s.push_str(&format!("{value},"));
        }
        s.push_str(&format!("{},{:.6}\n", row.algorithm, row.msd_db));
    }
    s
}

/// `manifest.json`: config echo, seed derivations, and the crate version.
/// Wall time is deliberately excluded so reruns are byte-identical.
pub fn manifest_json(config: &ExperimentConfig, result: &RunResult) -> String {
    let value = serde_json::json!({
        "artifact_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "master_seed": config.run.seed,
        "run_seeds": result.run_seeds,
        "diverged_runs": result
            .algorithms
            .iter()
            .map(|a| {
                serde_json::json!({
                    "algo": a.name,
                    "runs": a.diverged_runs.iter().map(|d| d.run).collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>(),
    });
    let mut s = serde_json::to_string_pretty(&value).expect("manifest serializes");
    s.push('\n');
    s
}

/// Manifest for sweep outputs: config echo and the master seed (per-point
/// run seeds derive from it identically at every grid point).
pub fn sweep_manifest_json(config: &ExperimentConfig) -> String {
    let value = serde_json::json!({
        "artifact_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "master_seed": config.run.seed,
    });
    let mut s = serde_json::to_string_pretty(&value).expect("manifest serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::runner::{AlgorithmResult, RunResult};

    fn fake_result() -> RunResult {
        RunResult {
            algorithms: vec![
                AlgorithmResult {
                    name: "A".into(),
                    network_msd_linear: vec![1.0, 0.1],
                    network_msd_db: vec![0.0, -10.0],
                    per_node_msd_db: vec![-9.5, -10.5],
                    steady_state_db: -10.0,
                    diverged_runs: vec![],
                },
                AlgorithmResult {
                    name: "B".into(),
                    network_msd_linear: vec![1.0, 0.5],
                    network_msd_db: vec![0.0, -3.0103],
                    per_node_msd_db: vec![-3.0, -3.0],
                    steady_state_db: -3.0,
                    diverged_runs: vec![],
                },
            ],
            run_seeds: vec![11, 22],
            iterations: 2,
            nodes: 2,
            wall_time_ms: 5,
        }
    }

    #[test]
    fn curves_csv_shape() {
        let csv = curves_csv(&fake_result());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,A_msd_db,B_msd_db");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1,0.000000,0.000000");
        assert_eq!(lines[2], "2,-10.000000,-3.010300");
    }

    #[test]
    fn steady_state_csv_shape() {
        let csv = steady_state_csv(&fake_result());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "node,A_msd_db,B_msd_db");
        assert_eq!(lines[1], "1,-9.500000,-3.000000");
        assert_eq!(lines[2], "2,-10.500000,-3.000000");
    }

    #[test]
    fn manifest_excludes_wall_time() {
        let cfg = crate::experiment::ExperimentConfig::default();
        let manifest = manifest_json(&cfg, &fake_result());
        assert!(!manifest.contains("wall_time"));
        assert!(manifest.contains("run_seeds"));
        let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
        assert_eq!(parsed["master_seed"], 42);
    }
}
