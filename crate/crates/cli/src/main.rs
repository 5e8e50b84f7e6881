//! Command-line front end: runs experiments from JSON configs and emits CSV
//! tables plus SVG plots.
//!
//! Exit codes: 0 success, 2 configuration error, 3 every run of every
//! algorithm diverged, 4 I/O error.

mod plot;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use difnet_core::analysis::{
    mean_stability_bound, transient_msd_model, ErrorSpec, GlobalModel, KernelGain,
};
use difnet_core::diffusion::{Criterion, Mode};
use difnet_core::experiment::{
    curves_csv, estimate_step_moments, manifest_json, parameter_sweep, run_monte_carlo,
    steady_state_csv, sweep_csv, sweep_manifest_json, Experiment, ExperimentConfig,
    ExperimentError, RunResult,
};
use difnet_core::nalgebra::DVector;
use plot::Series;

#[derive(Parser)]
#[command(
    name = "difnet",
    version,
    about = "Robust diffusion estimation over networks: simulation, sweeps, and convergence models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON). Required by every subcommand except
    /// `report`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Keep only the named algorithms (repeatable).
    #[arg(long = "algo", global = true)]
    algos: Vec<String>,
    /// Which artifacts to write.
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the network topology and export its nodes and edges.
    Topology,
    /// Run the Monte Carlo experiment: deviation curves and per-node steady
    /// states.
    Run,
    /// Run the parameter sweep declared in the config's `sweep` section.
    Sweep,
    /// Report the mean-stability step-size bound per node.
    Stability,
    /// Predict the deviation transient from the convergence model and
    /// overlay a fresh simulation.
    Predict,
    /// Regenerate SVG plots from existing CSV files in the output directory.
    Report,
}

enum CliError {
    Config(String),
    Divergence,
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("config error: {m}"),
            CliError::Divergence => "every run of every algorithm diverged".into(),
            CliError::Io(m) => format!("I/O error: {m}"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<difnet_core::analysis::AnalysisError> for CliError {
    fn from(e: difnet_core::analysis::AnalysisError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<plot::PlotError> for CliError {
    fn from(e: plot::PlotError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("difnet: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if !cli.algos.is_empty() {
        for wanted in &cli.algos {
            if !config.algorithms.iter().any(|a| &a.name == wanted) {
                return Err(CliError::Config(format!(
                    "--algo '{wanted}' does not match any configured algorithm"
                )));
            }
        }
        config.algorithms.retain(|a| cli.algos.contains(&a.name));
        config.validate()?;
    }
    Ok(config)
}

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    ensure_out(&cli.out)?;
    match cli.command {
        Command::Topology => topology(cli),
        Command::Run => run(cli),
        Command::Sweep => sweep(cli),
        Command::Stability => stability(cli),
        Command::Predict => predict(cli),
        Command::Report => report(cli),
    }
}

fn topology(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let experiment = config.build()?;
    let t = &experiment.topology;
    if cli.format.csv() {
        write(&cli.out, "topology.csv", &t.to_csv())?;
    }
    if cli.format.svg() {
        let positions: Vec<(f64, f64)> = t.positions().iter().map(|p| (p[0], p[1])).collect();
        let svg = plot::network_chart(&positions, &t.edges(), t.region())?;
        write(&cli.out, "topology.svg", &svg)?;
    }
    println!(
        "topology: {} nodes, {} edges, radius {}",
        t.n(),
        t.edges().len(),
        t.radius()
    );
    Ok(())
}

fn curve_series(result: &RunResult) -> Vec<Series> {
    result
        .algorithms
        .iter()
        .map(|a| Series {
            name: a.name.clone(),
            points: a
                .network_msd_db
                .iter()
                .enumerate()
                .map(|(i, &db)| ((i + 1) as f64, db))
                .collect(),
        })
        .collect()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let experiment = config.build()?;
    let result = run_monte_carlo(&experiment)?;
    if result.fully_diverged() {
        return Err(CliError::Divergence);
    }
    if cli.format.csv() {
        write(&cli.out, "curves.csv", &curves_csv(&result))?;
        write(&cli.out, "steady_state.csv", &steady_state_csv(&result))?;
        write(&cli.out, "manifest.json", &manifest_json(&config, &result))?;
    }
    if cli.format.svg() {
        let svg = plot::line_chart(
            "Network MSD",
            "iteration",
            "MSD (dB)",
            &curve_series(&result),
        )?;
        write(&cli.out, "curves.svg", &svg)?;
        let node_series: Vec<Series> = result
            .algorithms
            .iter()
            .map(|a| Series {
                name: a.name.clone(),
                points: a
                    .per_node_msd_db
                    .iter()
                    .enumerate()
                    .map(|(k, &db)| ((k + 1) as f64, db))
                    .collect(),
            })
            .collect();
        let svg = plot::marker_chart(
            "Steady-state MSD per node",
            "node",
            "MSD (dB)",
            &node_series,
        )?;
        write(&cli.out, "steady_state.svg", &svg)?;
    }
    for a in &result.algorithms {
        println!(
            "{}: steady-state {:.2} dB, diverged in {}/{} runs",
            a.name,
            a.steady_state_db,
            a.diverged_runs.len(),
            result.run_seeds.len()
        );
    }
    println!("wall time: {} ms", result.wall_time_ms);
    Ok(())
}

fn sweep(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let grid = config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("the config has no 'sweep' section".into()))?;
    let result = parameter_sweep(&config, &grid)?;
    if cli.format.csv() {
        write(&cli.out, "sweep.csv", &sweep_csv(&result))?;
        write(&cli.out, "manifest.json", &sweep_manifest_json(&config))?;
    }
    if cli.format.svg() {
        let series = tables::sweep_series(&sweep_csv(&result))?;
        let x_label = result
            .param_names
            .first()
            .cloned()
            .unwrap_or_else(|| "point".into());
        let svg = plot::line_chart("Steady-state MSD sweep", &x_label, "MSD (dB)", &series)?;
        write(&cli.out, "sweep.svg", &svg)?;
    }
    println!("sweep: {} rows", result.rows.len());
    Ok(())
}

fn first_kernel_algorithm(experiment: &Experiment) -> Result<(String, f64, f64), CliError> {
    for (name, cfg) in &experiment.algorithms {
        if let Criterion::Mcc { sigma } = cfg.criterion() {
            return Ok((name.clone(), *sigma, cfg.eta(0)));
        }
    }
    Err(CliError::Config(
        "no kernel-criterion (mcc) algorithm in the config".into(),
    ))
}

fn stability(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let experiment = config.build()?;
    let (name, sigma, eta) = first_kernel_algorithm(&experiment)?;
    let spec = ErrorSpec::Noise(config.noise.clone());
    let mut csv = String::from(
        "node,lambda_max,kernel_gain,eta_max,worst_case_eta_max,configured_eta,within_bound\n",
    );
    println!("mean-stability bounds for '{name}' (sigma {sigma}, eta {eta}):");
    for k in 0..experiment.topology.n() {
        let lambda_max = experiment.model.regressor_variance(k);
        let estimated = mean_stability_bound(
            lambda_max,
            sigma,
            &KernelGain::Estimated {
                spec: spec.clone(),
                samples: 200_000,
                seed: config.run.seed ^ (k as u64),
            },
        );
        let worst = mean_stability_bound(lambda_max, sigma, &KernelGain::WorstCase);
        let ok = eta < worst.eta_max;
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            k + 1,
            lambda_max,
            estimated.kernel_gain,
            estimated.eta_max,
            worst.eta_max,
            eta,
            ok
        ));
        println!(
            "  node {:>2}: eta_max {:.4} (worst case {:.4}) -> step {} is {}",
            k + 1,
            estimated.eta_max,
            worst.eta_max,
            eta,
            if ok { "within the bound" } else { "OUT OF BOUNDS" }
        );
    }
    if cli.format.csv() {
        write(&cli.out, "stability.csv", &csv)?;
    }
    Ok(())
}

fn predict(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let experiment = config.build()?;
    let noise_variance = config.noise.variance().ok_or_else(|| {
        CliError::Config(
            "the transient model requires finite-variance (gaussian-regime) noise".into(),
        )
    })?;
    let (name, _, _) = first_kernel_algorithm(&experiment)?;
    let (_, algo_cfg) = experiment
        .algorithms
        .iter()
        .find(|(n, _)| n == &name)
        .expect("algorithm present");
    if algo_cfg.mode() != Mode::Atc {
        return Err(CliError::Config(format!(
            "the transient model covers the adapt-then-combine mode; '{name}' is {:?}",
            algo_cfg.mode()
        )));
    }

    let n = experiment.topology.n();
    let m = experiment.model.m();
    let iterations = config.run.iterations;
    let moments = estimate_step_moments(&experiment, &name, config.run.pilot_runs)?;
    let model = GlobalModel::new(
        algo_cfg.estimate_coupling(),
        m,
        experiment.model.regressor_variances().to_vec(),
        moments.last().expect("nonempty").mean.clone(),
        vec![noise_variance; n],
    )?;
    // Estimates start at zero, so the initial stacked error is the true
    // parameter vector repeated per node.
    let w_o = experiment.model.true_weights();
    let initial = DVector::from_fn(n * m, |i, _| w_o[i % m]);
    let prediction = transient_msd_model(&model, &initial, &moments, iterations)?;

    let simulated = run_monte_carlo(&experiment)?;
    let sim = &simulated
        .algorithm(&name)
        .expect("algorithm simulated")
        .network_msd_db;

    let mut csv = String::from("iteration,predicted_msd_db,simulated_msd_db\n");
    for i in 0..iterations {
        csv.push_str(&format!(
            "{},{:.6},{:.6}\n",
            i + 1,
            prediction.msd_db[i],
            sim[i]
        ));
    }
    if cli.format.csv() {
        write(&cli.out, "predict.csv", &csv)?;
    }
    if cli.format.svg() {
        let series = vec![
            Series {
                name: format!("{name} (model)"),
                points: prediction
                    .msd_db
                    .iter()
                    .enumerate()
                    .map(|(i, &db)| ((i + 1) as f64, db))
                    .collect(),
            },
            Series {
                name: format!("{name} (simulation)"),
                points: sim
                    .iter()
                    .enumerate()
                    .map(|(i, &db)| ((i + 1) as f64, db))
                    .collect(),
            },
        ];
        let svg = plot::line_chart(
            "Transient model vs simulation",
            "iteration",
            "MSD (dB)",
            &series,
        )?;
        write(&cli.out, "predict.svg", &svg)?;
    }
    println!(
        "transient transition spectral radius {:.6} ({})",
        prediction.spectral_radius,
        if prediction.stable {
            "stable"
        } else {
            "UNSTABLE"
        }
    );
    if let Some(ss) = prediction.steady_state {
        println!(
            "predicted steady-state MSD {:.2} dB",
            10.0 * ss.max(1e-30).log10()
        );
    }
    Ok(())
}

fn report(cli: &Cli) -> Result<(), CliError> {
    let mut produced = 0;
    let read = |name: &str| -> Option<String> { fs::read_to_string(cli.out.join(name)).ok() };

    if let Some(csv) = read("curves.csv") {
        let series = tables::indexed_msd_series(&csv, "iteration")?;
        let svg = plot::line_chart("Network MSD", "iteration", "MSD (dB)", &series)?;
        write(&cli.out, "curves.svg", &svg)?;
        produced += 1;
    }
    if let Some(csv) = read("steady_state.csv") {
        let series = tables::indexed_msd_series(&csv, "node")?;
        let svg = plot::marker_chart("Steady-state MSD per node", "node", "MSD (dB)", &series)?;
        write(&cli.out, "steady_state.svg", &svg)?;
        produced += 1;
    }
    if let Some(csv) = read("sweep.csv") {
        let series = tables::sweep_series(&csv)?;
        let svg = plot::line_chart("Steady-state MSD sweep", "parameter", "MSD (dB)", &series)?;
        write(&cli.out, "sweep.svg", &svg)?;
        produced += 1;
    }
    if let Some(csv) = read("predict.csv") {
        let table = tables::parse_table(&csv)?;
        if table.header != ["iteration", "predicted_msd_db", "simulated_msd_db"] {
            return Err(plot::PlotError::Schema(format!(
                "unexpected predict.csv header '{}'",
                table.header.join(",")
            ))
            .into());
        }
        let relabeled = csv
            .replace("predicted_msd_db", "model_msd_db")
            .replace("simulated_msd_db", "simulation_msd_db");
        let series = tables::indexed_msd_series(&relabeled, "iteration")?;
        let svg = plot::line_chart(
            "Transient model vs simulation",
            "iteration",
            "MSD (dB)",
            &series,
        )?;
        write(&cli.out, "predict.svg", &svg)?;
        produced += 1;
    }
    if let Some(csv) = read("topology.csv") {
        let (positions, edges) = tables::topology_data(&csv)?;
        let region = positions
            .iter()
            .flat_map(|&(x, y)| [x, y])
            .fold(1.0_f64, f64::max);
        let svg = plot::network_chart(&positions, &edges, region)?;
        write(&cli.out, "topology.svg", &svg)?;
        produced += 1;
    }

    if produced == 0 {
        Err(CliError::Config(format!(
            "no known CSV files in {}",
            cli.out.display()
        )))
    } else {
        println!("regenerated {produced} plot(s)");
        Ok(())
    }
}
