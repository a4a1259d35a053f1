//! `tradepost`: run market experiments described by a JSON scenario.
//!
//! Exit codes: 0 when every requested solve converged, 1 on usage or
//! scenario errors, 2 when a solve failed or did not converge.

mod run;
mod scenario;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tradepost_core::equilibrium::UpdateMode;

use scenario::{load_scenario, Experiment, DEFAULT_REPLICATIONS};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentArg {
    Nash,
    Competitive,
    Replication,
    CryptoLink,
}

#[derive(Debug, Parser)]
#[command(name = "tradepost", version, about = "Trading-post electricity market experiments")]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved scenario and exit.
    #[arg(long)]
    print_config: bool,
    /// Experiment to run instead of those in the file; repeatable.
    #[arg(long = "experiment", value_enum, value_name = "NAME")]
    experiments: Vec<ExperimentArg>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut scenario = match load_scenario(&cli.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let mut overrides = BTreeMap::new();
    if let Some(tol) = cli.tol {
        scenario.solver.tol = tol;
        overrides.insert("tol".to_string(), tol.to_string());
    }
    if let Some(n) = cli.max_iter {
        scenario.solver.max_iter = n;
        overrides.insert("max_iter".to_string(), n.to_string());
    }
    if let Some(d) = cli.damping {
        scenario.solver.damping = d;
        overrides.insert("damping".to_string(), d.to_string());
    }
    if let Some(mode) = cli.mode {
        scenario.solver.mode = match mode {
            ModeArg::Jacobi => UpdateMode::Jacobi,
            ModeArg::GaussSeidel => UpdateMode::GaussSeidel,
        };
        let name = mode.to_possible_value().expect("no skipped variants");
        overrides.insert("mode".to_string(), name.get_name().to_string());
    }
    if let Some(seed) = cli.seed {
        scenario.solver.seed = seed;
        overrides.insert("seed".to_string(), seed.to_string());
    }
    if !cli.experiments.is_empty() {
        let file_replications = scenario.experiments.iter().find_map(|e| match e {
            Experiment::Replication(ns) => Some(ns.clone()),
            _ => None,
        });
        scenario.experiments = cli
            .experiments
            .iter()
            .map(|e| match e {
                ExperimentArg::Nash => Experiment::Nash,
                ExperimentArg::Competitive => Experiment::Competitive,
                ExperimentArg::Replication => Experiment::Replication(
                    file_replications.clone().unwrap_or_else(|| DEFAULT_REPLICATIONS.to_vec()),
                ),
                ExperimentArg::CryptoLink => Experiment::CryptoLink,
            })
            .collect();
        let names: Vec<&str> = scenario.experiments.iter().map(Experiment::name).collect();
        overrides.insert("experiments".to_string(), names.join(","));
    }
    if let Err(e) = scenario.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&scenario).expect("scenario serializes"));
        return ExitCode::SUCCESS;
    }

    match run::run(&scenario, &cli.out, &overrides) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
