use std::collections::BTreeMap;
use std::error::Error;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tradepost_core::best_response::FocReport;
use tradepost_core::crypto::{link_to_market, verification_overhead_report, MarketLink};
use tradepost_core::equilibrium::{
    competitive_benchmark, convergence_experiment, solve_nash, CompetitiveBenchmark, EquilibriumResult,
    ReplicationTable,
};
use tradepost_core::{AgentId, Horizon, MarketConfig};

use crate::scenario::{Experiment, ScenarioFile};

type BoxResult<T> = Result<T, Box<dyn Error>>;

#[derive(Debug, Serialize)]
struct RunRecord {
    experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    converged: bool,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_strategy_change: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_foc_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oscillation_detected: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl RunRecord {
    fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            n: None,
            converged: false,
            iterations: 0,
            max_strategy_change: None,
            max_foc_residual: None,
            oscillation_detected: None,
            error: None,
        }
    }

    fn failed(experiment: &str, err: impl ToString) -> Self {
        Self {
            error: Some(err.to_string()),
            ..Self::new(experiment)
        }
    }

    fn from_equilibrium(experiment: &str, eq: &EquilibriumResult) -> Self {
        Self {
            converged: eq.converged,
            iterations: eq.iterations,
            max_strategy_change: Some(eq.max_strategy_change),
            max_foc_residual: Some(eq.max_foc_residual()),
            oscillation_detected: Some(eq.oscillation_detected),
            ..Self::new(experiment)
        }
    }
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    tool_version: &'static str,
    schema_version: &'a str,
    config_hash: String,
    seed: u64,
    mode: tradepost_core::equilibrium::UpdateMode,
    experiments: Vec<&'static str>,
    overrides: &'a BTreeMap<String, String>,
    runs: Vec<RunRecord>,
    converged: bool,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct AgentFoc<'a> {
    agent: AgentId,
    #[serde(flatten)]
    report: &'a FocReport,
}

#[derive(Serialize)]
struct FocFile<'a> {
    converged: bool,
    trivial: bool,
    agents: Vec<AgentFoc<'a>>,
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> BoxResult<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name))?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> BoxResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn config_hash(scenario: &ScenarioFile) -> String {
    let bytes = serde_json::to_vec(scenario).expect("scenario serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn prices_csv(eq: &EquilibriumResult) -> BoxResult<Vec<u8>> {
    let relative = eq.prices.relative();
    let mut rows = vec![vec!["0".into(), num(eq.prices.numeraire), num(1.0)]];
    for (t, p) in eq.prices.electricity.iter().enumerate() {
        rows.push(vec![(t + 1).to_string(), num(*p), num(relative[t])]);
    }
    csv_bytes(&["period", "price", "relative_price"], rows)
}

fn allocations_csv(eq: &EquilibriumResult, config: &MarketConfig) -> BoxResult<Vec<u8>> {
    let alloc = &eq.allocations;
    let mut rows = Vec::new();
    for (i, agent) in config.agents().enumerate() {
        let label = agent.to_string();
        for (t, x) in alloc.electricity[i].iter().enumerate() {
            rows.push(vec![label.clone(), format!("electricity_{}", t + 1), num(*x)]);
        }
        rows.push(vec![label.clone(), "consumption".into(), num(alloc.numeraire[i])]);
        if let AgentId::Producer(j) = agent {
            for (t, x) in alloc.inputs[j].iter().enumerate() {
                rows.push(vec![label.clone(), format!("input_{}", t + 1), num(*x)]);
            }
            for (t, q) in eq.profile.producers[j].offers.iter().enumerate() {
                rows.push(vec![label.clone(), format!("offer_{}", t + 1), num(*q)]);
            }
            if config.horizon == Horizon::LongRun {
                rows.push(vec![label.clone(), "investment".into(), num(alloc.investment[j])]);
            }
        }
    }
    csv_bytes(&["agent", "good", "quantity"], rows)
}

fn foc_json(eq: &EquilibriumResult, config: &MarketConfig) -> BoxResult<Vec<u8>> {
    let file = FocFile {
        converged: eq.converged,
        trivial: eq.trivial,
        agents: config
            .agents()
            .zip(&eq.foc_reports)
            .map(|(agent, report)| AgentFoc { agent, report })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&file)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn competitive_csv(bench: &CompetitiveBenchmark) -> BoxResult<Vec<u8>> {
    let rows = bench
        .prices
        .iter()
        .zip(&bench.supply)
        .enumerate()
        .map(|(t, (p, q))| vec![(t + 1).to_string(), num(*p), num(*q)])
        .collect();
    csv_bytes(&["period", "price", "supply_per_producer"], rows)
}

fn replication_csv(table: &ReplicationTable, periods: usize) -> BoxResult<Vec<u8>> {
    let mut header = vec!["n".to_string(), "gap".into(), "converged".into(), "iterations".into()];
    header.extend((1..=periods).map(|t| format!("nash_price_{t}")));
    header.extend((1..=periods).map(|t| format!("competitive_price_{t}")));
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string(), num(r.gap), r.converged.to_string(), r.iterations.to_string()];
            row.extend(r.nash_prices.iter().map(|p| num(*p)));
            row.extend(r.competitive_prices.iter().map(|p| num(*p)));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(&header, rows)
}

fn crypto_csv(link: &MarketLink) -> BoxResult<Vec<u8>> {
    let mut rows = Vec::new();
    for (i, agent) in link.agents.iter().enumerate() {
        for (s, e) in link.allocation.entries[i].iter().enumerate() {
            rows.push(vec![
                agent.to_string(),
                (s + 1).to_string(),
                num(link.scenario.budgets[i][s]),
                num(e.consumption),
                num(e.verification),
                e.shadow_price.map(num).unwrap_or_default(),
                e.active.to_string(),
                num(link.market_multipliers[i]),
            ]);
        }
    }
    csv_bytes(
        &["agent", "state", "budget", "consumption", "verification", "shadow_price", "active", "market_multiplier"],
        rows,
    )
}

fn overhead_csv(link: &MarketLink) -> BoxResult<Vec<u8>> {
    let rows = verification_overhead_report(&link.allocation)
        .into_iter()
        .map(|r| {
            vec![
                (r.state + 1).to_string(),
                num(r.consumption),
                num(r.verification),
                num(r.ratio),
                r.abstaining.to_string(),
            ]
        })
        .collect();
    csv_bytes(&["state", "consumption", "verification", "overhead_ratio", "abstaining"], rows)
}

/// Runs every requested experiment and writes its outputs into `out`.
/// Returns whether every solve converged.
pub fn run(scenario: &ScenarioFile, out: &Path, overrides: &BTreeMap<String, String>) -> BoxResult<bool> {
    let started = Instant::now();
    std::fs::create_dir_all(out)?;
    let config = &scenario.market;
    let opts = scenario.solver.options();
    let mut runs = Vec::new();
    let mut names = Vec::new();
    let mut nash: Option<EquilibriumResult> = None;

    for experiment in &scenario.experiments {
        names.push(experiment.name());
        match experiment {
            Experiment::Nash | Experiment::CryptoLink if nash.is_none() => {
                match solve_nash(config, None, &opts) {
                    Ok(eq) => {
                        runs.push(RunRecord::from_equilibrium("nash", &eq));
                        write_atomic(out, "prices.csv", &prices_csv(&eq)?)?;
                        write_atomic(out, "allocations.csv", &allocations_csv(&eq, config)?)?;
                        write_atomic(out, "foc_report.json", &foc_json(&eq, config)?)?;
                        nash = Some(eq);
                    }
                    Err(e) => {
                        runs.push(RunRecord::failed("nash", &e));
                        continue;
                    }
                }
            }
            _ => {}
        }
        match experiment {
            Experiment::Nash => {}
            Experiment::CryptoLink => {
                let (Some(eq), Some(c)) = (&nash, &scenario.crypto) else {
                    continue;
                };
                match link_to_market(eq, config, c.verification_cost, &c.state_scalings) {
                    Ok(link) => {
                        write_atomic(out, "crypto.csv", &crypto_csv(&link)?)?;
                        write_atomic(out, "crypto_overhead.csv", &overhead_csv(&link)?)?;
                        runs.push(RunRecord {
                            converged: true,
                            ..RunRecord::new("crypto-link")
                        });
                    }
                    Err(e) => runs.push(RunRecord::failed("crypto-link", e)),
                }
            }
            Experiment::Competitive => match competitive_benchmark(config) {
                Ok(bench) => {
                    write_atomic(out, "competitive.csv", &competitive_csv(&bench)?)?;
                    runs.push(RunRecord {
                        converged: true,
                        iterations: bench.iterations,
                        ..RunRecord::new("competitive")
                    });
                }
                Err(e) => runs.push(RunRecord::failed("competitive", e)),
            },
            Experiment::Replication(ns) => match convergence_experiment(config, ns, &opts) {
                Ok(table) => {
                    write_atomic(out, "replication.csv", &replication_csv(&table, config.periods)?)?;
                    for r in &table.rows {
                        runs.push(RunRecord {
                            n: Some(r.n),
                            converged: r.converged,
                            iterations: r.iterations,
                            ..RunRecord::new("replication")
                        });
                    }
                }
                Err(e) => runs.push(RunRecord::failed("replication", e)),
            },
        }
    }

    let converged = runs.iter().all(|r| r.converged);
    let meta = RunMeta {
        tool_version: env!("CARGO_PKG_VERSION"),
        schema_version: &scenario.schema_version,
        config_hash: config_hash(scenario),
        seed: scenario.solver.seed,
        mode: scenario.solver.mode,
        experiments: names,
        overrides,
        runs,
        converged,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let mut bytes = serde_json::to_vec_pretty(&meta)?;
    bytes.push(b'\n');
    write_atomic(out, "run_meta.json", &bytes)?;
    for r in &meta.runs {
        if let Some(e) = &r.error {
            eprintln!("{}: {e}", r.experiment);
        } else if !r.converged {
            eprintln!("{}: did not converge", r.experiment);
        }
    }
    Ok(converged)
}
