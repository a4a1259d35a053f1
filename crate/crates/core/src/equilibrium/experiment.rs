//! Replication: how far Nash prices sit from competitive prices as every
//! agent is cloned `n` times.

use serde::Serialize;

use crate::config::MarketConfig;
use crate::error::Result;

use super::{competitive_benchmark, replicate_economy, solve_nash, SolveOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub n: usize,
    /// Nash electricity prices in units of the consumption good.
    pub nash_prices: Vec<f64>,
    pub competitive_prices: Vec<f64>,
    /// Sup-norm distance between the two price vectors.
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationTable {
    pub rows: Vec<ReplicationRow>,
}

impl ReplicationTable {
    /// Each gap is at most `(1 + tolerance)` times the previous one.
    pub fn is_weakly_decreasing(&self, tolerance: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].gap <= w[0].gap * (1.0 + tolerance))
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

pub fn convergence_experiment(
    config: &MarketConfig,
    replications: &[usize],
    opts: &SolveOptions,
) -> Result<ReplicationTable> {
    let mut rows = Vec::with_capacity(replications.len());
    for &n in replications {
        let economy = replicate_economy(config, n);
        let bench = competitive_benchmark(&economy)?;
        let eq = solve_nash(&economy, None, opts)?;
        let nash_prices = eq.prices.relative();
        let gap = nash_prices
            .iter()
            .zip(&bench.prices)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(ReplicationRow {
            n,
            nash_prices,
            competitive_prices: bench.prices,
            gap,
            converged: eq.converged,
            iterations: eq.iterations,
        });
    }
    Ok(ReplicationTable { rows })
}
