//! Walrasian benchmark with price-taking agents.
//!
//! Prices are in units of the consumption good. Every agent spends a fixed
//! share of its income on each good, producers earn the profit of a
//! price-taking firm, and the electricity price solves a fixed-point
//! problem in which expenditure depends on profit income.

use serde::Serialize;

use crate::config::{Horizon, MarketConfig};
use crate::error::{MarketError, Result};
use crate::market::{input_for, AllocationSet, ProducerStrategy, StandardStrategy, StrategyProfile};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitiveBenchmark {
    /// Electricity prices with the consumption good as numeraire.
    pub prices: Vec<f64>,
    /// Output of each (identical) producer per period.
    pub supply: Vec<f64>,
    /// Capacity chosen by each producer in the long run.
    pub capacity: Option<f64>,
    /// Profit of each producer.
    pub profit: f64,
    pub allocations: AllocationSet,
    /// Sup-norm of excess demand over all goods.
    pub excess_demand_residual: f64,
    pub iterations: usize,
}

const RESIDUAL_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100_000;

struct Technology<'a> {
    config: &'a MarketConfig,
    /// Extra unit cost of capacity; nonzero only in the long run.
    capacity_cost: f64,
    /// Per-period output bound.
    cap: f64,
}

impl Technology<'_> {
    /// Marginal cost at zero output for constant returns.
    fn unit_cost(&self) -> f64 {
        1.0 / self.config.productivity + self.capacity_cost
    }

    /// Profit-maximizing output at price `p` for decreasing returns.
    fn supply(&self, p: f64) -> f64 {
        let c = self.config.returns_exponent;
        let theta = self.config.productivity;
        let net = p - self.capacity_cost;
        if net <= 0.0 {
            return 0.0;
        }
        (theta * (c * theta * net).powf(c / (1.0 - c))).min(self.cap)
    }

    fn constant_returns(&self) -> bool {
        self.config.returns_exponent == 1.0
    }

    /// Per-producer output and profit in one period.
    fn period_profit(&self, p: f64) -> f64 {
        if self.constant_returns() {
            let margin = p - self.unit_cost();
            if margin > 0.0 && self.cap.is_finite() {
                margin * self.cap
            } else {
                0.0
            }
        } else {
            let q = self.supply(p);
            p * q - input_for(q, self.config) - self.capacity_cost * q
        }
    }

    /// Price at which `producers` firms sell exactly `expenditure` worth.
    fn clearing_price(&self, expenditure: f64, producers: f64) -> f64 {
        if self.constant_returns() {
            return self.unit_cost().max(expenditure / (producers * self.cap));
        }
        if expenditure <= 0.0 {
            return self.capacity_cost;
        }
        let sales = |p: f64| producers * self.supply(p) * p;
        let (mut lo, mut hi) = (self.capacity_cost.max(f64::MIN_POSITIVE), 1.0_f64.max(2.0 * self.capacity_cost));
        while sales(hi) < expenditure {
            hi *= 2.0;
        }
        while lo == self.capacity_cost && lo > 0.0 && sales(lo) >= expenditure {
            lo *= 0.5;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sales(mid) < expenditure {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Damped fixed-point iteration on prices; see the module docs.
///
/// Requires non-increasing returns. In the long run only a single period is
/// supported, where capacity equals output and costs `investment_cost` per
/// unit.
pub fn competitive_benchmark(config: &MarketConfig) -> Result<CompetitiveBenchmark> {
    config.validate()?;
    if config.returns_exponent > 1.0 {
        return Err(MarketError::Unsupported(
            "increasing returns unsupported in Walrasian mode".into(),
        ));
    }
    if config.p() == 0 {
        return Err(MarketError::DegenerateEconomy);
    }
    let periods = config.periods;
    let tech = match config.horizon {
        Horizon::ShortRun => Technology {
            config,
            capacity_cost: 0.0,
            cap: config.capacity,
        },
        Horizon::LongRun if periods == 1 => Technology {
            config,
            capacity_cost: config.investment_cost,
            cap: f64::INFINITY,
        },
        Horizon::LongRun => {
            return Err(MarketError::Unsupported(
                "long-run Walrasian benchmark supports a single period only".into(),
            ))
        }
    };
    let producers = config.p() as f64;

    // Expenditure share of each good, summed over agents of each kind.
    let share = |u: &crate::LogUtility, t: Option<usize>| {
        let w = t.map_or(u.numeraire, |t| u.electricity[t]);
        w / u.total_weight()
    };
    let standard_spending: Vec<f64> = (0..periods)
        .map(|t| {
            config
                .standard_agents
                .iter()
                .map(|a| share(&a.utility, Some(t)) * a.endowment)
                .sum()
        })
        .collect();
    let profit_shares: Vec<f64> = (0..periods)
        .map(|t| config.producers.iter().map(|a| share(&a.utility, Some(t))).sum())
        .collect();
    let profit_at = |p: &[f64]| p.iter().map(|&x| tech.period_profit(x)).sum::<f64>();
    let update = |p: &[f64]| -> Vec<f64> {
        let profit = profit_at(p);
        (0..periods)
            .map(|t| tech.clearing_price(standard_spending[t] + profit_shares[t] * profit, producers))
            .collect()
    };

    let mut prices: Vec<f64> = (0..periods)
        .map(|t| tech.clearing_price(standard_spending[t], producers))
        .collect();
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let target = update(&prices);
        let mut change: f64 = 0.0;
        for (p, f) in prices.iter_mut().zip(&target) {
            let next = 0.5 * *p + 0.5 * f;
            change = change.max((next - *p).abs() / p.abs().max(1.0));
            *p = next;
        }
        if change <= 1e-15 {
            break;
        }
    }

    let profit = profit_at(&prices);
    let expenditure: Vec<f64> = (0..periods)
        .map(|t| standard_spending[t] + profit_shares[t] * profit)
        .collect();
    let supply: Vec<f64> = (0..periods)
        .map(|t| {
            if tech.constant_returns() {
                // Output is indeterminate at marginal cost; demand pins it.
                if prices[t] > tech.unit_cost() {
                    tech.cap
                } else {
                    expenditure[t] / prices[t] / producers
                }
            } else {
                tech.supply(prices[t])
            }
        })
        .collect();

    let mut electricity = Vec::with_capacity(config.agent_count());
    let mut numeraire = Vec::with_capacity(config.agent_count());
    for a in &config.standard_agents {
        electricity.push((0..periods).map(|t| share(&a.utility, Some(t)) * a.endowment / prices[t]).collect());
        numeraire.push(share(&a.utility, None) * a.endowment);
    }
    for a in &config.producers {
        electricity.push((0..periods).map(|t| share(&a.utility, Some(t)) * profit / prices[t]).collect());
        numeraire.push(share(&a.utility, None) * profit);
    }
    let inputs: Vec<f64> = supply.iter().map(|&q| input_for(q, config)).collect();
    let capacity = (config.horizon == Horizon::LongRun).then(|| supply.iter().copied().fold(0.0, f64::max));
    let investment = capacity.map_or(0.0, |k| config.investment_cost * k);

    let mut residual: f64 = 0.0;
    for t in 0..periods {
        let demand: f64 = electricity.iter().map(|x: &Vec<f64>| x[t]).sum();
        residual = residual.max((demand - producers * supply[t]).abs());
    }
    let used: f64 = numeraire.iter().sum::<f64>() + producers * (inputs.iter().sum::<f64>() + investment);
    residual = residual.max((used - config.omega()).abs());
    if !(residual <= RESIDUAL_TOL) {
        return Err(MarketError::BenchmarkNotConverged { residual, iterations });
    }

    Ok(CompetitiveBenchmark {
        allocations: AllocationSet {
            electricity,
            numeraire,
            inputs: vec![inputs; config.p()],
            investment: vec![investment; config.p()],
            infeasible: vec![false; config.p()],
        },
        prices,
        supply,
        capacity,
        profit,
        excess_demand_residual: residual,
        iterations,
    })
}

/// The trading-post strategies that implement a competitive allocation at
/// its prices, with the numeraire post priced at one.
///
/// Producers spend only their profit, so with constant returns and slack
/// capacity they bid nothing and the profile is not interior.
pub fn competitive_profile(config: &MarketConfig, bench: &CompetitiveBenchmark) -> StrategyProfile {
    let periods = config.periods;
    let m = config.m();
    let standard = config
        .standard_agents
        .iter()
        .enumerate()
        .map(|(h, a)| StandardStrategy {
            bids: (0..periods).map(|t| bench.prices[t] * bench.allocations.electricity[h][t]).collect(),
            numeraire_bid: bench.allocations.numeraire[h],
            offer: a.endowment,
        })
        .collect();
    let producers = (0..config.p())
        .map(|j| {
            let alloc = &bench.allocations;
            ProducerStrategy {
                bids: (0..periods).map(|t| bench.prices[t] * alloc.electricity[m + j][t]).collect(),
                numeraire_bid: alloc.numeraire[m + j] + alloc.inputs[j].iter().sum::<f64>() + alloc.investment[j],
                offers: bench.supply.clone(),
                capacity: bench.capacity,
            }
        })
        .collect();
    StrategyProfile { standard, producers }
}
