//! Nash equilibria by damped iterated best response.
//!
//! Bids are denominated in an abstract unit of account, so any equilibrium
//! rescaled in all bids is again an equilibrium. Profiles are renormalized
//! after every sweep so the numeraire post carries `money_supply` bytecoins.

mod competitive;
mod experiment;

pub use competitive::{competitive_benchmark, competitive_profile, CompetitiveBenchmark};
pub use experiment::{convergence_experiment, ReplicationRow, ReplicationTable};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::best_response::{
    producer_best_response, producer_foc, standard_best_response, standard_foc, AgentStrategy,
    BestResponseResult, FocReport, ResponseOptions,
};
use crate::config::{AgentId, MarketConfig};
use crate::error::{MarketError, Result};
use crate::market::{
    allocate, compute_aggregates, input_for, market_clearing_residuals, payoff, prices,
    producer_outcome, standard_outcome, AllocationSet, ClearingResiduals, PriceVector,
    ProducerStrategy, StandardStrategy, StrategyProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Agents respond in turn, each seeing the updates made before it.
    GaussSeidel,
    /// All agents respond to the previous sweep's profile.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Weight on the new best response in `(1 - d) old + d new`.
    pub damping: f64,
    /// Sup-norm strategy change at which iteration stops.
    pub tol: f64,
    /// Bound on every first-order-condition residual at convergence.
    pub foc_tol: f64,
    pub max_iter: usize,
    pub mode: UpdateMode,
    pub seed: u64,
    /// Projected-gradient tolerance inside producer best responses.
    pub response_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-8,
            foc_tol: 1e-6,
            max_iter: 5000,
            mode: UpdateMode::GaussSeidel,
            seed: 0,
            response_tol: 1e-11,
        }
    }
}

/// Halvings of the damping allowed after detecting a two-cycle.
const MAX_DAMPING_HALVINGS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub profile: StrategyProfile,
    pub prices: PriceVector,
    pub allocations: AllocationSet,
    /// One report per agent, standard agents first.
    pub foc_reports: Vec<FocReport>,
    pub payoffs: Vec<f64>,
    pub iterations: usize,
    pub max_strategy_change: f64,
    pub converged: bool,
    /// The no-trade profile was returned.
    pub trivial: bool,
    pub oscillation_detected: bool,
    /// Damping in effect at termination.
    pub damping: f64,
    pub clearing: ClearingResiduals,
    /// Sup-norm strategy change of every sweep.
    pub trace: Vec<f64>,
}

impl EquilibriumResult {
    pub fn max_foc_residual(&self) -> f64 {
        self.foc_reports.iter().map(|r| r.max_residual).fold(0.0, f64::max)
    }
}

/// Rescaled profile and the factor applied; `None` when the numeraire post
/// is empty and nothing could be normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub profile: StrategyProfile,
    pub factor: Option<f64>,
}

/// Scales every bid so the numeraire post carries exactly `money_supply`.
pub fn normalize_nominal(profile: &StrategyProfile, money_supply: f64) -> Normalized {
    let b0 = profile.numeraire_bid_total();
    if !(b0 > 0.0) {
        return Normalized {
            profile: profile.clone(),
            factor: None,
        };
    }
    let k = money_supply / b0;
    Normalized {
        profile: if k == 1.0 { profile.clone() } else { profile.scale_bids(k) },
        factor: Some(k),
    }
}

/// `n` copies of every agent, in copy-major order.
pub fn replicate_economy(config: &MarketConfig, n: usize) -> MarketConfig {
    assert!(n >= 1, "replication factor must be at least 1");
    let mut out = config.clone();
    out.standard_agents = (0..n).flat_map(|_| config.standard_agents.iter().cloned()).collect();
    out.producers = (0..n).flat_map(|_| config.producers.iter().cloned()).collect();
    out
}

/// Strictly interior starting profile: standard agents spend their
/// endowment value by utility shares, producers offer enough to use half of
/// that electricity spending as input and spend the margin by shares.
pub fn default_profile(config: &MarketConfig) -> StrategyProfile {
    let periods = config.periods;
    let p = config.p().max(1) as f64;
    let standard: Vec<StandardStrategy> = config
        .standard_agents
        .iter()
        .map(|a| {
            let total = a.utility.total_weight();
            StandardStrategy {
                bids: a.utility.electricity.iter().map(|w| w / total * a.endowment).collect(),
                numeraire_bid: a.utility.numeraire / total * a.endowment,
                offer: a.endowment,
            }
        })
        .collect();
    let spending: Vec<f64> = (0..periods)
        .map(|t| standard.iter().map(|s| s.bids[t]).sum::<f64>())
        .collect();
    let mut offers: Vec<f64> = spending
        .iter()
        .map(|e| crate::market::output_from(0.5 * e / p, config).min(0.5 * config.capacity))
        .collect();
    // Inputs must stay well inside the supply of the consumption good.
    let omega = config.omega();
    let mut inputs: f64 = offers.iter().map(|&q| input_for(q, config)).sum();
    if inputs > 0.25 * omega / p {
        let k = 0.25 * omega / p / inputs;
        offers = offers
            .iter()
            .map(|&q| crate::market::output_from(k * input_for(q, config), config))
            .collect();
        inputs = offers.iter().map(|&q| input_for(q, config)).sum();
    }
    let capacity = match config.horizon {
        crate::Horizon::ShortRun => None,
        crate::Horizon::LongRun => Some(offers.iter().copied().fold(0.0, f64::max)),
    };
    let inputs = inputs + capacity.map_or(0.0, |k| config.investment_cost * k);
    let revenue = spending.iter().sum::<f64>() / p;
    let margin = (revenue - inputs).max(0.1 * revenue);
    let standard_numeraire: f64 = standard.iter().map(|s| s.numeraire_bid).sum();
    // Smallest numeraire bid whose proceeds cover twice the inputs.
    let covering = 2.0 * inputs * standard_numeraire / (omega - p * inputs);
    let producers = config
        .producers
        .iter()
        .map(|a| {
            let total = a.utility.total_weight();
            ProducerStrategy {
                bids: a.utility.electricity.iter().map(|w| w / total * margin).collect(),
                numeraire_bid: (inputs + a.utility.numeraire / total * margin).max(covering),
                offers: offers.clone(),
                capacity,
            }
        })
        .collect();
    StrategyProfile { standard, producers }
}

fn best_response(
    agent: AgentId,
    profile: &StrategyProfile,
    config: &MarketConfig,
    response: &ResponseOptions,
) -> Result<BestResponseResult> {
    let agg = compute_aggregates(profile, config)?;
    let opp = agg.opponents(agent);
    match agent {
        AgentId::Standard(h) => standard_best_response(h, &opp, config),
        AgentId::Producer(j) => {
            producer_best_response(j, &opp, config, response, Some(&profile.producers[j]))
        }
    }
}

fn mix(a: &[f64], b: &[f64], d: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - d) * x + d * y).collect()
}

fn apply(profile: &mut StrategyProfile, agent: AgentId, response: &AgentStrategy, d: f64) {
    match (agent, response) {
        (AgentId::Standard(h), AgentStrategy::Standard(new)) => {
            let old = &mut profile.standard[h];
            old.bids = mix(&old.bids, &new.bids, d);
            old.numeraire_bid = (1.0 - d) * old.numeraire_bid + d * new.numeraire_bid;
        }
        (AgentId::Producer(j), AgentStrategy::Producer(new)) => {
            let old = &mut profile.producers[j];
            old.bids = mix(&old.bids, &new.bids, d);
            old.numeraire_bid = (1.0 - d) * old.numeraire_bid + d * new.numeraire_bid;
            old.offers = mix(&old.offers, &new.offers, d);
            old.capacity = match (old.capacity, new.capacity) {
                (Some(a), Some(b)) => Some((1.0 - d) * a + d * b),
                (_, b) => b,
            };
        }
        _ => unreachable!("response kind matches agent kind"),
    }
}

/// First-order-condition reports of every agent at `profile`.
pub fn foc_reports(profile: &StrategyProfile, config: &MarketConfig) -> Result<Vec<FocReport>> {
    let agg = compute_aggregates(profile, config)?;
    Ok(config
        .agents()
        .map(|agent| {
            let opp = agg.opponents(agent);
            match agent {
                AgentId::Standard(h) => standard_foc(h, &profile.standard[h], &opp, config),
                AgentId::Producer(j) => producer_foc(j, &profile.producers[j], &opp, config),
            }
        })
        .collect())
}

/// Utility of every agent at `profile`, standard agents first.
pub fn payoffs(profile: &StrategyProfile, config: &MarketConfig) -> Result<Vec<f64>> {
    let agg = compute_aggregates(profile, config)?;
    Ok(config
        .agents()
        .map(|agent| {
            let opp = agg.opponents(agent);
            let outcome = match agent {
                AgentId::Standard(h) => standard_outcome(&profile.standard[h], &opp),
                AgentId::Producer(j) => producer_outcome(&profile.producers[j], &opp, config),
            };
            payoff(agent, &outcome, config)
        })
        .collect())
}

fn assemble(
    profile: StrategyProfile,
    config: &MarketConfig,
    iterations: usize,
    trace: Vec<f64>,
    converged: bool,
    trivial: bool,
    oscillation_detected: bool,
    damping: f64,
) -> Result<EquilibriumResult> {
    let agg = compute_aggregates(&profile, config)?;
    let allocations = allocate(&profile, &agg, config);
    let clearing = market_clearing_residuals(&allocations, &agg);
    let reports = if trivial {
        config
            .agents()
            .map(|a| FocReport::barrier(if matches!(a, AgentId::Producer(_)) { config.periods } else { 0 }))
            .collect()
    } else {
        foc_reports(&profile, config)?
    };
    Ok(EquilibriumResult {
        prices: prices(&agg),
        payoffs: payoffs(&profile, config)?,
        foc_reports: reports,
        allocations,
        clearing,
        iterations,
        max_strategy_change: trace.last().copied().unwrap_or(0.0),
        converged,
        trivial,
        oscillation_detected,
        damping,
        trace,
        profile,
    })
}

/// Damped iterated best response from `init` (or [`default_profile`]).
///
/// Each sweep replaces every agent's strategy by
/// `(1 - damping) old + damping best_response`, standard agents first, then
/// renormalizes bids. Stops when the sup-norm change is at most `tol` and
/// every first-order-condition residual is at most `foc_tol`. A detected
/// two-cycle halves the damping, at most four times.
///
/// The no-trade profile is itself a fixed point; starting from it returns
/// that trivial equilibrium with `trivial` set.
pub fn solve_nash(
    config: &MarketConfig,
    init: Option<&StrategyProfile>,
    opts: &SolveOptions,
) -> Result<EquilibriumResult> {
    config.validate()?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(MarketError::InvalidDamping(opts.damping));
    }
    let start = match init {
        Some(p) => {
            p.check_dimensions(config)?;
            p.clone()
        }
        None => default_profile(config),
    };
    if start.is_no_trade() {
        return assemble(start, config, 0, Vec::new(), true, true, false, opts.damping);
    }
    for (agent, u) in config.agents().zip(payoffs(&start, config)?) {
        if !u.is_finite() {
            return Err(MarketError::NonInteriorInit { agent });
        }
    }

    let response = ResponseOptions {
        tol: opts.response_tol,
        max_iter: 2000,
        seed: opts.seed,
    };
    let mut profile = normalize_nominal(&start, config.money_supply).profile;
    let mut damping = opts.damping;
    let mut halvings = 0;
    let mut oscillation_detected = false;
    let mut history: Vec<StrategyProfile> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let agents: Vec<AgentId> = config.agents().collect();

    for _ in 0..opts.max_iter {
        let previous = profile.clone();
        match opts.mode {
            UpdateMode::GaussSeidel => {
                for &agent in &agents {
                    let br = best_response(agent, &profile, config, &response)?;
                    apply(&mut profile, agent, &br.strategy, damping);
                }
            }
            UpdateMode::Jacobi => {
                let responses: Vec<BestResponseResult> = agents
                    .par_iter()
                    .map(|&agent| best_response(agent, &previous, config, &response))
                    .collect::<Result<_>>()?;
                for (&agent, br) in agents.iter().zip(&responses) {
                    apply(&mut profile, agent, &br.strategy, damping);
                }
            }
        }
        profile = normalize_nominal(&profile, config.money_supply).profile;
        let change = profile.sup_distance(&previous);
        trace.push(change);

        if change <= opts.tol {
            let reports = foc_reports(&profile, config)?;
            if reports.iter().all(|r| !r.barrier && r.max_residual <= opts.foc_tol) {
                converged = true;
                break;
            }
        }

        if let Some(two_back) = history.first() {
            let back = profile.sup_distance(two_back);
            if change > 10.0 * opts.tol && back < 0.05 * change {
                oscillation_detected = true;
                if halvings == MAX_DAMPING_HALVINGS {
                    break;
                }
                halvings += 1;
                damping *= 0.5;
            }
        }
        history.push(previous);
        if history.len() > 1 {
            history.remove(0);
        }
    }
    let iterations = trace.len();
    assemble(profile, config, iterations, trace, converged, false, oscillation_detected, damping)
}
