//! Best responses of individual agents and first-order-condition residuals.
//!
//! Each agent maximizes its log utility over its own bids (and, for
//! producers, offers) holding every other agent's strategy fixed. For a fixed
//! budget multiplier the bid problem separates across posts and each bid has
//! a closed form, so the bid side is solved exactly by bisection on the
//! multiplier. Producer offers are then chosen by projected-gradient ascent on
//! the resulting value function.

pub mod derivatives;
mod foc;
mod oracle;
mod producer;
mod standard;

use serde::Serialize;

pub use foc::{foc_residual_producer, foc_residual_standard, producer_foc, standard_foc};
pub use oracle::{oracle_best_response, ORACLE_MAX_DIMENSION};
pub use producer::{producer_best_response, producer_value};
pub use standard::standard_best_response;

use crate::market::{ProducerStrategy, StandardStrategy};

/// Which first-order condition a residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "period", rename_all = "snake_case")]
pub enum Condition {
    /// Stationarity in the bid on electricity post `t`.
    ElectricityBid(usize),
    /// Stationarity in the numeraire-post bid.
    NumeraireBid,
    /// Stationarity in the electricity offer of period `t`.
    Offer(usize),
    /// `mu . (K - q) = 0`.
    CapacitySlackness,
    /// Long-run capacity choice: `sum_t mu^t = rho * u_0`.
    Investment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocResidual {
    pub condition: Condition,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocReport {
    /// Budget multiplier, fitted by least squares across stationarity rows.
    pub lambda: f64,
    /// Capacity multipliers (producers only).
    pub mu: Vec<f64>,
    pub residuals: Vec<FocResidual>,
    pub complementary_slackness: f64,
    /// Largest gap between the offer condition written with the marginal
    /// input obtained from the input level and with its closed form.
    pub derivation_gap: f64,
    /// Largest relative gap between analytic marginal utilities and central
    /// finite differences of the utility function.
    pub marginal_utility_check: f64,
    pub max_residual: f64,
    /// A valued good has zero consumption; stationarity is not evaluated.
    pub barrier: bool,
    /// An offer sits at zero where the marginal input is infinite.
    pub boundary: bool,
}

impl FocReport {
    pub(crate) fn barrier(mu_len: usize) -> Self {
        Self {
            lambda: 0.0,
            mu: vec![0.0; mu_len],
            residuals: Vec::new(),
            complementary_slackness: 0.0,
            derivation_gap: 0.0,
            marginal_utility_check: 0.0,
            max_residual: 0.0,
            barrier: true,
            boundary: false,
        }
    }

    pub fn residual(&self, condition: Condition) -> Option<f64> {
        self.residuals
            .iter()
            .find(|r| r.condition == condition)
            .map(|r| r.residual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentStrategy {
    Standard(StandardStrategy),
    Producer(ProducerStrategy),
}

impl AgentStrategy {
    pub fn as_standard(&self) -> Option<&StandardStrategy> {
        match self {
            AgentStrategy::Standard(s) => Some(s),
            AgentStrategy::Producer(_) => None,
        }
    }

    pub fn as_producer(&self) -> Option<&ProducerStrategy> {
        match self {
            AgentStrategy::Producer(s) => Some(s),
            AgentStrategy::Standard(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Optimal,
    /// Zero endowment: the zero strategy is the only feasible point.
    ZeroBudget,
    /// Opponents leave a valued post empty; nothing can be bought.
    NoMarket,
    /// No offer yields enough revenue to cover production inputs.
    NoRevenue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Multiplier bracket collapsed to machine precision.
    BracketCollapsed,
    ProjectedGradient,
    StepStalled,
    MaxIterations,
    GridRefined,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverTrace {
    pub iterations: usize,
    pub final_step: f64,
    pub projected_gradient: f64,
    pub starts: usize,
    pub termination: Termination,
}

impl SolverTrace {
    pub(crate) fn trivial() -> Self {
        Self {
            iterations: 0,
            final_step: 0.0,
            projected_gradient: 0.0,
            starts: 0,
            termination: Termination::Trivial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponseResult {
    pub strategy: AgentStrategy,
    pub payoff: f64,
    /// Simplified-form budget slack at the returned strategy.
    pub budget_slack: f64,
    pub foc: FocReport,
    pub status: ResponseStatus,
    pub trace: SolverTrace,
}

/// Controls for the producer offer search.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseOptions {
    /// Target sup-norm of the projected gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for the extra starts used under increasing returns.
    pub seed: u64,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
            seed: 0,
        }
    }
}

impl ResponseOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Bid on a post with opponents' bids `others_bid` that equates marginal
/// utility `weight / x` times the allocation derivative with `lambda * cost`.
///
/// Positive root of `lambda cost b^2 + lambda cost A b - weight A = 0`,
/// written to avoid cancellation.
pub(crate) fn bid_for_multiplier(weight: f64, others_bid: f64, cost: f64, lambda: f64) -> f64 {
    if weight <= 0.0 {
        return 0.0;
    }
    let k = weight / (lambda * cost);
    2.0 * k / (1.0 + (1.0 + 4.0 * k / others_bid).sqrt())
}

/// Finds the multiplier at which a decreasing spending schedule meets
/// `income`. Returns the upper end of the final bracket, where spending does
/// not exceed income, and the number of bisection steps.
pub(crate) fn solve_multiplier(income: f64, spend: impl Fn(f64) -> f64) -> (f64, usize) {
    let mut lo = 1.0;
    let mut hi = 1.0;
    if spend(1.0) > income {
        while spend(hi) > income {
            lo = hi;
            hi *= 4.0;
            if hi > 1e300 {
                break;
            }
        }
    } else {
        while spend(lo) <= income {
            hi = lo;
            lo *= 0.25;
            if lo < 1e-300 {
                return (hi, 0);
            }
        }
    }
    let mut steps = 0;
    while steps < 200 && hi > lo * (1.0 + 4.0 * f64::EPSILON) {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if spend(mid) > income {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    (hi, steps)
}
