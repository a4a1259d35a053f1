//! Trading-post accounting.
//!
//! Every good trades on its own post: agents submit bytecoin bids and
//! quantity offers, the post price is total bids over total quantity, and each
//! bidder receives the share of the offered quantity given by its share of
//! the bids. Post `t` in `0..periods` is electricity in period `t`; the
//! consumption good (numeraire) has its own post.
//!
//! A post with zero total bids or zero total quantity is dead: nothing trades
//! and bids are returned.

use serde::{Deserialize, Serialize};

use crate::config::{AgentId, Horizon, MarketConfig};
use crate::error::{MarketError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardStrategy {
    /// Bid on each electricity post.
    pub bids: Vec<f64>,
    /// Bid on the numeraire post.
    pub numeraire_bid: f64,
    /// Quantity of the consumption good offered; always the full endowment.
    pub offer: f64,
}

impl StandardStrategy {
    pub fn zero(periods: usize, endowment: f64) -> Self {
        Self {
            bids: vec![0.0; periods],
            numeraire_bid: 0.0,
            offer: endowment,
        }
    }

    pub fn total_bid(&self) -> f64 {
        self.bids.iter().sum::<f64>() + self.numeraire_bid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducerStrategy {
    pub bids: Vec<f64>,
    pub numeraire_bid: f64,
    /// Electricity offered (and produced) in each period.
    pub offers: Vec<f64>,
    /// Chosen capacity; only meaningful in the long run.
    pub capacity: Option<f64>,
}

impl ProducerStrategy {
    pub fn zero(periods: usize, horizon: Horizon) -> Self {
        Self {
            bids: vec![0.0; periods],
            numeraire_bid: 0.0,
            offers: vec![0.0; periods],
            capacity: match horizon {
                Horizon::ShortRun => None,
                Horizon::LongRun => Some(0.0),
            },
        }
    }

    /// Capacity bound on offers under the configured horizon.
    pub fn capacity_limit(&self, config: &MarketConfig) -> f64 {
        match config.horizon {
            Horizon::ShortRun => config.capacity,
            Horizon::LongRun => self.capacity.unwrap_or(0.0),
        }
    }
}

/// Bids and offers of every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub standard: Vec<StandardStrategy>,
    pub producers: Vec<ProducerStrategy>,
}

impl StrategyProfile {
    /// The no-trade profile: all bids and electricity offers zero.
    pub fn zero(config: &MarketConfig) -> Self {
        Self {
            standard: config
                .standard_agents
                .iter()
                .map(|a| StandardStrategy::zero(config.periods, a.endowment))
                .collect(),
            producers: (0..config.p())
                .map(|_| ProducerStrategy::zero(config.periods, config.horizon))
                .collect(),
        }
    }

    pub fn check_dimensions(&self, config: &MarketConfig) -> Result<()> {
        let mismatch = |agent: String, what, expected, found| {
            Err(MarketError::Dimension {
                agent,
                what,
                expected,
                found,
            })
        };
        if self.standard.len() != config.m() {
            return mismatch("profile".into(), "standard strategies", config.m(), self.standard.len());
        }
        if self.producers.len() != config.p() {
            return mismatch("profile".into(), "producer strategies", config.p(), self.producers.len());
        }
        let t = config.periods;
        for (h, s) in self.standard.iter().enumerate() {
            if s.bids.len() != t {
                return mismatch(AgentId::Standard(h).to_string(), "bids", t, s.bids.len());
            }
        }
        for (j, s) in self.producers.iter().enumerate() {
            let name = AgentId::Producer(j).to_string();
            if s.bids.len() != t {
                return mismatch(name, "bids", t, s.bids.len());
            }
            if s.offers.len() != t {
                return mismatch(name, "offers", t, s.offers.len());
            }
        }
        Ok(())
    }

    /// Multiplies every bytecoin bid by `k`; quantities are untouched.
    pub fn scale_bids(&self, k: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.standard {
            s.bids.iter_mut().for_each(|b| *b *= k);
            s.numeraire_bid *= k;
        }
        for s in &mut out.producers {
            s.bids.iter_mut().for_each(|b| *b *= k);
            s.numeraire_bid *= k;
        }
        out
    }

    pub fn numeraire_bid_total(&self) -> f64 {
        self.standard.iter().map(|s| s.numeraire_bid).sum::<f64>()
            + self.producers.iter().map(|s| s.numeraire_bid).sum::<f64>()
    }

    /// True when no agent bids anything on any post.
    pub fn is_no_trade(&self) -> bool {
        self.standard
            .iter()
            .all(|s| s.numeraire_bid == 0.0 && s.bids.iter().all(|&b| b == 0.0))
            && self
                .producers
                .iter()
                .all(|s| s.numeraire_bid == 0.0 && s.bids.iter().all(|&b| b == 0.0))
    }

    /// All strategic variables in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for s in &self.standard {
            v.extend_from_slice(&s.bids);
            v.push(s.numeraire_bid);
        }
        for s in &self.producers {
            v.extend_from_slice(&s.bids);
            v.push(s.numeraire_bid);
            v.extend_from_slice(&s.offers);
            if let Some(k) = s.capacity {
                v.push(k);
            }
        }
        v
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Post totals and their leave-one-out variants.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    /// Total bid on each electricity post.
    pub bids: Vec<f64>,
    /// Total electricity offered in each period.
    pub offers: Vec<f64>,
    /// Total bid on the numeraire post.
    pub numeraire_bids: f64,
    /// Total offer of the consumption good.
    pub omega: f64,
    pub standard_bids_excl: Vec<Vec<f64>>,
    pub producer_bids_excl: Vec<Vec<f64>>,
    pub standard_numeraire_excl: Vec<f64>,
    pub producer_numeraire_excl: Vec<f64>,
    pub offers_excl: Vec<Vec<f64>>,
    pub omega_excl: Vec<f64>,
}

/// Market totals excluding one agent: everything that agent takes as given.
#[derive(Debug, Clone, PartialEq)]
pub struct Opponents {
    pub bids: Vec<f64>,
    pub offers: Vec<f64>,
    pub numeraire_bids: f64,
    /// Total offer of the consumption good, including the agent's own.
    pub omega: f64,
    pub omega_others: f64,
}

impl Opponents {
    pub fn periods(&self) -> usize {
        self.bids.len()
    }

    /// Multiplies all opponent bids by `k`.
    pub fn scale_bids(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.bids.iter_mut().for_each(|b| *b *= k);
        out.numeraire_bids *= k;
        out
    }
}

impl Aggregates {
    pub fn periods(&self) -> usize {
        self.bids.len()
    }

    pub fn opponents(&self, agent: AgentId) -> Opponents {
        match agent {
            AgentId::Standard(h) => Opponents {
                bids: self.standard_bids_excl[h].clone(),
                offers: self.offers.clone(),
                numeraire_bids: self.standard_numeraire_excl[h],
                omega: self.omega,
                omega_others: self.omega_excl[h],
            },
            AgentId::Producer(j) => Opponents {
                bids: self.producer_bids_excl[j].clone(),
                offers: self.offers_excl[j].clone(),
                numeraire_bids: self.producer_numeraire_excl[j],
                omega: self.omega,
                omega_others: self.omega,
            },
        }
    }
}

pub fn compute_aggregates(profile: &StrategyProfile, config: &MarketConfig) -> Result<Aggregates> {
    profile.check_dimensions(config)?;
    let t_count = config.periods;
    let mut bids = vec![0.0; t_count];
    let mut offers = vec![0.0; t_count];
    let mut numeraire_bids = 0.0;
    let mut omega = 0.0;
    for s in &profile.standard {
        for t in 0..t_count {
            bids[t] += s.bids[t];
        }
        numeraire_bids += s.numeraire_bid;
        omega += s.offer;
    }
    for s in &profile.producers {
        for t in 0..t_count {
            bids[t] += s.bids[t];
            offers[t] += s.offers[t];
        }
        numeraire_bids += s.numeraire_bid;
    }
    let excl = |total: &[f64], own: &[f64]| -> Vec<f64> {
        total.iter().zip(own).map(|(a, b)| a - b).collect()
    };
    Ok(Aggregates {
        standard_bids_excl: profile.standard.iter().map(|s| excl(&bids, &s.bids)).collect(),
        producer_bids_excl: profile.producers.iter().map(|s| excl(&bids, &s.bids)).collect(),
        standard_numeraire_excl: profile
            .standard
            .iter()
            .map(|s| numeraire_bids - s.numeraire_bid)
            .collect(),
        producer_numeraire_excl: profile
            .producers
            .iter()
            .map(|s| numeraire_bids - s.numeraire_bid)
            .collect(),
        offers_excl: profile.producers.iter().map(|s| excl(&offers, &s.offers)).collect(),
        omega_excl: profile.standard.iter().map(|s| omega - s.offer).collect(),
        bids,
        offers,
        numeraire_bids,
        omega,
    })
}

/// Post prices in bytecoins per unit. Undefined posts are reported as 0 with
/// the corresponding mask entry false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector {
    pub electricity: Vec<f64>,
    pub numeraire: f64,
    pub electricity_defined: Vec<bool>,
    pub numeraire_defined: bool,
}

impl PriceVector {
    /// Electricity prices in units of the consumption good.
    pub fn relative(&self) -> Vec<f64> {
        if !self.numeraire_defined {
            return vec![0.0; self.electricity.len()];
        }
        self.electricity.iter().map(|p| p / self.numeraire).collect()
    }
}

fn post_price(bid: f64, quantity: f64) -> Option<f64> {
    (bid > 0.0 && quantity > 0.0).then(|| bid / quantity)
}

pub fn prices(agg: &Aggregates) -> PriceVector {
    let el: Vec<Option<f64>> = agg
        .bids
        .iter()
        .zip(&agg.offers)
        .map(|(&b, &q)| post_price(b, q))
        .collect();
    let p0 = post_price(agg.numeraire_bids, agg.omega);
    PriceVector {
        electricity: el.iter().map(|p| p.unwrap_or(0.0)).collect(),
        electricity_defined: el.iter().map(Option::is_some).collect(),
        numeraire: p0.unwrap_or(0.0),
        numeraire_defined: p0.is_some(),
    }
}

/// Share of `quantity` received for `bid` out of `total_bid`.
#[inline]
pub(crate) fn post_share(bid: f64, total_bid: f64, quantity: f64) -> f64 {
    if total_bid > 0.0 && quantity > 0.0 {
        bid / total_bid * quantity
    } else {
        0.0
    }
}

/// Consumption-good input needed to produce `q` units of electricity.
pub fn input_for(q: f64, config: &MarketConfig) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    (q / config.productivity).powf(1.0 / config.returns_exponent)
}

/// Electricity produced from `input` units of the consumption good.
pub fn output_from(input: f64, config: &MarketConfig) -> f64 {
    config.productivity * input.max(0.0).powf(config.returns_exponent)
}

pub fn input_requirement(q: &[f64], config: &MarketConfig) -> Vec<f64> {
    q.iter().map(|&x| input_for(x, config)).collect()
}

/// Realized consumption of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub electricity: Vec<f64>,
    /// Consumption good net of production inputs and investment.
    pub numeraire: f64,
    pub inputs: Vec<f64>,
    pub investment: f64,
}

pub fn standard_outcome(s: &StandardStrategy, opp: &Opponents) -> Outcome {
    let electricity = (0..opp.periods())
        .map(|t| post_share(s.bids[t], opp.bids[t] + s.bids[t], opp.offers[t]))
        .collect();
    let numeraire = post_share(s.numeraire_bid, opp.numeraire_bids + s.numeraire_bid, opp.omega);
    Outcome {
        electricity,
        numeraire,
        inputs: Vec::new(),
        investment: 0.0,
    }
}

pub fn producer_outcome(s: &ProducerStrategy, opp: &Opponents, config: &MarketConfig) -> Outcome {
    let electricity = (0..opp.periods())
        .map(|t| post_share(s.bids[t], opp.bids[t] + s.bids[t], opp.offers[t] + s.offers[t]))
        .collect();
    let inputs = input_requirement(&s.offers, config);
    let investment = investment_for(s, config);
    let gross = post_share(s.numeraire_bid, opp.numeraire_bids + s.numeraire_bid, opp.omega);
    Outcome {
        electricity,
        numeraire: gross - inputs.iter().sum::<f64>() - investment,
        inputs,
        investment,
    }
}

fn investment_for(s: &ProducerStrategy, config: &MarketConfig) -> f64 {
    match config.horizon {
        Horizon::ShortRun => 0.0,
        Horizon::LongRun => config.investment_cost * s.capacity.unwrap_or(0.0),
    }
}

/// Utility of an outcome; `-inf` when a valued good is not consumed or a
/// producer's net consumption is negative.
pub fn payoff(agent: AgentId, outcome: &Outcome, config: &MarketConfig) -> f64 {
    if outcome.numeraire < 0.0 {
        return f64::NEG_INFINITY;
    }
    config
        .utility(agent)
        .value(&outcome.electricity, outcome.numeraire)
}

/// Realized allocations for every agent, indexed standard agents first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSet {
    /// `electricity[i][t]` for agent `i` in standard-then-producer order.
    pub electricity: Vec<Vec<f64>>,
    /// Consumption good, net of production inputs for producers.
    pub numeraire: Vec<f64>,
    /// `inputs[j][t]`: consumption good used by producer `j` in period `t`.
    pub inputs: Vec<Vec<f64>>,
    /// Consumption good spent on long-run capacity by each producer.
    pub investment: Vec<f64>,
    /// Producers whose net consumption is negative.
    pub infeasible: Vec<bool>,
}

impl AllocationSet {
    pub fn electricity_total(&self, i: usize) -> f64 {
        self.electricity[i].iter().sum()
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        let el = self
            .electricity
            .iter()
            .flatten()
            .zip(other.electricity.iter().flatten())
            .map(|(a, b)| (a - b).abs());
        let nu = self
            .numeraire
            .iter()
            .zip(&other.numeraire)
            .map(|(a, b)| (a - b).abs());
        el.chain(nu).fold(0.0, f64::max)
    }
}

pub fn allocate(profile: &StrategyProfile, agg: &Aggregates, config: &MarketConfig) -> AllocationSet {
    let t_count = config.periods;
    let mut electricity = Vec::with_capacity(config.agent_count());
    let mut numeraire = Vec::with_capacity(config.agent_count());
    for s in &profile.standard {
        electricity.push(
            (0..t_count)
                .map(|t| post_share(s.bids[t], agg.bids[t], agg.offers[t]))
                .collect(),
        );
        numeraire.push(post_share(s.numeraire_bid, agg.numeraire_bids, agg.omega));
    }
    let mut inputs = Vec::with_capacity(config.p());
    let mut investment = Vec::with_capacity(config.p());
    let mut infeasible = Vec::with_capacity(config.p());
    for s in &profile.producers {
        electricity.push(
            (0..t_count)
                .map(|t| post_share(s.bids[t], agg.bids[t], agg.offers[t]))
                .collect(),
        );
        let phi = input_requirement(&s.offers, config);
        let inv = investment_for(s, config);
        let x0 = post_share(s.numeraire_bid, agg.numeraire_bids, agg.omega)
            - phi.iter().sum::<f64>()
            - inv;
        numeraire.push(x0);
        infeasible.push(x0 < 0.0);
        inputs.push(phi);
        investment.push(inv);
    }
    AllocationSet {
        electricity,
        numeraire,
        inputs,
        investment,
        infeasible,
    }
}

/// Budget slack in both the original form (own bids on both sides) and the
/// simplified form (own bids collected on the left). Nonnegative is feasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSlack {
    pub simplified: f64,
    pub original: f64,
}

impl BudgetSlack {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.simplified >= -tol
    }
}

pub fn check_budget_standard(h: usize, s: &StandardStrategy, agg: &Aggregates) -> Result<BudgetSlack> {
    if !(agg.omega > 0.0) {
        return Err(MarketError::DegenerateEconomy);
    }
    let electricity: f64 = s.bids.iter().sum();
    let others_bid = agg.standard_numeraire_excl[h];
    let others_offer = agg.omega_excl[h];
    let simplified = others_bid / agg.omega * s.offer
        - electricity
        - others_offer / agg.omega * s.numeraire_bid;
    let original = agg.numeraire_bids / agg.omega * s.offer - electricity - s.numeraire_bid;
    Ok(BudgetSlack {
        simplified,
        original,
    })
}

pub fn check_budget_producer(j: usize, s: &ProducerStrategy, agg: &Aggregates) -> BudgetSlack {
    let mut simplified = -s.numeraire_bid;
    let mut original = -s.numeraire_bid;
    for t in 0..agg.periods() {
        let q_total = agg.offers[t];
        if q_total <= 0.0 {
            continue;
        }
        let others_bid = agg.producer_bids_excl[j][t];
        let others_offer = agg.offers_excl[j][t];
        simplified += others_bid / q_total * s.offers[t] - others_offer / q_total * s.bids[t];
        original += agg.bids[t] / q_total * s.offers[t] - s.bids[t];
    }
    BudgetSlack {
        simplified,
        original,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductionConstraint {
    NonnegativeOffer(usize),
    Capacity(usize),
    NonnegativeCapacity,
    Input,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: ProductionConstraint,
    /// Signed margin; negative by the amount the constraint is exceeded.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub capacity: f64,
    /// Input plus investment needed for the offered electricity.
    pub required_input: f64,
    pub available_input: f64,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks an offer vector against the production set given `available_input`
/// units of the consumption good.
pub fn check_production_feasible(
    s: &ProducerStrategy,
    config: &MarketConfig,
    available_input: f64,
) -> FeasibilityReport {
    let capacity = s.capacity_limit(config);
    let mut violations = Vec::new();
    if capacity < 0.0 {
        violations.push(Violation {
            constraint: ProductionConstraint::NonnegativeCapacity,
            margin: capacity,
        });
    }
    for (t, &q) in s.offers.iter().enumerate() {
        if q < 0.0 {
            violations.push(Violation {
                constraint: ProductionConstraint::NonnegativeOffer(t),
                margin: q,
            });
        }
        if q > capacity {
            violations.push(Violation {
                constraint: ProductionConstraint::Capacity(t),
                margin: capacity - q,
            });
        }
    }
    let required_input = input_requirement(&s.offers, config).iter().sum::<f64>() + investment_for(s, config);
    if required_input > available_input {
        violations.push(Violation {
            constraint: ProductionConstraint::Input,
            margin: available_input - required_input,
        });
    }
    FeasibilityReport {
        capacity,
        required_input,
        available_input,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingResiduals {
    pub electricity: Vec<f64>,
    pub numeraire: f64,
}

impl ClearingResiduals {
    pub fn max_abs(&self) -> f64 {
        self.electricity
            .iter()
            .map(|r| r.abs())
            .fold(self.numeraire.abs(), f64::max)
    }
}

/// Allocated minus offered quantity on every post; dead posts report 0.
pub fn market_clearing_residuals(alloc: &AllocationSet, agg: &Aggregates) -> ClearingResiduals {
    let electricity = (0..agg.periods())
        .map(|t| {
            if agg.bids[t] > 0.0 && agg.offers[t] > 0.0 {
                alloc.electricity.iter().map(|x| x[t]).sum::<f64>() - agg.offers[t]
            } else {
                0.0
            }
        })
        .collect();
    let numeraire = if agg.numeraire_bids > 0.0 && agg.omega > 0.0 {
        let used: f64 = alloc.numeraire.iter().sum::<f64>()
            + alloc.inputs.iter().flatten().sum::<f64>()
            + alloc.investment.iter().sum::<f64>();
        used - agg.omega
    } else {
        0.0
    };
    ClearingResiduals {
        electricity,
        numeraire,
    }
}
