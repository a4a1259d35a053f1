//! Analytic partial derivatives of trading-post allocations and payoffs with
//! respect to an agent's own strategic variables.

use crate::config::{Horizon, MarketConfig};
use crate::market::{input_for, Opponents, ProducerStrategy, StandardStrategy};

/// `d/d bid` of `bid * quantity / (others_bid + bid)`.
pub fn share_wrt_bid(others_bid: f64, bid: f64, quantity: f64) -> f64 {
    let total = others_bid + bid;
    others_bid * quantity / (total * total)
}

/// `d/d q` of `bid * (others_offer + q) / total_bid`: the bidder's share of
/// the extra quantity.
pub fn share_wrt_offer(bid: f64, total_bid: f64) -> f64 {
    bid / total_bid
}

/// Marginal input `d input / d q = (1 / (c theta)) (q / theta)^((1 - c) / c)`.
///
/// At `q = 0` this is `0` for `c < 1`, `1 / theta` for `c = 1`, and infinite
/// for `c > 1`.
pub fn marginal_input(q: f64, config: &MarketConfig) -> f64 {
    let c = config.returns_exponent;
    let theta = config.productivity;
    let q = q.max(0.0);
    if q == 0.0 && c > 1.0 {
        return f64::INFINITY;
    }
    (q / theta).powf((1.0 - c) / c) / (c * theta)
}

/// The same derivative obtained from the input level, `input / (c q)`.
/// Defined for `q > 0` only; falls back to the closed form at zero.
pub fn marginal_input_from_level(q: f64, config: &MarketConfig) -> f64 {
    if q <= 0.0 {
        return marginal_input(q, config);
    }
    input_for(q, config) / (config.returns_exponent * q)
}

/// `d/dq` of the revenue share `others_bid * q / (others_offer + q)`.
pub fn revenue_wrt_offer(others_bid: f64, others_offer: f64, q: f64) -> f64 {
    let total = others_offer + q;
    others_bid * others_offer / (total * total)
}

/// Gradient of a standard agent's payoff over `(bids..., numeraire_bid)`.
pub fn standard_payoff_gradient(
    s: &StandardStrategy,
    opp: &Opponents,
    config: &MarketConfig,
    h: usize,
) -> Vec<f64> {
    let u = &config.standard_agents[h].utility;
    let mut g = Vec::with_capacity(s.bids.len() + 1);
    for t in 0..s.bids.len() {
        let x = s.bids[t] * opp.offers[t] / (opp.bids[t] + s.bids[t]);
        g.push(u.marginal_electricity(t, x) * share_wrt_bid(opp.bids[t], s.bids[t], opp.offers[t]));
    }
    let x0 = s.numeraire_bid * opp.omega / (opp.numeraire_bids + s.numeraire_bid);
    g.push(u.marginal_numeraire(x0) * share_wrt_bid(opp.numeraire_bids, s.numeraire_bid, opp.omega));
    g
}

/// Gradient of a producer's payoff over
/// `(bids..., numeraire_bid, offers..., [capacity])`, capacity only in the
/// long run.
pub fn producer_payoff_gradient(
    s: &ProducerStrategy,
    opp: &Opponents,
    config: &MarketConfig,
    j: usize,
) -> Vec<f64> {
    let u = &config.producers[j].utility;
    let periods = s.bids.len();
    let mut x = Vec::with_capacity(periods);
    for t in 0..periods {
        let q_total = opp.offers[t] + s.offers[t];
        x.push(s.bids[t] * q_total / (opp.bids[t] + s.bids[t]));
    }
    let inputs: f64 = s.offers.iter().map(|&q| input_for(q, config)).sum();
    let investment = match config.horizon {
        Horizon::ShortRun => 0.0,
        Horizon::LongRun => config.investment_cost * s.capacity.unwrap_or(0.0),
    };
    let b0_total = opp.numeraire_bids + s.numeraire_bid;
    let x0 = s.numeraire_bid * opp.omega / b0_total - inputs - investment;
    let u0 = u.marginal_numeraire(x0);

    let mut g = Vec::with_capacity(2 * periods + 2);
    for t in 0..periods {
        let q_total = opp.offers[t] + s.offers[t];
        g.push(u.marginal_electricity(t, x[t]) * share_wrt_bid(opp.bids[t], s.bids[t], q_total));
    }
    g.push(u0 * share_wrt_bid(opp.numeraire_bids, s.numeraire_bid, opp.omega));
    for t in 0..periods {
        let b_total = opp.bids[t] + s.bids[t];
        g.push(
            u.marginal_electricity(t, x[t]) * share_wrt_offer(s.bids[t], b_total)
                - u0 * marginal_input(s.offers[t], config),
        );
    }
    if config.horizon == Horizon::LongRun {
        g.push(-u0 * config.investment_cost);
    }
    g
}

/// Gradient of the producer's simplified budget slack
/// `sum_t (B_-j q - Q_-j b) / Q - b0` over `(bids..., numeraire_bid, offers...)`.
pub fn producer_budget_gradient(s: &ProducerStrategy, opp: &Opponents) -> Vec<f64> {
    let periods = s.bids.len();
    let mut g = Vec::with_capacity(2 * periods + 1);
    for t in 0..periods {
        g.push(-opp.offers[t] / (opp.offers[t] + s.offers[t]));
    }
    g.push(-1.0);
    for t in 0..periods {
        let q_total = opp.offers[t] + s.offers[t];
        // d/dq of (B_-j q - Q_-j b) / (Q_-j + q)
        g.push(revenue_wrt_offer(opp.bids[t], opp.offers[t], s.offers[t])
            + s.bids[t] * opp.offers[t] / (q_total * q_total));
    }
    g
}
