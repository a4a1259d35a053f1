//! First-order-condition residuals for both agent kinds.
//!
//! Each stationarity row has the form `a - lambda * w`, where `a` is marginal
//! utility times the allocation derivative and `w` the budget weight of the
//! variable. `lambda` is fitted by least squares over the rows whose
//! variable is interior; rows at a bound report the projected residual.

use crate::config::{AgentId, Horizon, LogUtility, MarketConfig};
use crate::market::{input_for, Aggregates, Opponents, ProducerStrategy, StandardStrategy};

use super::derivatives::{marginal_input, marginal_input_from_level};
use super::{Condition, FocReport, FocResidual};

#[derive(Clone, Copy)]
struct Row {
    condition: Condition,
    marginal: f64,
    weight: f64,
    interior: bool,
}

fn fit_lambda(rows: &[Row]) -> f64 {
    let (num, den) = rows
        .iter()
        .filter(|r| r.interior)
        .fold((0.0, 0.0), |(n, d), r| (n + r.marginal * r.weight, d + r.weight * r.weight));
    if den > 0.0 {
        (num / den).max(0.0)
    } else {
        0.0
    }
}

fn row_residual(r: &Row, lambda: f64) -> f64 {
    let g = r.marginal - lambda * r.weight;
    if r.interior {
        g.abs()
    } else {
        g.max(0.0)
    }
}

fn marginal_or_zero(weight: f64, x: f64) -> f64 {
    if weight > 0.0 {
        weight / x
    } else {
        0.0
    }
}

/// Relative gap between `weight / x` and a central difference of the utility.
fn check_marginals(utility: &LogUtility, electricity: &[f64], numeraire: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = |analytic: f64, bump: &dyn Fn(f64) -> f64, x: f64| {
        let h = 1e-5 * x;
        let fd = (bump(h) - bump(-h)) / (2.0 * h);
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE));
    };
    for t in 0..electricity.len() {
        let x = electricity[t];
        if utility.electricity[t] <= 0.0 || x <= 0.0 {
            continue;
        }
        let bump = |d: f64| {
            let mut e = electricity.to_vec();
            e[t] += d;
            utility.value(&e, numeraire)
        };
        probe(utility.marginal_electricity(t, x), &bump, x);
    }
    if utility.numeraire > 0.0 && numeraire > 0.0 {
        let bump = |d: f64| utility.value(electricity, numeraire + d);
        probe(utility.marginal_numeraire(numeraire), &bump, numeraire);
    }
    worst
}

fn finish(
    rows: &[Row],
    lambda: f64,
    extra: Vec<FocResidual>,
    mu: Vec<f64>,
    complementary_slackness: f64,
    derivation_gap: f64,
    marginal_utility_check: f64,
    boundary: bool,
) -> FocReport {
    let mut residuals: Vec<FocResidual> = rows
        .iter()
        .map(|r| FocResidual {
            condition: r.condition,
            residual: row_residual(r, lambda),
        })
        .collect();
    residuals.extend(extra);
    let max_residual = residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    FocReport {
        lambda,
        mu,
        residuals,
        complementary_slackness,
        derivation_gap,
        marginal_utility_check,
        max_residual,
        barrier: false,
        boundary,
    }
}

/// Stationarity of a standard agent's bids against opponents' totals.
pub fn standard_foc(h: usize, s: &StandardStrategy, opp: &Opponents, config: &MarketConfig) -> FocReport {
    let utility = &config.standard_agents[h].utility;
    let periods = config.periods;
    let mut rows = Vec::with_capacity(periods + 1);
    let mut electricity = Vec::with_capacity(periods);

    for t in 0..periods {
        let (a, q, b) = (opp.bids[t], opp.offers[t], s.bids[t]);
        let total = a + b;
        let x = if total > 0.0 && q > 0.0 { b * q / total } else { 0.0 };
        let w = utility.electricity[t];
        if w > 0.0 && x <= 0.0 {
            return FocReport::barrier(0);
        }
        electricity.push(x);
        rows.push(Row {
            condition: Condition::ElectricityBid(t),
            marginal: if total > 0.0 { marginal_or_zero(w, x) * a * q / (total * total) } else { 0.0 },
            weight: 1.0,
            interior: b > 0.0,
        });
    }

    let (a, b) = (opp.numeraire_bids, s.numeraire_bid);
    let total = a + b;
    let x0 = if total > 0.0 { b * opp.omega / total } else { 0.0 };
    if utility.numeraire > 0.0 && x0 <= 0.0 {
        return FocReport::barrier(0);
    }
    rows.push(Row {
        condition: Condition::NumeraireBid,
        marginal: if total > 0.0 {
            marginal_or_zero(utility.numeraire, x0) * a * opp.omega / (total * total)
        } else {
            0.0
        },
        weight: opp.omega_others / opp.omega,
        interior: b > 0.0,
    });

    let lambda = fit_lambda(&rows);
    let check = check_marginals(utility, &electricity, x0);
    finish(&rows, lambda, Vec::new(), Vec::new(), 0.0, 0.0, check, false)
}

/// Stationarity of a producer's bids and offers, capacity complementary
/// slackness and, in the long run, the capacity choice.
pub fn producer_foc(j: usize, s: &ProducerStrategy, opp: &Opponents, config: &MarketConfig) -> FocReport {
    let utility = &config.producers[j].utility;
    let periods = config.periods;
    let capacity = s.capacity_limit(config);
    let at_capacity_tol = 1e-9 * capacity.max(1.0);

    let mut electricity = Vec::with_capacity(periods);
    let mut totals = Vec::with_capacity(periods);
    for t in 0..periods {
        let b_total = opp.bids[t] + s.bids[t];
        let q_total = opp.offers[t] + s.offers[t];
        let x = if b_total > 0.0 && q_total > 0.0 { s.bids[t] * q_total / b_total } else { 0.0 };
        if utility.electricity[t] > 0.0 && x <= 0.0 {
            return FocReport::barrier(periods);
        }
        electricity.push(x);
        totals.push((b_total, q_total));
    }
    let b0_total = opp.numeraire_bids + s.numeraire_bid;
    if !(b0_total > 0.0) {
        return FocReport::barrier(periods);
    }
    let inputs: f64 = s.offers.iter().map(|&q| input_for(q, config)).sum();
    let investment = match config.horizon {
        Horizon::ShortRun => 0.0,
        Horizon::LongRun => config.investment_cost * capacity,
    };
    let x0 = s.numeraire_bid * opp.omega / b0_total - inputs - investment;
    if utility.numeraire > 0.0 && x0 <= 0.0 {
        return FocReport::barrier(periods);
    }

    let mut rows = Vec::with_capacity(2 * periods + 1);
    for t in 0..periods {
        let (b_total, q_total) = totals[t];
        rows.push(Row {
            condition: Condition::ElectricityBid(t),
            marginal: marginal_or_zero(utility.electricity[t], electricity[t]) * opp.bids[t] * q_total
                / (b_total * b_total),
            weight: opp.offers[t] / q_total,
            interior: s.bids[t] > 0.0,
        });
    }
    let numeraire_slope = opp.numeraire_bids * opp.omega / (b0_total * b0_total);

    // With no weight on the consumption good its marginal value is the
    // shadow price of x0 >= 0, which the numeraire-bid condition pins down.
    let u0 = if utility.numeraire > 0.0 {
        let u0 = utility.marginal_numeraire(x0);
        rows.push(Row {
            condition: Condition::NumeraireBid,
            marginal: u0 * numeraire_slope,
            weight: 1.0,
            interior: s.numeraire_bid > 0.0,
        });
        u0
    } else {
        fit_lambda(&rows) / numeraire_slope
    };

    let mut boundary = false;
    let mut derivation_gap: f64 = 0.0;
    let mut offer_rows = Vec::with_capacity(periods);
    for t in 0..periods {
        let (b_total, q_total) = totals[t];
        let q = s.offers[t];
        let revenue_weight = -b_total * opp.offers[t] / (q_total * q_total);
        let own = marginal_or_zero(utility.electricity[t], electricity[t]) * s.bids[t] / b_total;
        let closed = marginal_input(q, config);
        if !closed.is_finite() {
            boundary = true;
            continue;
        }
        let from_level = marginal_input_from_level(q, config);
        derivation_gap = derivation_gap.max((u0 * from_level - u0 * closed).abs());
        offer_rows.push((
            t,
            Row {
                condition: Condition::Offer(t),
                marginal: own - u0 * closed,
                weight: revenue_weight,
                interior: q > 0.0 && q < capacity - at_capacity_tol,
            },
        ));
    }

    let fit_rows: Vec<Row> = rows.iter().chain(offer_rows.iter().map(|(_, r)| r)).copied().collect();
    let lambda = fit_lambda(&fit_rows);

    let mut mu = vec![0.0; periods];
    let mut extra = Vec::new();
    for (t, r) in &offer_rows {
        let q = s.offers[*t];
        let g = r.marginal - lambda * r.weight;
        let residual = if r.interior {
            g.abs()
        } else if q >= capacity - at_capacity_tol && q > 0.0 {
            mu[*t] = g.max(0.0);
            (g - mu[*t]).abs()
        } else {
            g.max(0.0)
        };
        extra.push(FocResidual {
            condition: Condition::Offer(*t),
            residual,
        });
    }
    let complementary_slackness: f64 = (0..periods).map(|t| mu[t] * (capacity - s.offers[t])).sum();
    extra.push(FocResidual {
        condition: Condition::CapacitySlackness,
        residual: complementary_slackness,
    });
    if config.horizon == Horizon::LongRun {
        extra.push(FocResidual {
            condition: Condition::Investment,
            residual: mu.iter().sum::<f64>() - u0 * config.investment_cost,
        });
    }
    let check = check_marginals(utility, &electricity, x0);
    finish(&rows, lambda, extra, mu, complementary_slackness, derivation_gap, check, boundary)
}

pub fn foc_residual_standard(h: usize, s: &StandardStrategy, agg: &Aggregates, config: &MarketConfig) -> FocReport {
    standard_foc(h, s, &agg.opponents(AgentId::Standard(h)), config)
}

pub fn foc_residual_producer(j: usize, s: &ProducerStrategy, agg: &Aggregates, config: &MarketConfig) -> FocReport {
    producer_foc(j, s, &agg.opponents(AgentId::Producer(j)), config)
}
