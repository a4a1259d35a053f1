use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{AgentId, Horizon, LogUtility, MarketConfig};
use crate::error::{MarketError, Result};
use crate::market::{input_for, payoff, producer_outcome, Opponents, ProducerStrategy};

use super::derivatives::marginal_input;
use super::{
    bid_for_multiplier, foc::producer_foc, solve_multiplier, AgentStrategy, BestResponseResult,
    FocReport, ResponseOptions, ResponseStatus, SolverTrace, Termination,
};

/// Starts used when the technology has increasing returns.
const MULTI_STARTS: usize = 5;
const ARMIJO: f64 = 1e-4;

/// Optimal bids for a fixed offer vector together with the value and its
/// gradient with respect to the offers (and capacity in the long run).
#[derive(Debug, Clone, PartialEq)]
pub struct OfferValue {
    pub strategy: ProducerStrategy,
    pub value: f64,
    pub lambda: f64,
    /// Envelope gradient over `(offers..., [capacity])`.
    pub gradient: Vec<f64>,
    pub budget_slack: f64,
    steps: usize,
}

struct Problem<'a> {
    opp: &'a Opponents,
    config: &'a MarketConfig,
    utility: &'a LogUtility,
    long_run: bool,
}

/// Numeraire-post bid at multiplier `lambda` for a producer who must cover
/// `inputs` out of its purchase. Positive root of
/// `a b^2 + A (Omega - 2 inputs) b - (A^2 inputs + (weight / lambda) A Omega) = 0`
/// with `a = Omega - inputs` and `A` the opponents' bids; with zero weight
/// this is the smallest bid that covers the inputs exactly.
fn numeraire_bid_for(weight: f64, others_bid: f64, omega: f64, inputs: f64, lambda: f64) -> f64 {
    let a = omega - inputs;
    let lin = others_bid * (omega - 2.0 * inputs);
    let c = others_bid * others_bid * inputs + weight / lambda * others_bid * omega;
    let disc = (lin * lin + 4.0 * a * c).sqrt();
    if lin >= 0.0 {
        2.0 * c / (lin + disc)
    } else {
        (disc - lin) / (2.0 * a)
    }
}

impl Problem<'_> {
    fn periods(&self) -> usize {
        self.config.periods
    }

    fn dim(&self) -> usize {
        self.periods() + usize::from(self.long_run)
    }

    fn capacity(&self) -> f64 {
        if self.long_run {
            f64::INFINITY
        } else {
            self.config.capacity
        }
    }

    fn solve(&self, z: &[f64]) -> Option<OfferValue> {
        let periods = self.periods();
        let opp = self.opp;
        let q = &z[..periods];
        let capacity = self.long_run.then(|| z[periods]);
        let omega = opp.omega;
        let others0 = opp.numeraire_bids;
        let inputs: f64 = q.iter().map(|&x| input_for(x, self.config)).sum::<f64>()
            + capacity.map_or(0.0, |k| k * self.config.investment_cost);
        if inputs >= omega {
            return None;
        }

        let mut revenue = 0.0;
        let mut costs = vec![0.0; periods];
        let mut totals = vec![0.0; periods];
        for t in 0..periods {
            let q_total = opp.offers[t] + q[t];
            totals[t] = q_total;
            if q_total <= 0.0 {
                if self.utility.electricity[t] > 0.0 {
                    return None;
                }
                continue;
            }
            revenue += opp.bids[t] * q[t] / q_total;
            costs[t] = opp.offers[t] / q_total;
        }
        let w0 = self.utility.numeraire;
        let floor = inputs * others0 / (omega - inputs);
        if revenue <= floor * (1.0 + 1e-12) {
            return None;
        }

        let weights = &self.utility.electricity;
        let spend = |lambda: f64| -> f64 {
            let el: f64 = (0..periods)
                .filter(|&t| costs[t] > 0.0)
                .map(|t| costs[t] * bid_for_multiplier(weights[t], opp.bids[t], costs[t], lambda))
                .sum();
            el + numeraire_bid_for(w0, others0, omega, inputs, lambda)
        };
        let (lambda, steps) = solve_multiplier(revenue, spend);
        let bids: Vec<f64> = (0..periods)
            .map(|t| {
                if costs[t] > 0.0 {
                    bid_for_multiplier(weights[t], opp.bids[t], costs[t], lambda)
                } else {
                    0.0
                }
            })
            .collect();
        let mut numeraire_bid = numeraire_bid_for(w0, others0, omega, inputs, lambda);
        if w0 <= 0.0 {
            // keep net consumption from rounding below zero
            numeraire_bid = numeraire_bid.max(floor * (1.0 + 1e-14));
        }

        let b0_total = others0 + numeraire_bid;
        let x0 = numeraire_bid * omega / b0_total - inputs;
        if x0 < 0.0 || (w0 > 0.0 && x0 <= 0.0) {
            return None;
        }
        let mut value = if w0 > 0.0 { w0 * x0.ln() } else { 0.0 };
        let u0 = if w0 > 0.0 {
            w0 / x0
        } else {
            lambda * b0_total * b0_total / (others0 * omega)
        };
        let mut gradient = Vec::with_capacity(self.dim());
        for t in 0..periods {
            let b_total = opp.bids[t] + bids[t];
            if weights[t] > 0.0 {
                let x = bids[t] * totals[t] / b_total;
                if x <= 0.0 {
                    return None;
                }
                value += weights[t] * x.ln();
            }
            let own = if weights[t] > 0.0 { weights[t] / totals[t] } else { 0.0 };
            let revenue_slope = if totals[t] > 0.0 {
                lambda * b_total * opp.offers[t] / (totals[t] * totals[t])
            } else {
                0.0
            };
            gradient.push(own - u0 * marginal_input(q[t], self.config) + revenue_slope);
        }
        if self.long_run {
            gradient.push(-u0 * self.config.investment_cost);
        }
        let spent: f64 = (0..periods).map(|t| costs[t] * bids[t]).sum::<f64>() + numeraire_bid;
        Some(OfferValue {
            strategy: ProducerStrategy {
                bids,
                numeraire_bid,
                offers: q.to_vec(),
                capacity,
            },
            value,
            lambda,
            gradient,
            budget_slack: revenue - spent,
            steps,
        })
    }

    fn project(&self, z: &mut [f64]) {
        let periods = self.periods();
        if !self.long_run {
            let cap = self.capacity();
            z.iter_mut().for_each(|x| *x = x.clamp(0.0, cap));
            return;
        }
        // Euclidean projection onto {0 <= q_t <= K}.
        let k = z[periods];
        let mut above: Vec<f64> = z[..periods].iter().copied().filter(|&x| x > 0.0).collect();
        above.sort_by(|a, b| b.total_cmp(a));
        let mut sum = 0.0;
        let mut new_k = k;
        for m in 0..=above.len() {
            let candidate = (k + sum) / (1 + m) as f64;
            let next_ok = m == above.len() || above[m] <= candidate;
            if next_ok {
                new_k = candidate;
                break;
            }
            sum += above[m];
        }
        let new_k = new_k.max(0.0);
        for x in &mut z[..periods] {
            *x = x.clamp(0.0, new_k);
        }
        z[periods] = new_k;
    }

    fn projected_gradient_norm(&self, z: &[f64], g: &[f64]) -> f64 {
        let mut moved: Vec<f64> = z.iter().zip(g).map(|(a, b)| a + b).collect();
        self.project(&mut moved);
        moved.iter().zip(z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn offers_to_point(&self, offers: &[f64]) -> Vec<f64> {
        let mut z = offers.to_vec();
        if self.long_run {
            z.push(offers.iter().copied().fold(0.0, f64::max));
        }
        z
    }

    /// Deterministic offer guesses scaled to the opponents' offers.
    fn candidates(&self) -> Vec<Vec<f64>> {
        let periods = self.periods();
        let others = (self.config.p().max(2) - 1) as f64;
        let cap = self.capacity();
        let scale: Vec<f64> = (0..periods)
            .map(|t| {
                if self.opp.offers[t] > 0.0 {
                    self.opp.offers[t] / others
                } else if cap.is_finite() {
                    0.5 * cap
                } else {
                    1.0
                }
            })
            .collect();
        [1.0, 0.5, 2.0, 0.25, 4.0, 0.1, 0.01, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12]
            .iter()
            .map(|f| {
                let q: Vec<f64> = scale.iter().map(|s| (s * f).min(cap)).collect();
                self.offers_to_point(&q)
            })
            .collect()
    }

    fn ascend(&self, start: Vec<f64>, opts: &ResponseOptions) -> (OfferValue, SolverTrace) {
        let mut z = start;
        let mut cur = self.solve(&z).expect("start point has finite value");
        let g_norm = cur.gradient.iter().map(|g| g.abs()).filter(|g| g.is_finite()).fold(0.0, f64::max);
        let z_norm = z.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-6);
        let mut step = if g_norm > 0.0 { 0.1 * z_norm / g_norm } else { 1.0 };
        let mut trace = SolverTrace {
            iterations: 0,
            final_step: step,
            projected_gradient: self.projected_gradient_norm(&z, &cur.gradient),
            starts: 1,
            termination: Termination::MaxIterations,
        };

        for it in 0..opts.max_iter {
            trace.iterations = it;
            let pg = self.projected_gradient_norm(&z, &cur.gradient);
            trace.projected_gradient = pg;
            if pg <= opts.tol {
                trace.termination = Termination::ProjectedGradient;
                // Land exactly on any bound the last unit step reaches.
                let mut last: Vec<f64> = z.iter().zip(&cur.gradient).map(|(a, g)| a + g).collect();
                self.project(&mut last);
                if let Some(next) = self.solve(&last) {
                    if next.value >= cur.value - 1e-15 * (1.0 + cur.value.abs()) {
                        cur = next;
                    }
                }
                break;
            }
            let mut target: Vec<f64> = z.iter().zip(&cur.gradient).map(|(a, g)| a + step * g).collect();
            self.project(&mut target);
            let d: Vec<f64> = target.iter().zip(&z).map(|(a, b)| a - b).collect();
            let slope = dot_nonzero(&d, &cur.gradient);

            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                if let Some(next) = self.solve(&trial) {
                    let gain = next.value - cur.value;
                    let flat = gain.abs() <= 1e-13 * (1.0 + cur.value.abs());
                    if gain >= ARMIJO * t * slope
                        || (flat && self.projected_gradient_norm(&trial, &next.gradient) < pg)
                    {
                        accepted = Some((trial, next));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((next_z, next)) = accepted else {
                trace.termination = Termination::StepStalled;
                break;
            };

            let s: Vec<f64> = next_z.iter().zip(&z).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.gradient.iter().zip(&cur.gradient).map(|(a, b)| a - b).collect();
            let ss = dot_nonzero(&s, &s);
            let sy = -dot_nonzero(&s, &y);
            step = if sy > 0.0 && (ss / sy).is_finite() {
                (ss / sy).clamp(1e-30, 1e30)
            } else {
                (step * 2.0).min(1e30)
            };
            trace.final_step = step;
            z = next_z;
            cur = next;
        }
        (cur, trace)
    }
}

/// Dot product over components where `a` is nonzero, so infinite gradient
/// entries at pinned coordinates do not poison the result.
fn dot_nonzero(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, _)| **x != 0.0)
        .map(|(x, y)| x * y)
        .sum()
}

/// Optimal bids of producer `j` for fixed offers (and long-run capacity),
/// with the value and its gradient. `None` when no bid split gives finite
/// utility, e.g. revenue cannot cover the production inputs.
pub fn producer_value(
    j: usize,
    offers: &[f64],
    capacity: Option<f64>,
    opp: &Opponents,
    config: &MarketConfig,
) -> Option<OfferValue> {
    let problem = Problem {
        opp,
        config,
        utility: &config.producers[j].utility,
        long_run: config.horizon == Horizon::LongRun,
    };
    let mut z = offers.to_vec();
    if problem.long_run {
        z.push(capacity.unwrap_or_else(|| offers.iter().copied().fold(0.0, f64::max)));
    }
    problem.solve(&z)
}

/// Best response of producer `j` to the opponents' totals.
///
/// Bids are optimal in closed form given the offers; the offers (and
/// long-run capacity) are chosen by spectral projected-gradient ascent with
/// an Armijo backtracking line search on the resulting value. `warm` seeds
/// the search. Under increasing returns the value may be non-concave and the
/// search is repeated from several seeded starts.
pub fn producer_best_response(
    j: usize,
    opp: &Opponents,
    config: &MarketConfig,
    opts: &ResponseOptions,
    warm: Option<&ProducerStrategy>,
) -> Result<BestResponseResult> {
    let agent = AgentId::Producer(j);
    let utility = &config.producers[j].utility;
    if !(opp.omega > 0.0) {
        return Err(MarketError::DegenerateEconomy);
    }
    for t in 0..config.periods {
        if utility.electricity[t] <= 0.0 {
            continue;
        }
        if opp.bids[t] <= 0.0 {
            return Ok(trivial(j, opp, config, ResponseStatus::NoMarket));
        }
        if opp.offers[t] <= 0.0 {
            return Err(MarketError::Unattainable {
                agent,
                reason: format!(
                    "sole seller on electricity post {} can repurchase its offer at no cost",
                    t + 1
                ),
            });
        }
    }
    if opp.numeraire_bids <= 0.0 {
        return Ok(trivial(j, opp, config, ResponseStatus::NoMarket));
    }

    let problem = Problem {
        opp,
        config,
        utility,
        long_run: config.horizon == Horizon::LongRun,
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        let mut z = w.offers.clone();
        if problem.long_run {
            z.push(w.capacity.unwrap_or(0.0));
        }
        problem.project(&mut z);
        if problem.solve(&z).is_some() {
            starts.push(z);
        }
    }
    if starts.is_empty() {
        let best = problem
            .candidates()
            .into_iter()
            .filter_map(|z| problem.solve(&z).map(|v| (z, v.value)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((z, _)) => starts.push(z),
            None => return Ok(trivial(j, opp, config, ResponseStatus::NoRevenue)),
        }
    }
    if config.returns_exponent > 1.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let base = problem.candidates().swap_remove(0);
        let mut attempts = 0;
        while starts.len() < MULTI_STARTS && attempts < 50 * MULTI_STARTS {
            attempts += 1;
            let mut z: Vec<f64> = base.iter().map(|x| x * rng.gen_range(0.0..2.0)).collect();
            problem.project(&mut z);
            if problem.solve(&z).is_some() {
                starts.push(z);
            }
        }
    }

    let n_starts = starts.len();
    let (mut best, mut trace) = starts
        .into_iter()
        .map(|z| problem.ascend(z, opts))
        .max_by(|a, b| a.0.value.total_cmp(&b.0.value))
        .expect("at least one start");
    trace.starts = n_starts;

    if problem.long_run {
        // capacity above the largest offer only costs investment
        let mut z = best.strategy.offers.clone();
        z.push(z.iter().copied().fold(0.0, f64::max));
        if let Some(v) = problem.solve(&z) {
            if v.value >= best.value {
                best = v;
            }
        }
    }

    let strategy = best.strategy;
    let outcome = producer_outcome(&strategy, opp, config);
    let foc = producer_foc(j, &strategy, opp, config);
    trace.iterations += best.steps;
    Ok(BestResponseResult {
        payoff: payoff(agent, &outcome, config),
        strategy: AgentStrategy::Producer(strategy),
        budget_slack: best.budget_slack,
        foc,
        status: ResponseStatus::Optimal,
        trace,
    })
}

fn trivial(j: usize, opp: &Opponents, config: &MarketConfig, status: ResponseStatus) -> BestResponseResult {
    let strategy = ProducerStrategy::zero(config.periods, config.horizon);
    let outcome = producer_outcome(&strategy, opp, config);
    BestResponseResult {
        payoff: payoff(AgentId::Producer(j), &outcome, config),
        strategy: AgentStrategy::Producer(strategy),
        budget_slack: 0.0,
        foc: FocReport::barrier(config.periods),
        status,
        trace: SolverTrace::trivial(),
    }
}
