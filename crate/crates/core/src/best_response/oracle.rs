//! Brute-force best responses for small strategy spaces.
//!
//! The oracle only evaluates payoffs through the trading-post allocation
//! rules. Because utility is increasing in every bid, the budget binds and
//! the search runs over how the budget is split (stick-breaking shares) and,
//! for producers, over the offers: an exhaustive grid followed by cyclic
//! golden-section refinement of one coordinate at a time.

use crate::config::{AgentId, Horizon, MarketConfig};
use crate::error::{MarketError, Result};
use crate::market::{
    input_for, payoff, producer_outcome, standard_outcome, Opponents, ProducerStrategy, StandardStrategy,
};

use super::foc::{producer_foc, standard_foc};
use super::{AgentStrategy, BestResponseResult, FocReport, ResponseStatus, SolverTrace, Termination};

pub const ORACLE_MAX_DIMENSION: usize = 4;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maps `[0,1]` onto `[0,1]` with logarithmic spacing over about eleven
/// decades, so tiny offers are on the grid too.
fn offer_scale(u: f64) -> f64 {
    const SPREAD: f64 = 25.0;
    (SPREAD * u).exp_m1() / SPREAD.exp_m1()
}

/// Splits `u` in `[0,1]^(n-1)` into `n` nonnegative shares summing to one.
fn stick_breaking(u: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    let mut shares = Vec::with_capacity(u.len() + 1);
    for &x in u {
        shares.push(rest * x);
        rest *= 1.0 - x;
    }
    shares.push(rest);
    shares
}

struct Search<'a> {
    agent: AgentId,
    opp: &'a Opponents,
    config: &'a MarketConfig,
    /// Upper bound on each offer (producers).
    offer_max: f64,
}

impl Search<'_> {
    fn free_dims(&self) -> usize {
        match self.agent {
            AgentId::Standard(_) => self.config.periods,
            AgentId::Producer(_) => 2 * self.config.periods,
        }
    }

    fn strategy(&self, u: &[f64]) -> AgentStrategy {
        let periods = self.config.periods;
        let opp = self.opp;
        match self.agent {
            AgentId::Standard(h) => {
                let endowment = self.config.standard_agents[h].endowment;
                let income = opp.numeraire_bids * endowment / opp.omega;
                let shares = stick_breaking(u);
                let numeraire_cost = opp.omega_others / opp.omega;
                AgentStrategy::Standard(StandardStrategy {
                    bids: shares[..periods].iter().map(|s| s * income).collect(),
                    numeraire_bid: shares[periods] * income / numeraire_cost,
                    offer: endowment,
                })
            }
            AgentId::Producer(_) => {
                let offers: Vec<f64> = u[..periods].iter().map(|&v| offer_scale(v) * self.offer_max).collect();
                let shares = stick_breaking(&u[periods..]);
                let mut revenue = 0.0;
                let mut costs = vec![0.0; periods];
                for t in 0..periods {
                    let total = opp.offers[t] + offers[t];
                    if total > 0.0 {
                        revenue += opp.bids[t] * offers[t] / total;
                        costs[t] = opp.offers[t] / total;
                    }
                }
                let bids = (0..periods)
                    .map(|t| if costs[t] > 0.0 { shares[t] * revenue / costs[t] } else { 0.0 })
                    .collect();
                let capacity = match self.config.horizon {
                    Horizon::ShortRun => None,
                    Horizon::LongRun => Some(offers.iter().copied().fold(0.0, f64::max)),
                };
                AgentStrategy::Producer(ProducerStrategy {
                    bids,
                    numeraire_bid: shares[periods] * revenue,
                    offers,
                    capacity,
                })
            }
        }
    }

    fn value(&self, u: &[f64]) -> f64 {
        let v = match (self.agent, self.strategy(u)) {
            (AgentId::Standard(_), AgentStrategy::Standard(s)) => {
                payoff(self.agent, &standard_outcome(&s, self.opp), self.config)
            }
            (AgentId::Producer(_), AgentStrategy::Producer(s)) => {
                payoff(self.agent, &producer_outcome(&s, self.opp, self.config), self.config)
            }
            _ => unreachable!(),
        };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn golden(&self, u: &mut [f64], i: usize, lo: f64, hi: f64, evals: &mut usize) {
        let mut probe = |x: f64, u: &mut [f64]| {
            u[i] = x;
            *evals += 1;
            self.value(u)
        };
        let start = u[i];
        let f_start = probe(start, u);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut fc = probe(c, u);
        let mut fd = probe(d, u);
        while b - a > 1e-13 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = probe(c, u);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = probe(d, u);
            }
        }
        let mut best = (start, f_start);
        for (x, f) in [(c, fc), (d, fd), (lo, probe(lo, u)), (hi, probe(hi, u))] {
            if f > best.1 {
                best = (x, f);
            }
        }
        u[i] = best.0;
    }
}

/// Largest single-period offer whose input (and capacity) cost stays below
/// the total supply of the consumption good.
fn affordable_offer(config: &MarketConfig, omega: f64) -> f64 {
    let rho = match config.horizon {
        Horizon::ShortRun => 0.0,
        Horizon::LongRun => config.investment_cost,
    };
    let cost = |q: f64| input_for(q, config) + rho * q;
    let mut hi = 1.0;
    while cost(hi) < omega {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cost(mid) < omega {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Grid search plus golden-section refinement over budget-exhausting
/// strategies. `grid` is the number of grid intervals per free coordinate;
/// at most four free coordinates are searched.
pub fn oracle_best_response(
    agent: AgentId,
    opp: &Opponents,
    config: &MarketConfig,
    grid: usize,
) -> Result<BestResponseResult> {
    let periods = config.periods;
    // The budget binds, so one bid is implied by the others; in the long
    // run capacity equals the largest offer.
    let dim = match agent {
        AgentId::Standard(_) => periods,
        AgentId::Producer(_) => 2 * periods,
    };
    if dim > ORACLE_MAX_DIMENSION {
        return Err(MarketError::OracleDimension {
            dim,
            max: ORACLE_MAX_DIMENSION,
        });
    }
    if !(opp.omega > 0.0) {
        return Err(MarketError::DegenerateEconomy);
    }
    let offer_max = match agent {
        AgentId::Standard(h) => {
            let endowment = config.standard_agents[h].endowment;
            if endowment <= 0.0 || opp.numeraire_bids <= 0.0 {
                let s = StandardStrategy::zero(periods, endowment);
                let v = payoff(agent, &standard_outcome(&s, opp), config);
                return Ok(zero_result(AgentStrategy::Standard(s), v, ResponseStatus::ZeroBudget));
            }
            if opp.omega_others <= 0.0 {
                return Err(MarketError::Unattainable {
                    agent,
                    reason: "sole seller of the consumption good".into(),
                });
            }
            0.0
        }
        AgentId::Producer(_) => {
            let cap = match config.horizon {
                Horizon::ShortRun => config.capacity,
                Horizon::LongRun => f64::INFINITY,
            };
            affordable_offer(config, opp.omega).min(cap)
        }
    };

    let search = Search {
        agent,
        opp,
        config,
        offer_max,
    };
    let free = search.free_dims();
    let grid = grid.max(1);
    let mut evals = 0;
    let mut best_u = vec![0.5; free];
    let mut best_v = f64::NEG_INFINITY;
    let mut idx = vec![0usize; free];
    let mut u = vec![0.0; free];
    loop {
        for (k, &i) in idx.iter().enumerate() {
            u[k] = i as f64 / grid as f64;
        }
        let v = search.value(&u);
        evals += 1;
        if v > best_v {
            best_v = v;
            best_u.copy_from_slice(&u);
        }
        let mut k = 0;
        while k < free {
            idx[k] += 1;
            if idx[k] <= grid {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == free {
            break;
        }
    }

    let radius = 1.0 / grid as f64;
    let mut current = best_v;
    for _ in 0..200 {
        for i in 0..free {
            let lo = (best_u[i] - radius).max(0.0);
            let hi = (best_u[i] + radius).min(1.0);
            search.golden(&mut best_u, i, lo, hi, &mut evals);
        }
        let v = search.value(&best_u);
        let done = v - current <= 1e-15 * (1.0 + v.abs());
        current = v.max(current);
        if done {
            break;
        }
    }

    let strategy = search.strategy(&best_u);
    let value = search.value(&best_u);
    let foc = match (&strategy, agent) {
        (AgentStrategy::Standard(s), AgentId::Standard(h)) => standard_foc(h, s, opp, config),
        (AgentStrategy::Producer(s), AgentId::Producer(j)) => producer_foc(j, s, opp, config),
        _ => unreachable!(),
    };
    Ok(BestResponseResult {
        strategy,
        payoff: value,
        budget_slack: 0.0,
        foc,
        status: ResponseStatus::Optimal,
        trace: SolverTrace {
            iterations: evals,
            final_step: radius,
            projected_gradient: 0.0,
            starts: 1,
            termination: Termination::GridRefined,
        },
    })
}

fn zero_result(strategy: AgentStrategy, payoff: f64, status: ResponseStatus) -> BestResponseResult {
    BestResponseResult {
        strategy,
        payoff,
        budget_slack: 0.0,
        foc: FocReport::barrier(0),
        status,
        trace: SolverTrace::trivial(),
    }
}
