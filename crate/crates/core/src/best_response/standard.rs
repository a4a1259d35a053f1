use crate::config::{AgentId, MarketConfig};
use crate::error::{MarketError, Result};
use crate::market::{payoff, standard_outcome, Opponents, StandardStrategy};

use super::{
    bid_for_multiplier, foc::standard_foc, solve_multiplier, AgentStrategy, BestResponseResult,
    FocReport, ResponseStatus, SolverTrace, Termination,
};

/// Best response of standard agent `h` to the opponents' totals `opp`.
///
/// The budget `sum_t b^t + (Omega_-h / Omega) xi <= (B0_-h / Omega) omega_h`
/// always binds under log utility. For a given multiplier every bid solves a
/// scalar quadratic, and the multiplier is found by bisection on spending.
pub fn standard_best_response(
    h: usize,
    opp: &Opponents,
    config: &MarketConfig,
) -> Result<BestResponseResult> {
    let agent = AgentId::Standard(h);
    let utility = &config.standard_agents[h].utility;
    let endowment = config.standard_agents[h].endowment;
    let periods = config.periods;
    if !(opp.omega > 0.0) {
        return Err(MarketError::DegenerateEconomy);
    }

    if endowment <= 0.0 {
        return Ok(trivial(h, opp, config, ResponseStatus::ZeroBudget));
    }

    // (weight, opponents' bid, quantity on the post, budget cost per bytecoin)
    let numeraire_cost = opp.omega_others / opp.omega;
    let mut posts: Vec<(f64, f64, f64, f64)> = (0..periods)
        .map(|t| (utility.electricity[t], opp.bids[t], opp.offers[t], 1.0))
        .collect();
    posts.push((utility.numeraire, opp.numeraire_bids, opp.omega, numeraire_cost));

    let income = opp.numeraire_bids * endowment / opp.omega;
    for &(weight, others_bid, quantity, cost) in &posts {
        if weight <= 0.0 {
            continue;
        }
        if others_bid <= 0.0 || quantity <= 0.0 || income <= 0.0 {
            return Ok(trivial(h, opp, config, ResponseStatus::NoMarket));
        }
        if cost <= 0.0 {
            return Err(MarketError::Unattainable {
                agent,
                reason: "sole seller of the consumption good can repurchase its offer at no cost"
                    .into(),
            });
        }
    }

    let spend = |lambda: f64| -> f64 {
        posts
            .iter()
            .map(|&(w, a, _, c)| c * bid_for_multiplier(w, a, c, lambda))
            .sum()
    };
    let (lambda, steps) = solve_multiplier(income, spend);
    let bids: Vec<f64> = posts
        .iter()
        .map(|&(w, a, _, c)| bid_for_multiplier(w, a, c, lambda))
        .collect();

    let strategy = StandardStrategy {
        bids: bids[..periods].to_vec(),
        numeraire_bid: bids[periods],
        offer: endowment,
    };
    let outcome = standard_outcome(&strategy, opp);
    let value = payoff(agent, &outcome, config);
    let foc = standard_foc(h, &strategy, opp, config);
    let budget_slack = income
        - strategy.bids.iter().sum::<f64>()
        - numeraire_cost * strategy.numeraire_bid;
    Ok(BestResponseResult {
        strategy: AgentStrategy::Standard(strategy),
        payoff: value,
        budget_slack,
        foc,
        status: ResponseStatus::Optimal,
        trace: SolverTrace {
            iterations: steps,
            final_step: 0.0,
            projected_gradient: 0.0,
            starts: 1,
            termination: Termination::BracketCollapsed,
        },
    })
}

fn trivial(h: usize, opp: &Opponents, config: &MarketConfig, status: ResponseStatus) -> BestResponseResult {
    let strategy = StandardStrategy::zero(config.periods, config.standard_agents[h].endowment);
    let outcome = standard_outcome(&strategy, opp);
    BestResponseResult {
        payoff: payoff(AgentId::Standard(h), &outcome, config),
        strategy: AgentStrategy::Standard(strategy),
        budget_slack: opp.numeraire_bids * config.standard_agents[h].endowment / opp.omega,
        foc: FocReport::barrier(0),
        status,
        trace: SolverTrace::trivial(),
    }
}
