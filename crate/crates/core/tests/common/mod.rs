#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tradepost_core::market::{Opponents, ProducerStrategy, StandardStrategy, StrategyProfile};
use tradepost_core::{Horizon, LogUtility, MarketConfig, ProducerAgent, StandardAgent};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn utility(rng: &mut ChaCha8Rng, periods: usize, numeraire: bool) -> LogUtility {
    LogUtility::new(
        (0..periods).map(|_| rng.gen_range(0.2..2.0)).collect(),
        if numeraire { rng.gen_range(0.1..2.0) } else { 0.0 },
    )
}

/// Economy with `2..=max_agents` agents of each kind and `1..=max_periods`
/// periods.
pub fn random_config(rng: &mut ChaCha8Rng, max_agents: usize, max_periods: usize) -> MarketConfig {
    let periods = rng.gen_range(1..=max_periods);
    let m = rng.gen_range(2..=max_agents);
    let p = rng.gen_range(2..=max_agents);
    let long_run = rng.gen_bool(0.3);
    MarketConfig {
        periods,
        productivity: rng.gen_range(0.5..2.0),
        returns_exponent: rng.gen_range(0.5..1.0),
        investment_cost: if long_run { rng.gen_range(0.05..0.5) } else { 0.0 },
        capacity: rng.gen_range(2.0..50.0),
        horizon: if long_run { Horizon::LongRun } else { Horizon::ShortRun },
        standard_agents: (0..m)
            .map(|_| StandardAgent {
                endowment: rng.gen_range(1.0..20.0),
                utility: utility(rng, periods, true),
            })
            .collect(),
        producers: (0..p)
            .map(|_| ProducerAgent {
                utility: utility(rng, periods, true),
            })
            .collect(),
        money_supply: 1.0,
    }
}

/// Profile with strictly positive bids and offers within capacity.
pub fn random_profile(rng: &mut ChaCha8Rng, config: &MarketConfig) -> StrategyProfile {
    let periods = config.periods;
    let standard = config
        .standard_agents
        .iter()
        .map(|a| StandardStrategy {
            bids: (0..periods).map(|_| rng.gen_range(0.01..10.0)).collect(),
            numeraire_bid: rng.gen_range(0.01..10.0),
            offer: a.endowment,
        })
        .collect();
    let producers = config
        .producers
        .iter()
        .map(|_| {
            let offers: Vec<f64> = (0..periods).map(|_| rng.gen_range(0.01..config.capacity)).collect();
            ProducerStrategy {
                bids: (0..periods).map(|_| rng.gen_range(0.01..10.0)).collect(),
                numeraire_bid: rng.gen_range(0.01..10.0),
                capacity: match config.horizon {
                    Horizon::ShortRun => None,
                    Horizon::LongRun => Some(offers.iter().copied().fold(0.0, f64::max) * rng.gen_range(1.0..1.5)),
                },
                offers,
            }
        })
        .collect();
    StrategyProfile { standard, producers }
}

/// Opponent totals for agent 0 of a small economy with positive activity
/// on every post.
pub fn random_opponents(rng: &mut ChaCha8Rng, config: &MarketConfig, endowment: f64) -> Opponents {
    let periods = config.periods;
    let omega_others = rng.gen_range(5.0..40.0);
    Opponents {
        bids: (0..periods).map(|_| rng.gen_range(0.5..10.0)).collect(),
        offers: (0..periods).map(|_| rng.gen_range(1.0..20.0)).collect(),
        numeraire_bids: rng.gen_range(0.5..10.0),
        omega: omega_others + endowment,
        omega_others,
    }
}

/// Baseline technology with fresh utilities for `periods` periods.
pub fn small_config(rng: &mut ChaCha8Rng, periods: usize) -> MarketConfig {
    let mut config = MarketConfig::symmetric_baseline();
    config.periods = periods;
    config.returns_exponent = rng.gen_range(0.6..1.0);
    config.productivity = rng.gen_range(0.5..2.0);
    config.capacity = rng.gen_range(5.0..30.0);
    for a in &mut config.standard_agents {
        a.endowment = rng.gen_range(2.0..20.0);
        a.utility = utility(rng, periods, true);
    }
    for a in &mut config.producers {
        a.utility = utility(rng, periods, true);
    }
    config
}
