mod common;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tradepost_core::best_response::{
    oracle_best_response, producer_best_response, standard_best_response, BestResponseResult,
    ResponseOptions, ResponseStatus,
};
use tradepost_core::market::{
    compute_aggregates, payoff, producer_outcome, standard_outcome, Opponents, ProducerStrategy,
    StandardStrategy,
};
use tradepost_core::{AgentId, Horizon, MarketConfig, MarketError};

fn solve(agent: AgentId, opp: &Opponents, config: &MarketConfig) -> BestResponseResult {
    match agent {
        AgentId::Standard(h) => standard_best_response(h, opp, config).unwrap(),
        AgentId::Producer(j) => producer_best_response(j, opp, config, &ResponseOptions::default(), None).unwrap(),
    }
}

/// Small economy and the opponents one agent faces in a random profile.
fn instance(seed: u64, agent: AgentId, periods: usize) -> (MarketConfig, Opponents) {
    let mut rng = common::rng(seed);
    let config = common::small_config(&mut rng, periods);
    let profile = common::random_profile(&mut rng, &config);
    let opp = compute_aggregates(&profile, &config).unwrap().opponents(agent);
    (config, opp)
}

fn grid_for(agent: AgentId, periods: usize) -> usize {
    match (agent, periods) {
        (AgentId::Standard(_), 1) => 400,
        (AgentId::Standard(_), _) => 80,
        (AgentId::Producer(_), 1) => 80,
        (AgentId::Producer(_), _) => 16,
    }
}

#[test]
fn solver_matches_oracle() {
    for seed in 0..20u64 {
        let agent = if seed % 2 == 0 { AgentId::Standard(0) } else { AgentId::Producer(1) };
        let periods = 1 + (seed as usize / 2) % 2;
        let (config, opp) = instance(seed, agent, periods);
        let br = solve(agent, &opp, &config);
        let oracle = oracle_best_response(agent, &opp, &config, grid_for(agent, periods)).unwrap();
        assert!(
            (br.payoff - oracle.payoff).abs() <= 1e-4,
            "seed {seed} {agent}: solver {} oracle {}",
            br.payoff,
            oracle.payoff
        );
        assert!(br.payoff >= oracle.payoff - 1e-9, "oracle beat solver on seed {seed}: {} vs {}", br.payoff, oracle.payoff);
    }
}

fn random_standard_deviation(rng: &mut ChaCha8Rng, s: &StandardStrategy, income: f64, cost0: f64) -> StandardStrategy {
    let mut d = s.clone();
    if rng.gen_bool(0.5) {
        // nearby point, pulled back inside the budget
        d.bids.iter_mut().for_each(|b| *b *= rng.gen_range(0.9..1.1));
        d.numeraire_bid *= rng.gen_range(0.9..1.1);
    } else {
        d.bids.iter_mut().for_each(|b| *b = rng.gen_range(0.0..income));
        d.numeraire_bid = rng.gen_range(0.0..income / cost0);
    }
    let spent = d.bids.iter().sum::<f64>() + cost0 * d.numeraire_bid;
    if spent > income {
        let k = income / spent;
        d.bids.iter_mut().for_each(|b| *b *= k);
        d.numeraire_bid *= k;
    }
    d
}

fn random_producer_deviation(
    rng: &mut ChaCha8Rng,
    s: &ProducerStrategy,
    opp: &Opponents,
    config: &MarketConfig,
) -> ProducerStrategy {
    let periods = config.periods;
    let mut d = s.clone();
    for q in &mut d.offers {
        *q = if rng.gen_bool(0.5) { *q * rng.gen_range(0.8..1.2) } else { rng.gen_range(0.0..2.0 * q.max(1.0)) };
        if config.horizon == Horizon::ShortRun {
            *q = q.min(config.capacity);
        }
    }
    if config.horizon == Horizon::LongRun {
        d.capacity = Some(d.offers.iter().copied().fold(0.0, f64::max) * rng.gen_range(1.0..1.2));
    }
    let revenue: f64 = (0..periods)
        .map(|t| opp.bids[t] * d.offers[t] / (opp.offers[t] + d.offers[t]))
        .sum();
    let mut shares: Vec<f64> = (0..=periods).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = shares.iter().sum::<f64>() / rng.gen_range(0.5..1.0);
    shares.iter_mut().for_each(|x| *x /= total);
    for t in 0..periods {
        let cost = opp.offers[t] / (opp.offers[t] + d.offers[t]);
        d.bids[t] = shares[t] * revenue / cost;
    }
    d.numeraire_bid = shares[periods] * revenue;
    d
}

#[test]
fn best_response_dominates_random_deviations() {
    for seed in 0..10u64 {
        let mut rng = common::rng(1000 + seed);
        for agent in [AgentId::Standard(0), AgentId::Producer(0)] {
            let (config, opp) = instance(seed, agent, 1 + seed as usize % 3);
            let br = solve(agent, &opp, &config);
            for _ in 0..100 {
                let value = match (agent, &br.strategy) {
                    (AgentId::Standard(h), s) => {
                        let s = s.as_standard().unwrap();
                        let income = opp.numeraire_bids * config.standard_agents[h].endowment / opp.omega;
                        let d = random_standard_deviation(&mut rng, s, income, opp.omega_others / opp.omega);
                        payoff(agent, &standard_outcome(&d, &opp), &config)
                    }
                    (AgentId::Producer(_), s) => {
                        let d = random_producer_deviation(&mut rng, s.as_producer().unwrap(), &opp, &config);
                        payoff(agent, &producer_outcome(&d, &opp, &config), &config)
                    }
                };
                assert!(br.payoff >= value - 1e-6, "seed {seed} {agent}: {} < {value}", br.payoff);
            }
        }
    }
}

#[test]
fn budget_binds_and_conditions_hold() {
    for seed in 0..30u64 {
        for agent in [AgentId::Standard(1), AgentId::Producer(0)] {
            let (config, opp) = instance(seed, agent, 1 + seed as usize % 3);
            let br = solve(agent, &opp, &config);
            assert_eq!(br.status, ResponseStatus::Optimal);
            assert!(br.budget_slack.abs() <= 1e-8, "seed {seed} {agent}: slack {}", br.budget_slack);
            assert!(br.foc.max_residual <= 1e-6, "seed {seed} {agent}: {:?}", br.foc);
            assert!(br.foc.derivation_gap <= 1e-12);
            assert!(br.foc.mu.iter().all(|&m| m >= 0.0));
            assert!(br.foc.marginal_utility_check <= 1e-6);
        }
    }
}

#[test]
fn richer_agent_does_better() {
    for seed in 0..20u64 {
        let (mut config, opp) = instance(seed, AgentId::Standard(0), 2);
        let mut last = f64::NEG_INFINITY;
        for endowment in [1.0, 2.0, 5.0, 10.0, 40.0] {
            config.standard_agents[0].endowment = endowment;
            let mut opp = opp.clone();
            opp.omega = opp.omega_others + endowment;
            let value = standard_best_response(0, &opp, &config).unwrap().payoff;
            assert!(value >= last);
            last = value;
        }
    }
}

#[test]
fn responses_scale_with_opponent_bids() {
    for seed in 0..10u64 {
        for agent in [AgentId::Standard(0), AgentId::Producer(0)] {
            let (config, opp) = instance(seed, agent, 2);
            let base = solve(agent, &opp, &config);
            let k = 7.0;
            let scaled = solve(agent, &opp.scale_bids(k), &config);
            assert!((base.payoff - scaled.payoff).abs() <= 1e-9);
            match (&base.strategy, &scaled.strategy) {
                (a, b) if a.as_standard().is_some() => {
                    let (a, b) = (a.as_standard().unwrap(), b.as_standard().unwrap());
                    for (x, y) in a.bids.iter().zip(&b.bids) {
                        assert!((k * x - y).abs() <= 1e-9 * y.max(1.0));
                    }
                }
                (a, b) => {
                    let (a, b) = (a.as_producer().unwrap(), b.as_producer().unwrap());
                    for (x, y) in a.offers.iter().zip(&b.offers) {
                        assert!((x - y).abs() <= 1e-6 * y.max(1.0));
                    }
                    assert!((k * a.numeraire_bid - b.numeraire_bid).abs() <= 1e-6 * b.numeraire_bid.max(1.0));
                }
            }
        }
    }
}

#[test]
fn two_good_symmetric_case_is_interior() {
    let mut config = MarketConfig::symmetric_baseline();
    config.standard_agents[0].utility.numeraire = 1.0;
    let opp = Opponents {
        bids: vec![5.0],
        offers: vec![10.0],
        numeraire_bids: 5.0,
        omega: 20.0,
        omega_others: 10.0,
    };
    let br = standard_best_response(0, &opp, &config).unwrap();
    let s = br.strategy.as_standard().unwrap();
    assert!(s.bids[0] > 0.0 && s.numeraire_bid > 0.0);
    assert!(br.budget_slack.abs() <= 1e-12);
    assert!(br.foc.max_residual <= 1e-8);
    let oracle = oracle_best_response(AgentId::Standard(0), &opp, &config, 400).unwrap();
    assert!((oracle.payoff - br.payoff).abs() <= 1e-6);
}

#[test]
fn price_taking_limit_spends_utility_shares() {
    let mut config = MarketConfig::symmetric_baseline();
    config.periods = 2;
    config.standard_agents[0].utility = tradepost_core::LogUtility::new(vec![1.0, 3.0], 2.0);
    let big = 1e9;
    let opp = Opponents {
        bids: vec![big, big],
        offers: vec![big, big],
        numeraire_bids: big,
        omega: big + 10.0,
        omega_others: big,
    };
    let br = standard_best_response(0, &opp, &config).unwrap();
    let s = br.strategy.as_standard().unwrap();
    let spent = s.bids.iter().sum::<f64>() + s.numeraire_bid * opp.omega_others / opp.omega;
    for (b, share) in s.bids.iter().zip([1.0 / 6.0, 3.0 / 6.0]) {
        assert!((b / spent - share).abs() <= 1e-6);
    }
}

#[test]
fn missing_counterparties() {
    let config = MarketConfig::symmetric_baseline();
    let opp = Opponents {
        bids: vec![0.0],
        offers: vec![5.0],
        numeraire_bids: 1.0,
        omega: 20.0,
        omega_others: 10.0,
    };
    let br = standard_best_response(0, &opp, &config).unwrap();
    assert_eq!(br.status, ResponseStatus::NoMarket);

    let mut lone = config.clone();
    lone.standard_agents.truncate(1);
    let opp = Opponents {
        bids: vec![1.0],
        offers: vec![5.0],
        numeraire_bids: 1.0,
        omega: 10.0,
        omega_others: 0.0,
    };
    assert!(matches!(
        standard_best_response(0, &opp, &lone),
        Err(MarketError::Unattainable { .. })
    ));

    let mut poor = config.clone();
    poor.standard_agents[0].endowment = 0.0;
    let opp = Opponents { omega: 10.0, ..opp };
    let br = standard_best_response(0, &opp, &poor).unwrap();
    assert_eq!(br.status, ResponseStatus::ZeroBudget);
    assert!(br.strategy.as_standard().unwrap().bids.iter().all(|&b| b == 0.0));
}

#[test]
fn oracle_refuses_large_problems() {
    let mut config = MarketConfig::symmetric_baseline();
    config.periods = 3;
    config.producers[0].utility.electricity = vec![1.0; 3];
    let opp = Opponents {
        bids: vec![1.0; 3],
        offers: vec![1.0; 3],
        numeraire_bids: 1.0,
        omega: 20.0,
        omega_others: 20.0,
    };
    assert!(matches!(
        oracle_best_response(AgentId::Producer(0), &opp, &config, 10),
        Err(MarketError::OracleDimension { .. })
    ));
}

#[test]
fn increasing_returns_multi_start_beats_single_candidates() {
    let mut rng = common::rng(99);
    for _ in 0..5 {
        let mut config = common::small_config(&mut rng, 1);
        config.returns_exponent = rng.gen_range(1.1..1.8);
        let profile = common::random_profile(&mut rng, &config);
        let opp = compute_aggregates(&profile, &config).unwrap().opponents(AgentId::Producer(0));
        let br = producer_best_response(0, &opp, &config, &ResponseOptions::default(), None).unwrap();
        assert!(br.trace.starts >= 2);
        let oracle = oracle_best_response(AgentId::Producer(0), &opp, &config, 200).unwrap();
        assert!(br.payoff >= oracle.payoff - 1e-4, "{} vs {}", br.payoff, oracle.payoff);
    }
}

