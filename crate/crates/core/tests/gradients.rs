mod common;

use rand::Rng;
use tradepost_core::best_response::derivatives::{
    marginal_input, marginal_input_from_level, producer_budget_gradient, producer_payoff_gradient,
    standard_payoff_gradient,
};
use tradepost_core::market::{
    check_budget_producer, compute_aggregates, input_for, payoff, producer_outcome, standard_outcome,
    StrategyProfile,
};
use tradepost_core::{AgentId, Horizon, MarketConfig};

const POINTS: usize = 50;

/// Central difference refined by one Richardson step.
fn derivative(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-4 * x.abs().max(1e-2);
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().map(|g| g.abs()).fold(0.0, f64::max);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1e-3 * scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn numeric_gradient(x: &[f64], f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let g = |v: f64| {
                let mut y = x.to_vec();
                y[i] = v;
                f(&y)
            };
            derivative(&g, x[i])
        })
        .collect()
}

fn economies() -> impl Iterator<Item = (MarketConfig, StrategyProfile)> {
    (0u64..).map(|seed| {
        let mut rng = common::rng(seed);
        let config = common::random_config(&mut rng, 4, 3);
        let profile = common::random_profile(&mut rng, &config);
        (config, profile)
    })
}

#[test]
fn standard_payoff_gradient_matches_differences() {
    let mut worst: f64 = 0.0;
    for (config, profile) in economies().take(POINTS) {
        let agg = compute_aggregates(&profile, &config).unwrap();
        let opp = agg.opponents(AgentId::Standard(0));
        let s = &profile.standard[0];
        let analytic = standard_payoff_gradient(s, &opp, &config, 0);
        let mut x = s.bids.clone();
        x.push(s.numeraire_bid);
        let f = |x: &[f64]| {
            let mut t = s.clone();
            t.bids = x[..config.periods].to_vec();
            t.numeraire_bid = x[config.periods];
            payoff(AgentId::Standard(0), &standard_outcome(&t, &opp), &config)
        };
        worst = worst.max(relative_error(&analytic, &numeric_gradient(&x, &f)));
    }
    assert!(worst <= 1e-6, "relative error {worst:e}");
}

#[test]
fn producer_payoff_gradient_matches_differences() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (config, profile) in economies() {
        if checked == POINTS {
            break;
        }
        let agg = compute_aggregates(&profile, &config).unwrap();
        let opp = agg.opponents(AgentId::Producer(0));
        let s = &profile.producers[0];
        let value = payoff(AgentId::Producer(0), &producer_outcome(s, &opp, &config), &config);
        if !value.is_finite() {
            continue;
        }
        let periods = config.periods;
        let analytic = producer_payoff_gradient(s, &opp, &config, 0);
        let mut x = s.bids.clone();
        x.push(s.numeraire_bid);
        x.extend(&s.offers);
        if config.horizon == Horizon::LongRun {
            x.push(s.capacity.unwrap());
        }
        let f = |x: &[f64]| {
            let mut t = s.clone();
            t.bids = x[..periods].to_vec();
            t.numeraire_bid = x[periods];
            t.offers = x[periods + 1..2 * periods + 1].to_vec();
            if config.horizon == Horizon::LongRun {
                t.capacity = Some(x[2 * periods + 1]);
            }
            payoff(AgentId::Producer(0), &producer_outcome(&t, &opp, &config), &config)
        };
        worst = worst.max(relative_error(&analytic, &numeric_gradient(&x, &f)));
        checked += 1;
    }
    assert!(worst <= 1e-6, "relative error {worst:e}");
}

#[test]
fn producer_budget_gradient_matches_differences() {
    let mut worst: f64 = 0.0;
    for (config, profile) in economies().take(POINTS) {
        let agg = compute_aggregates(&profile, &config).unwrap();
        let opp = agg.opponents(AgentId::Producer(0));
        let periods = config.periods;
        let s = &profile.producers[0];
        let analytic = producer_budget_gradient(s, &opp);
        let mut x = s.bids.clone();
        x.push(s.numeraire_bid);
        x.extend(&s.offers);
        let f = |x: &[f64]| {
            let mut p = profile.clone();
            p.producers[0].bids = x[..periods].to_vec();
            p.producers[0].numeraire_bid = x[periods];
            p.producers[0].offers = x[periods + 1..].to_vec();
            let agg = compute_aggregates(&p, &config).unwrap();
            check_budget_producer(0, &p.producers[0], &agg).simplified
        };
        worst = worst.max(relative_error(&analytic, &numeric_gradient(&x, &f)));
    }
    assert!(worst <= 1e-6, "relative error {worst:e}");
}

#[test]
fn marginal_input_matches_differences_and_level_form() {
    let mut rng = common::rng(7);
    let mut config = MarketConfig::symmetric_baseline();
    for _ in 0..POINTS {
        config.productivity = rng.gen_range(0.2..5.0);
        config.returns_exponent = rng.gen_range(0.3..2.5);
        let q = rng.gen_range(0.05..50.0);
        let closed = marginal_input(q, &config);
        let numeric = derivative(&|v| input_for(v, &config), q);
        assert!((closed - numeric).abs() <= 1e-6 * closed.abs(), "q={q} {closed} vs {numeric}");
        let level = marginal_input_from_level(q, &config);
        assert!((closed - level).abs() <= 1e-12 * closed.abs().max(1.0));
    }
}

#[test]
fn marginal_input_at_zero_output() {
    let mut config = MarketConfig::symmetric_baseline();
    config.returns_exponent = 0.5;
    assert_eq!(marginal_input(0.0, &config), 0.0);
    config.returns_exponent = 2.0;
    assert!(marginal_input(0.0, &config).is_infinite());
}
