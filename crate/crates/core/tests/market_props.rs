mod common;

use proptest::prelude::*;
use tradepost_core::market::{
    allocate, check_budget_producer, check_budget_standard, compute_aggregates, input_for,
    market_clearing_residuals, output_from, prices, standard_outcome, StrategyProfile,
};
use tradepost_core::MarketConfig;

fn economy(seed: u64) -> (MarketConfig, StrategyProfile) {
    let mut rng = common::rng(seed);
    let config = common::random_config(&mut rng, 5, 3);
    let profile = common::random_profile(&mut rng, &config);
    (config, profile)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_post_clears(seed in any::<u64>()) {
        let (config, profile) = economy(seed);
        let agg = compute_aggregates(&profile, &config).unwrap();
        let alloc = allocate(&profile, &agg, &config);
        let r = market_clearing_residuals(&alloc, &agg);
        let scale = agg.offers.iter().fold(agg.omega, |a, &b| a.max(b));
        prop_assert!(r.max_abs() <= 1e-10 * scale.max(1.0), "{:?}", r);
    }

    #[test]
    fn budget_forms_agree(seed in any::<u64>()) {
        let (config, profile) = economy(seed);
        let agg = compute_aggregates(&profile, &config).unwrap();
        for (h, s) in profile.standard.iter().enumerate() {
            let b = check_budget_standard(h, s, &agg).unwrap();
            prop_assert!((b.simplified - b.original).abs() <= 1e-12 * (1.0 + b.original.abs()));
        }
        for (j, s) in profile.producers.iter().enumerate() {
            let b = check_budget_producer(j, s, &agg);
            prop_assert!((b.simplified - b.original).abs() <= 1e-12 * (1.0 + b.original.abs()));
        }
    }

    #[test]
    fn allocations_ignore_nominal_scale(seed in any::<u64>(), k in 0.01f64..100.0) {
        let (config, profile) = economy(seed);
        let agg = compute_aggregates(&profile, &config).unwrap();
        let scaled = profile.scale_bids(k);
        let agg_k = compute_aggregates(&scaled, &config).unwrap();
        let a = allocate(&profile, &agg, &config);
        let b = allocate(&scaled, &agg_k, &config);
        prop_assert!(a.sup_distance(&b) <= 1e-10);
        let (p, pk) = (prices(&agg), prices(&agg_k));
        for (x, y) in p.electricity.iter().zip(&pk.electricity) {
            prop_assert!((y - k * x).abs() <= 1e-10 * (k * x).max(1.0));
        }
        prop_assert!((pk.numeraire - k * p.numeraire).abs() <= 1e-12 * (k * p.numeraire).max(1.0));
    }

    #[test]
    fn larger_bid_buys_more(seed in any::<u64>(), extra in 0.0f64..10.0) {
        let (config, profile) = economy(seed);
        let agg = compute_aggregates(&profile, &config).unwrap();
        let opp = agg.opponents(tradepost_core::AgentId::Standard(0));
        let s = &profile.standard[0];
        let mut richer = s.clone();
        richer.bids.iter_mut().for_each(|b| *b += extra);
        richer.numeraire_bid += extra;
        let (a, b) = (standard_outcome(s, &opp), standard_outcome(&richer, &opp));
        for (x, y) in a.electricity.iter().zip(&b.electricity) {
            prop_assert!(y >= x);
        }
        prop_assert!(b.numeraire >= a.numeraire);
    }

    #[test]
    fn technology_round_trips(q in 1e-6f64..1e3, theta in 0.1f64..10.0, c in 0.2f64..3.0) {
        let mut config = MarketConfig::symmetric_baseline();
        config.productivity = theta;
        config.returns_exponent = c;
        let back = output_from(input_for(q, &config), &config);
        prop_assert!((back - q).abs() <= 1e-10 * q.max(1.0));
    }
}

#[test]
fn dead_post_returns_nothing() {
    let config = MarketConfig::symmetric_baseline();
    let mut profile = StrategyProfile::zero(&config);
    profile.standard[0].numeraire_bid = 1.0;
    let agg = compute_aggregates(&profile, &config).unwrap();
    let alloc = allocate(&profile, &agg, &config);
    assert_eq!(alloc.electricity[0][0], 0.0);
    assert!(!prices(&agg).electricity_defined[0]);
    assert_eq!(market_clearing_residuals(&alloc, &agg).max_abs(), 0.0);
}
