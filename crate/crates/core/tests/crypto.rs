use proptest::prelude::*;
use tradepost_core::crypto::{
    link_to_market, solve_scenario, split_allocation, verification_overhead_report, ConsumptionUtility,
    CryptoScenario,
};
use tradepost_core::equilibrium::{solve_nash, EquilibriumResult, SolveOptions};
use tradepost_core::{MarketConfig, MarketError};

fn baseline() -> (MarketConfig, EquilibriumResult) {
    let config = MarketConfig::symmetric_baseline();
    let eq = solve_nash(&config, None, &SolveOptions::default()).unwrap();
    (config, eq)
}

fn scenario(budgets: Vec<Vec<f64>>, v: f64) -> CryptoScenario {
    let n = budgets.len();
    CryptoScenario {
        budgets,
        verification_cost: v,
        utilities: vec![ConsumptionUtility { weight: 1.3 }; n],
    }
}

proptest! {
    #[test]
    fn budget_binds_and_shadow_price_is_marginal_utility(
        budget in 0.0f64..50.0,
        v in 0.0f64..10.0,
    ) {
        let sc = scenario(vec![vec![budget]], v);
        let e = split_allocation(&sc, 0, 0);
        if budget > v {
            prop_assert!(e.active);
            prop_assert_eq!(e.verification, v);
            prop_assert!((e.consumption + e.verification - budget).abs() <= 1e-12 * budget.max(1.0));
            let u = sc.utilities[0];
            prop_assert!((e.shadow_price.unwrap() - u.marginal(e.consumption)).abs() <= 1e-10);
            let h = 1e-5 * e.consumption;
            let fd = (u.value(e.consumption + h) - u.value(e.consumption - h)) / (2.0 * h);
            prop_assert!((fd - u.marginal(e.consumption)).abs() <= 1e-6 * u.marginal(e.consumption));
        } else {
            prop_assert!(!e.active);
            prop_assert_eq!(e.consumption, 0.0);
            prop_assert_eq!(e.verification, 0.0);
            prop_assert!(e.shadow_price.is_none());
        }
    }

    #[test]
    fn costlier_verification_never_helps(
        budgets in proptest::collection::vec(0.0f64..10.0, 1..6),
        v in 0.0f64..5.0,
        dv in 0.0f64..5.0,
    ) {
        let n = budgets.len();
        let cheap = solve_scenario(&scenario(budgets.iter().map(|&b| vec![b]).collect(), v)).unwrap();
        let dear = solve_scenario(&scenario(budgets.iter().map(|&b| vec![b]).collect(), v + dv)).unwrap();
        for i in 0..n {
            let (a, b) = (cheap.entry(i, 0), dear.entry(i, 0));
            prop_assert!(b.consumption <= a.consumption);
            prop_assert!(a.active || !b.active);
        }
    }
}

#[test]
fn free_verification_passes_equilibrium_electricity_through() {
    let (config, eq) = baseline();
    let link = link_to_market(&eq, &config, 0.0, &[1.0]).unwrap();
    for i in 0..config.agent_count() {
        let e = link.allocation.entry(i, 0);
        assert_eq!(e.consumption, eq.allocations.electricity_total(i));
        assert_eq!(link.overhead_shares[i], 0.0);
    }
    assert_eq!(link.market_multipliers.len(), config.agent_count());
}

#[test]
fn half_of_smallest_allocation_costs_that_agent_half() {
    let (config, eq) = baseline();
    let totals: Vec<f64> = (0..config.agent_count()).map(|i| eq.allocations.electricity_total(i)).collect();
    let (smallest, min) = totals
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let link = link_to_market(&eq, &config, 0.5 * min, &[1.0]).unwrap();
    assert!((link.overhead_shares[smallest] - 0.5).abs() <= 1e-12);
    for (i, &share) in link.overhead_shares.iter().enumerate() {
        if totals[i] > min * (1.0 + 1e-9) {
            assert!(share < 0.5);
        }
    }
}

#[test]
fn prohibitive_verification_stops_all_trade() {
    let (config, eq) = baseline();
    let max = (0..config.agent_count()).map(|i| eq.allocations.electricity_total(i)).fold(0.0, f64::max);
    let link = link_to_market(&eq, &config, 2.0 * max, &[1.0, 1.5]).unwrap();
    assert_eq!(link.allocation.total_consumption(), 0.0);
    for row in verification_overhead_report(&link.allocation) {
        assert_eq!(row.ratio, 0.0);
        assert_eq!(row.abstaining, config.agent_count());
    }
}

#[test]
fn overhead_ratio_matches_entries() {
    let (config, eq) = baseline();
    let n = config.agent_count();
    let mean = (0..n).map(|i| eq.allocations.electricity_total(i)).sum::<f64>() / n as f64;
    let link = link_to_market(&eq, &config, 0.1 * mean, &[1.0]).unwrap();
    let report = verification_overhead_report(&link.allocation);
    let entries = &link.allocation.entries;
    let v: f64 = entries.iter().map(|r| r[0].verification).sum();
    let e: f64 = entries.iter().map(|r| r[0].consumption).sum();
    assert!((report[0].ratio - v / (v + e)).abs() <= 1e-9);
    assert!((report[0].ratio - 0.1).abs() <= 1e-9);
    assert_eq!(report[0].abstaining, 0);
}

#[test]
fn sweep_over_verification_cost_is_monotone() {
    let (config, eq) = baseline();
    let mut last = f64::INFINITY;
    for k in 0..20 {
        let v = 0.1 * k as f64;
        let total = link_to_market(&eq, &config, v, &[0.5, 1.0, 2.0]).unwrap().allocation.total_consumption();
        assert!(total <= last);
        last = total;
    }
}

#[test]
fn refuses_unconverged_equilibria() {
    let config = MarketConfig::symmetric_baseline();
    let eq = solve_nash(&config, None, &SolveOptions { max_iter: 1, ..Default::default() }).unwrap();
    assert!(matches!(link_to_market(&eq, &config, 0.1, &[1.0]), Err(MarketError::NotConverged)));
}
