//! Prepaid electricity split between consumption and payment verification.
//!
//! In every state an agent holds a prepaid electricity budget `B`. Executing
//! its transactions costs a fixed `v` of verification energy, and whatever
//! remains is consumed. An agent that cannot cover `v` abstains.

use serde::{Deserialize, Serialize};

use crate::config::AgentId;
use crate::equilibrium::EquilibriumResult;
use crate::error::{MarketError, Result};
use crate::MarketConfig;

/// `U(E) = weight * ln E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionUtility {
    pub weight: f64,
}

impl ConsumptionUtility {
    pub fn value(&self, e: f64) -> f64 {
        self.weight * e.ln()
    }

    pub fn marginal(&self, e: f64) -> f64 {
        self.weight / e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CryptoScenario {
    /// `budgets[i][s]`: prepaid electricity of agent `i` in state `s`.
    pub budgets: Vec<Vec<f64>>,
    /// Verification energy per agent per state in which it transacts.
    pub verification_cost: f64,
    pub utilities: Vec<ConsumptionUtility>,
}

impl CryptoScenario {
    pub fn agents(&self) -> usize {
        self.budgets.len()
    }

    pub fn states(&self) -> usize {
        self.budgets.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MarketError::InvalidConfig(m.to_string()));
        if self.budgets.is_empty() || self.states() == 0 {
            return bad("crypto scenario needs at least one agent and one state");
        }
        if self.budgets.iter().any(|b| b.len() != self.states()) {
            return bad("every agent needs a budget for every state");
        }
        if self.utilities.len() != self.agents() {
            return bad("one consumption utility per agent required");
        }
        if !(self.verification_cost >= 0.0) || !self.verification_cost.is_finite() {
            return bad("verification cost must be finite and >= 0");
        }
        if self.budgets.iter().flatten().any(|&b| !(b >= 0.0) || !b.is_finite()) {
            return bad("budgets must be finite and >= 0");
        }
        if self.utilities.iter().any(|u| !(u.weight > 0.0) || !u.weight.is_finite()) {
            return bad("consumption utility weights must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CryptoEntry {
    pub consumption: f64,
    pub verification: f64,
    /// `U'(E)` when the agent transacts.
    pub shadow_price: Option<f64>,
    pub active: bool,
}

impl CryptoEntry {
    const ABSTAIN: Self = Self {
        consumption: 0.0,
        verification: 0.0,
        shadow_price: None,
        active: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CryptoAllocation {
    /// `entries[i][s]`.
    pub entries: Vec<Vec<CryptoEntry>>,
}

impl CryptoAllocation {
    pub fn entry(&self, i: usize, s: usize) -> &CryptoEntry {
        &self.entries[i][s]
    }

    /// Verification energy as a share of everything agent `i` used; zero if
    /// it never transacts.
    pub fn overhead_share(&self, i: usize) -> f64 {
        let (v, total) = self.entries[i]
            .iter()
            .fold((0.0, 0.0), |(v, t), e| (v + e.verification, t + e.verification + e.consumption));
        if total > 0.0 {
            v / total
        } else {
            0.0
        }
    }

    pub fn total_consumption(&self) -> f64 {
        self.entries.iter().flatten().map(|e| e.consumption).sum()
    }
}

/// Optimal use of agent `i`'s budget in state `s`. The budget always binds
/// when the agent transacts.
pub fn split_allocation(scenario: &CryptoScenario, i: usize, s: usize) -> CryptoEntry {
    let budget = scenario.budgets[i][s];
    let v = scenario.verification_cost;
    if budget > v {
        let consumption = budget - v;
        CryptoEntry {
            consumption,
            verification: v,
            shadow_price: Some(scenario.utilities[i].marginal(consumption)),
            active: true,
        }
    } else {
        CryptoEntry::ABSTAIN
    }
}

pub fn solve_scenario(scenario: &CryptoScenario) -> Result<CryptoAllocation> {
    scenario.validate()?;
    Ok(CryptoAllocation {
        entries: (0..scenario.agents())
            .map(|i| (0..scenario.states()).map(|s| split_allocation(scenario, i, s)).collect())
            .collect(),
    })
}

/// Crypto layer driven by a market equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketLink {
    pub agents: Vec<AgentId>,
    pub scenario: CryptoScenario,
    pub allocation: CryptoAllocation,
    /// Budget multiplier of each agent in the market game, for comparison
    /// with the per-state shadow prices.
    pub market_multipliers: Vec<f64>,
    pub overhead_shares: Vec<f64>,
}

/// Budgets are `scaling[s]` times each agent's total equilibrium
/// electricity; utility is the electricity part of its market utility.
pub fn link_to_market(
    eq: &EquilibriumResult,
    config: &MarketConfig,
    verification_cost: f64,
    state_scalings: &[f64],
) -> Result<MarketLink> {
    if !eq.converged {
        return Err(MarketError::NotConverged);
    }
    let agents: Vec<AgentId> = config.agents().collect();
    let mut budgets = Vec::with_capacity(agents.len());
    let mut utilities = Vec::with_capacity(agents.len());
    for (i, &agent) in agents.iter().enumerate() {
        let total = eq.allocations.electricity_total(i);
        budgets.push(state_scalings.iter().map(|k| k * total).collect());
        utilities.push(ConsumptionUtility {
            weight: config.utility(agent).electricity_weight(),
        });
    }
    let scenario = CryptoScenario {
        budgets,
        verification_cost,
        utilities,
    };
    let allocation = solve_scenario(&scenario)?;
    Ok(MarketLink {
        overhead_shares: (0..agents.len()).map(|i| allocation.overhead_share(i)).collect(),
        market_multipliers: eq.foc_reports.iter().map(|r| r.lambda).collect(),
        agents,
        scenario,
        allocation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadRow {
    pub state: usize,
    pub consumption: f64,
    pub verification: f64,
    /// `sum V / sum (E + V)`, zero when nobody transacts.
    pub ratio: f64,
    pub abstaining: usize,
}

pub fn verification_overhead_report(alloc: &CryptoAllocation) -> Vec<OverheadRow> {
    let states = alloc.entries.first().map_or(0, Vec::len);
    (0..states)
        .map(|s| {
            let column = alloc.entries.iter().map(|row| &row[s]);
            let consumption: f64 = column.clone().map(|e| e.consumption).sum();
            let verification: f64 = column.clone().map(|e| e.verification).sum();
            let used = consumption + verification;
            OverheadRow {
                state: s,
                consumption,
                verification,
                ratio: if used > 0.0 { verification / used } else { 0.0 },
                abstaining: column.filter(|e| !e.active).count(),
            }
        })
        .collect()
}
