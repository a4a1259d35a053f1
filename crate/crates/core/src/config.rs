//! Economy description: trading periods, agents, production technology and
//! preferences.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};

/// Identifies one agent. Indices are zero-based; `Display` is one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentId {
    Standard(usize),
    Producer(usize),
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentId::Standard(h) => write!(f, "standard_{}", h + 1),
            AgentId::Producer(j) => write!(f, "producer_{}", j + 1),
        }
    }
}

impl Serialize for AgentId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Whether producers operate with a fixed capacity or choose it at a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    ShortRun,
    LongRun,
}

/// Weighted logarithmic utility
/// `sum_t electricity[t] * ln x^t + numeraire * ln x^0`.
///
/// Terms with zero weight are dropped, so a zero allocation of an unvalued
/// good is harmless. A zero allocation of a valued good evaluates to `-inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogUtility {
    pub electricity: Vec<f64>,
    pub numeraire: f64,
}

impl LogUtility {
    pub fn new(electricity: Vec<f64>, numeraire: f64) -> Self {
        Self {
            electricity,
            numeraire,
        }
    }

    pub fn periods(&self) -> usize {
        self.electricity.len()
    }

    /// Sum of the electricity weights.
    pub fn electricity_weight(&self) -> f64 {
        self.electricity.iter().sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.electricity_weight() + self.numeraire
    }

    pub fn value(&self, electricity: &[f64], numeraire: f64) -> f64 {
        let mut u = log_term(self.numeraire, numeraire);
        for (&w, &x) in self.electricity.iter().zip(electricity) {
            u += log_term(w, x);
        }
        u
    }

    pub fn marginal_electricity(&self, t: usize, x: f64) -> f64 {
        self.electricity[t] / x
    }

    pub fn marginal_numeraire(&self, x0: f64) -> f64 {
        self.numeraire / x0
    }
}

fn log_term(weight: f64, x: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else if x > 0.0 {
        weight * x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardAgent {
    /// Endowment of the consumption good, offered in full on the numeraire post.
    pub endowment: f64,
    pub utility: LogUtility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerAgent {
    pub utility: LogUtility,
}

/// Full description of the economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    /// Number of electricity trading periods.
    pub periods: usize,
    /// Total factor productivity of the electricity technology.
    pub productivity: f64,
    /// Exponent of the technology `q = productivity * input^returns_exponent`.
    pub returns_exponent: f64,
    /// Consumption good needed per unit of long-run capacity.
    pub investment_cost: f64,
    /// Short-run capacity per producer and period.
    pub capacity: f64,
    pub horizon: Horizon,
    pub standard_agents: Vec<StandardAgent>,
    pub producers: Vec<ProducerAgent>,
    /// Total bid on the numeraire post in a normalized profile.
    pub money_supply: f64,
}

impl MarketConfig {
    /// Number of standard agents.
    pub fn m(&self) -> usize {
        self.standard_agents.len()
    }

    /// Number of producers.
    pub fn p(&self) -> usize {
        self.producers.len()
    }

    pub fn agent_count(&self) -> usize {
        self.m() + self.p()
    }

    /// Agents in the fixed update order: standard agents first, then producers.
    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        let m = self.m();
        let p = self.p();
        (0..m)
            .map(AgentId::Standard)
            .chain((0..p).map(AgentId::Producer))
    }

    pub fn utility(&self, agent: AgentId) -> &LogUtility {
        match agent {
            AgentId::Standard(h) => &self.standard_agents[h].utility,
            AgentId::Producer(j) => &self.producers[j].utility,
        }
    }

    /// Position of `agent` in the standard-then-producer ordering.
    pub fn global_index(&self, agent: AgentId) -> usize {
        match agent {
            AgentId::Standard(h) => h,
            AgentId::Producer(j) => self.m() + j,
        }
    }

    /// Total endowment of the consumption good.
    pub fn omega(&self) -> f64 {
        self.standard_agents.iter().map(|a| a.endowment).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MarketError::InvalidConfig(msg));
        if self.periods < 1 {
            return bad("periods must be >= 1".into());
        }
        if !(self.productivity > 0.0 && self.productivity.is_finite()) {
            return bad("productivity theta must be > 0".into());
        }
        if !(self.returns_exponent > 0.0 && self.returns_exponent.is_finite()) {
            return bad("returns_exponent c must be > 0".into());
        }
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return bad("capacity K_bar must be > 0".into());
        }
        if !(self.investment_cost >= 0.0 && self.investment_cost.is_finite()) {
            return bad("investment_cost rho must be >= 0".into());
        }
        if self.horizon == Horizon::LongRun && self.investment_cost <= 0.0 {
            return bad("investment_cost rho must be > 0 in the long run".into());
        }
        if !(self.money_supply > 0.0 && self.money_supply.is_finite()) {
            return bad("money_supply must be > 0".into());
        }
        for (h, a) in self.standard_agents.iter().enumerate() {
            if !(a.endowment >= 0.0 && a.endowment.is_finite()) {
                return bad(format!("endowment of standard agent {} must be >= 0", h + 1));
            }
        }
        if !(self.omega() > 0.0) {
            return bad("total endowment Omega must be > 0".into());
        }
        for agent in self.agents() {
            let u = self.utility(agent);
            if u.periods() != self.periods {
                return Err(MarketError::Dimension {
                    agent: agent.to_string(),
                    what: "electricity utility weights",
                    expected: self.periods,
                    found: u.periods(),
                });
            }
            let all = u.electricity.iter().chain(std::iter::once(&u.numeraire));
            if all.clone().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return bad(format!("utility weights of {agent} must be finite and >= 0"));
            }
            if !u.electricity.iter().any(|&w| w > 0.0) {
                return bad(format!(
                    "utility of {agent} needs a strictly positive electricity weight"
                ));
            }
        }
        Ok(())
    }

    /// The symmetric two-by-two economy used as the reference scenario:
    /// two identical standard agents, two identical producers, one period,
    /// linear technology with slack capacity.
    pub fn symmetric_baseline() -> Self {
        Self {
            periods: 1,
            productivity: 1.0,
            returns_exponent: 1.0,
            investment_cost: 0.0,
            capacity: 100.0,
            horizon: Horizon::ShortRun,
            standard_agents: vec![
                StandardAgent {
                    endowment: 10.0,
                    utility: LogUtility::new(vec![1.0], 0.25),
                };
                2
            ],
            producers: vec![
                ProducerAgent {
                    utility: LogUtility::new(vec![1.0], 1.0),
                };
                2
            ],
            money_supply: 1.0,
        }
    }
}
