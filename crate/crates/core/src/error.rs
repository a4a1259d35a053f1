use thiserror::Error;

use crate::config::AgentId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch for {agent}: expected {expected} {what}, found {found}")]
    Dimension {
        agent: String,
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate economy: total endowment of the consumption good is zero")]
    DegenerateEconomy,

    /// The supremum of the agent's problem is not attained, e.g. a sole seller
    /// can buy back its own offer at zero net cost.
    #[error("best response for {agent} is not attained: {reason}")]
    Unattainable { agent: AgentId, reason: String },

    #[error("oracle refuses search dimension {dim} (at most {max} supported)")]
    OracleDimension { dim: usize, max: usize },

    #[error("utility of {agent} is not finite at the initial profile; supply a strictly interior initialization")]
    NonInteriorInit { agent: AgentId },

    #[error("damping must lie in (0, 1], got {0}")]
    InvalidDamping(f64),

    #[error("{0}")]
    Unsupported(String),

    #[error("competitive benchmark failed to clear markets: residual {residual:e} after {iterations} iterations")]
    BenchmarkNotConverged { residual: f64, iterations: usize },

    #[error("equilibrium result is not converged")]
    NotConverged,
}

pub type Result<T> = std::result::Result<T, MarketError>;
