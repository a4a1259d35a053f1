//! Nash equilibria of a trading-post (Shapley-Shubik) electricity market in
//! which bids are placed in a cryptocurrency unit of account, with a
//! competitive benchmark and a prepaid consumption/verification layer.
//!
//! Modules, bottom up:
//! - [`market`]: post totals, prices, allocation rules, budgets, production.
//! - [`best_response`]: individual optimization and first-order conditions.
//! - [`equilibrium`]: damped iterated best response, nominal normalization,
//!   the Walrasian benchmark and replication experiments.
//! - [`crypto`]: splitting prepaid electricity between consumption and
//!   payment verification.

pub mod best_response;
pub mod equilibrium;
pub mod config;
pub mod crypto;
pub mod error;
pub mod market;

pub use config::{AgentId, Horizon, LogUtility, MarketConfig, ProducerAgent, StandardAgent};
pub use error::{MarketError, Result};
