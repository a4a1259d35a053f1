use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tradepost_core::equilibrium::{SolveOptions, UpdateMode};
use tradepost_core::MarketConfig;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: String,
    pub market: MarketConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crypto: Option<CryptoSection>,
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub damping: f64,
    pub tol: f64,
    pub foc_tol: f64,
    pub max_iter: usize,
    pub mode: UpdateMode,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            damping: o.damping,
            tol: o.tol,
            foc_tol: o.foc_tol,
            max_iter: o.max_iter,
            mode: o.mode,
            seed: o.seed,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            damping: self.damping,
            tol: self.tol,
            foc_tol: self.foc_tol,
            max_iter: self.max_iter,
            mode: self.mode,
            seed: self.seed,
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoSection {
    pub states: usize,
    pub verification_cost: f64,
    /// Budget of each state as a multiple of equilibrium electricity.
    pub state_scalings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Nash,
    Competitive,
    Replication(Vec<usize>),
    CryptoLink,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Nash => "nash",
            Experiment::Competitive => "competitive",
            Experiment::Replication(_) => "replication",
            Experiment::CryptoLink => "crypto-link",
        }
    }
}

pub const DEFAULT_REPLICATIONS: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug)]
pub struct ScenarioError(pub String);

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ScenarioError {}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let scenario: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError(format!("scenario: {e}")))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| ScenarioError(format!("{}: {}", path.display(), e.0)))
}

impl ScenarioFile {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {:?} (expected {SCHEMA_VERSION:?})",
                self.schema_version
            ));
        }
        self.market.validate().map_err(|e| ScenarioError(format!("market: {e}")))?;
        let s = &self.solver;
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return bad(format!("solver.damping must be in (0, 1], got {}", s.damping));
        }
        if !(s.tol > 0.0) || !(s.foc_tol > 0.0) {
            return bad("solver.tol and solver.foc_tol must be > 0".into());
        }
        if s.max_iter == 0 {
            return bad("solver.max_iter must be >= 1".into());
        }
        if let Some(c) = &self.crypto {
            if c.states == 0 {
                return bad("crypto.states must be >= 1".into());
            }
            if c.state_scalings.len() != c.states {
                return bad(format!(
                    "crypto.state_scalings has {} entries, expected {}",
                    c.state_scalings.len(),
                    c.states
                ));
            }
            if !(c.verification_cost >= 0.0) || c.state_scalings.iter().any(|&k| !(k >= 0.0)) {
                return bad("crypto.verification_cost and state_scalings must be >= 0".into());
            }
        }
        for e in &self.experiments {
            match e {
                Experiment::Replication(ns) if ns.is_empty() || ns.contains(&0) => {
                    return bad("replication needs a non-empty list of factors >= 1".into());
                }
                Experiment::CryptoLink if self.crypto.is_none() => {
                    return bad("crypto-link experiment needs a crypto section".into());
                }
                _ => {}
            }
        }
        Ok(())
    }
}
