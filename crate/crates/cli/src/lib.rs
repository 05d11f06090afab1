//! Scenario-driven front end for the `windobs` library: rank analyses,
//! simulations, filter runs and the golden reproduction suite.

pub mod analyze;
pub mod reproduce;
pub mod run;
pub mod scenario;

use serde::Serialize;
use thiserror::Error;

use windobs::estimator::EstimatorError;
use windobs::models::ModelError;
use windobs::observability::ObservabilityError;
use windobs::simulator::SimError;

pub use scenario::{Scenario, ScenarioError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 1;
    pub const SINGULAR: i32 = 2;
    pub const MISMATCH: i32 = 3;
    pub const NON_FINITE: i32 = 4;
    pub const DIVERGED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("measurement undefined at the base point: zero denominator {0}")]
    SingularBase(String),
    #[error("simulation: {0}")]
    Simulation(SimError),
    #[error("filter: {0}")]
    Filter(EstimatorError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::SingularBase(_) => exit::SINGULAR,
            CommandError::Simulation(SimError::NonFiniteState { .. }) => exit::NON_FINITE,
            CommandError::Filter(e) if e.time().is_some() => exit::DIVERGED,
            _ => exit::PARSE,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CommandError::Io { path: path.display().to_string(), source }
    }
}

impl From<ModelError> for CommandError {
    fn from(e: ModelError) -> Self {
        CommandError::Invalid(e.to_string())
    }
}

impl From<ObservabilityError> for CommandError {
    fn from(e: ObservabilityError) -> Self {
        match e {
            ObservabilityError::SingularEvaluation(m) => CommandError::SingularBase(m),
            other => CommandError::Invalid(other.to_string()),
        }
    }
}

impl From<SimError> for CommandError {
    fn from(e: SimError) -> Self {
        CommandError::Simulation(e)
    }
}

impl From<EstimatorError> for CommandError {
    fn from(e: EstimatorError) -> Self {
        CommandError::Filter(e)
    }
}

/// One golden comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub item: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl Check {
    pub fn new(item: impl Into<String>, expected: impl ToString, actual: impl ToString, pass: bool) -> Self {
        Check { item: item.into(), expected: expected.to_string(), actual: actual.to_string(), pass }
    }

    pub fn eq<T: PartialEq + ToString>(item: impl Into<String>, expected: T, actual: T) -> Self {
        let pass = expected == actual;
        Check::new(item, expected.to_string(), actual.to_string(), pass)
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Renders checks as `PASS item: actual (expected ...)` lines.
pub fn render_checks(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        s.push_str(&format!("  {tag} {}: {} (expected {})\n", c.item, c.actual, c.expected));
    }
    s
}
