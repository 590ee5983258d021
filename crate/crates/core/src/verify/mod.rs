//! Verification levels 1 to 3 and the mutant kill matrix.
//!
//! * L1 ([`run_property_suite`]): one transition from a hand-built state,
//!   checked against hand-computed field values.
//! * L2 ([`run_interaction_suite`]): short operation sequences with
//!   assertions across several fields, targeting event ordering.
//! * L3 ([`compare_rollouts`]): full seed-matched episodes on two backends,
//!   halting at the first divergence with a [`DivergenceReport`].
//!
//! All reports serialize to JSON with stable field names.

mod interaction;
mod mutation;
mod property;
mod rollout;
pub mod suites;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{field_paths, ComparisonMode, EnvError, EnvKind, EnvState, StepOutcome, Value};

pub use interaction::{run_interaction_suite, Assertion, InteractionScenario, Op};
pub use mutation::{registered_mutants, run_mutation_matrix, BugClass, MatrixReport, MatrixRow, MutantSpec};
pub use property::{run_property_suite, PropertyCase};
pub use rollout::{
    compare_rollouts, repair_prompt, replay_divergence, ActionSource, DivergenceReport, RolloutConfig, RolloutReport,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("case `{case}`: field path `{path}` does not resolve against the {env} schema")]
    UnknownField { case: String, path: String, env: EnvKind },
    #[error("case `{case}`: {reason}")]
    Malformed { case: String, reason: String },
    #[error("schema mismatch: {a} is {kind_a} but {b} is {kind_b}")]
    SchemaMismatch { a: String, kind_a: EnvKind, b: String, kind_b: EnvKind },
    #[error("mutant registry is empty")]
    EmptyRegistry,
    #[error("unknown backend id `{0}`")]
    UnknownBackend(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Status::Pass
    }
}

/// Expected value of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Equal under the case's comparison mode.
    Equals(Value),
    /// Inclusive numeric range `[lo, hi]`.
    InRange([f32; 2]),
}

impl Expectation {
    pub fn holds(&self, actual: Value, mode: ComparisonMode) -> bool {
        match *self {
            Expectation::Equals(expected) => mode.values_match(expected, actual),
            Expectation::InRange([lo, hi]) => {
                let v = actual.as_f64();
                v >= lo as f64 && v <= hi as f64
            }
        }
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Equals(v) => write!(f, "{v}"),
            Expectation::InRange([lo, hi]) => write!(f, "in [{lo:?}, {hi:?}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCheck {
    pub path: String,
    #[serde(flatten)]
    pub expect: Expectation,
}

impl FieldCheck {
    pub fn equals(path: &str, value: impl Into<Value>) -> Self {
        Self { path: path.to_owned(), expect: Expectation::Equals(value.into()) }
    }

    pub fn in_range(path: &str, lo: f32, hi: f32) -> Self {
        Self { path: path.to_owned(), expect: Expectation::InRange([lo, hi]) }
    }
}

impl From<f32> for Value {
    fn from(v: f32) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

/// One mismatched field within a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub case: String,
    pub path: String,
    pub expected: Expectation,
    /// `None` when the field had no value at that point (no outcome yet).
    pub actual: Option<Value>,
    /// Index of the operation after which the check ran (interaction suites only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub after_op: Option<usize>,
    /// State at the checkpoint (interaction suites only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<EnvState>,
}

/// A case that could not run to completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseError {
    pub case: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<EnvState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub level: Level,
    pub backend: String,
    pub status: Status,
    pub cases: usize,
    pub passed: usize,
    pub diffs: Vec<FieldDiff>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<CaseError>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.status.passed()
    }
}

pub(crate) fn resolve(kind: EnvKind, state: &EnvState, outcome: Option<&StepOutcome>, path: &str) -> Option<Value> {
    if path == "reward" || path == "done" || path.starts_with("observation.") {
        outcome.and_then(|o| o.field(kind, path))
    } else {
        state.field(path)
    }
}

pub(crate) fn check_paths<'a>(
    kind: EnvKind,
    case: &str,
    paths: impl IntoIterator<Item = &'a str>,
) -> Result<(), VerifyError> {
    let known = field_paths(kind);
    for path in paths {
        if !known.iter().any(|k| k == path) {
            return Err(VerifyError::UnknownField { case: case.to_owned(), path: path.to_owned(), env: kind });
        }
    }
    Ok(())
}
