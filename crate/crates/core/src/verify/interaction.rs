use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{check_paths, resolve, CaseError, Expectation, FieldDiff, Level, Status, SuiteReport, VerifyError};
use crate::env::{Backend, ComparisonMode, EnvState, StepOutcome, Value};
use crate::rng::derive_stream;

/// One operation in an interaction scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    /// Replace the whole state.
    SetState { state: EnvState },
    /// Reset from `derive_stream(seed, index)`.
    Reset { seed: u64, index: u32 },
    Step { action: u32 },
    /// Overwrite one state field.
    SetField { path: String, value: Value },
}

/// A check evaluated after operation `after` (zero-based) has run.
///
/// `reward`, `done` and `observation.*` refer to the most recent `Step`; they
/// are unresolved when a later non-step operation has intervened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub after: usize,
    pub path: String,
    #[serde(flatten)]
    pub expect: Expectation,
}

impl Assertion {
    pub fn equals(after: usize, path: &str, value: impl Into<Value>) -> Self {
        Self { after, path: path.to_owned(), expect: Expectation::Equals(value.into()) }
    }

    pub fn in_range(after: usize, path: &str, lo: f32, hi: f32) -> Self {
        Self { after, path: path.to_owned(), expect: Expectation::InRange([lo, hi]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionScenario {
    pub name: String,
    pub ops: Vec<Op>,
    pub assertions: Vec<Assertion>,
    pub mode: ComparisonMode,
}

impl InteractionScenario {
    fn validate(&self, backend: &dyn Backend) -> Result<(), VerifyError> {
        let malformed = |reason: String| VerifyError::Malformed { case: self.name.clone(), reason };
        if self.ops.len() < 2 {
            return Err(malformed(format!("needs at least 2 operations, has {}", self.ops.len())));
        }
        if !matches!(self.ops[0], Op::SetState { .. } | Op::Reset { .. }) {
            return Err(malformed("first operation must be set_state or reset".into()));
        }
        let fields: BTreeSet<&str> = self.assertions.iter().map(|a| a.path.as_str()).collect();
        if fields.len() < 2 {
            return Err(malformed(format!("assertions touch {} distinct fields, need at least 2", fields.len())));
        }
        if let Some(a) = self.assertions.iter().find(|a| a.after >= self.ops.len()) {
            return Err(malformed(format!("assertion on `{}` refers to missing operation {}", a.path, a.after)));
        }
        let kind = backend.kind();
        for op in &self.ops {
            match op {
                Op::SetState { state } if state.kind() != kind => {
                    return Err(malformed(format!("set_state holds a {} state", state.kind())));
                }
                Op::SetField { path, .. } => check_paths(kind, &self.name, [path.as_str()])?,
                _ => {}
            }
        }
        check_paths(kind, &self.name, self.assertions.iter().map(|a| a.path.as_str()))
    }
}

/// Runs each scenario's operations in order, checking assertions at their
/// checkpoints. A failing assertion records the state at that checkpoint; an
/// operation error stops the scenario and records the state before it.
pub fn run_interaction_suite(
    name: &str,
    backend: &dyn Backend,
    scenarios: &[InteractionScenario],
) -> Result<SuiteReport, VerifyError> {
    for s in scenarios {
        s.validate(backend)?;
    }
    let kind = backend.kind();
    let mut diffs = Vec::new();
    let mut errors = Vec::new();
    let mut passed = 0;

    for scenario in scenarios {
        let before = diffs.len();
        let mut state: Option<EnvState> = None;
        let mut outcome: Option<StepOutcome> = None;
        let mut failed_op = false;
        for (i, op) in scenario.ops.iter().enumerate() {
            let result = match op {
                Op::SetState { state: s } => {
                    state = Some(s.clone());
                    outcome = None;
                    Ok(())
                }
                Op::Reset { seed, index } => {
                    state = Some(backend.reset(derive_stream(*seed, *index)).0);
                    outcome = None;
                    Ok(())
                }
                Op::Step { action } => {
                    let current = state.as_ref().expect("validated: first op sets state");
                    backend.step(current, *action).map(|(s, o)| {
                        state = Some(s);
                        outcome = Some(o);
                    })
                }
                Op::SetField { path, value } => {
                    outcome = None;
                    state.as_mut().expect("validated: first op sets state").set_field(path, *value)
                }
            };
            if let Err(e) = result {
                errors.push(CaseError {
                    case: scenario.name.clone(),
                    message: format!("operation {i}: {e}"),
                    state: state.clone(),
                });
                failed_op = true;
                break;
            }
            let current = state.as_ref().expect("state set");
            for a in scenario.assertions.iter().filter(|a| a.after == i) {
                let actual = resolve(kind, current, outcome.as_ref(), &a.path);
                if !actual.is_some_and(|v| a.expect.holds(v, scenario.mode)) {
                    diffs.push(FieldDiff {
                        case: scenario.name.clone(),
                        path: a.path.clone(),
                        expected: a.expect,
                        actual,
                        after_op: Some(i),
                        state: Some(current.clone()),
                    });
                }
            }
        }
        if !failed_op && diffs.len() == before {
            passed += 1;
        }
    }

    Ok(SuiteReport {
        name: name.to_owned(),
        level: Level::L2,
        backend: backend.id().to_owned(),
        status: Status::from_pass(passed == scenarios.len()),
        cases: scenarios.len(),
        passed,
        diffs,
        errors,
    })
}
