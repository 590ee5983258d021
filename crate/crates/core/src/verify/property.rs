use serde::{Deserialize, Serialize};

use super::{check_paths, resolve, CaseError, FieldCheck, FieldDiff, Level, Status, SuiteReport, VerifyError};
use crate::env::{Backend, ComparisonMode, EnvState};

/// A single transition from a fixed state, with expected field values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCase {
    pub name: String,
    pub setup: EnvState,
    pub action: u32,
    pub expected: Vec<FieldCheck>,
    pub mode: ComparisonMode,
}

/// Runs every case independently against `backend`.
///
/// Paths are validated up front; an unresolvable path is a configuration
/// error and no case runs.
pub fn run_property_suite(
    name: &str,
    backend: &dyn Backend,
    cases: &[PropertyCase],
) -> Result<SuiteReport, VerifyError> {
    let kind = backend.kind();
    for case in cases {
        if case.setup.kind() != kind {
            return Err(VerifyError::Malformed {
                case: case.name.clone(),
                reason: format!("setup is a {} state but backend {} is {}", case.setup.kind(), backend.id(), kind),
            });
        }
        check_paths(kind, &case.name, case.expected.iter().map(|c| c.path.as_str()))?;
    }

    let mut diffs = Vec::new();
    let mut errors = Vec::new();
    let mut passed = 0;
    for case in cases {
        let (state, outcome) = match backend.step(&case.setup, case.action) {
            Ok(r) => r,
            Err(e) => {
                errors.push(CaseError { case: case.name.clone(), message: e.to_string(), state: None });
                continue;
            }
        };
        let before = diffs.len();
        for check in &case.expected {
            let actual = resolve(kind, &state, Some(&outcome), &check.path);
            if !actual.is_some_and(|v| check.expect.holds(v, case.mode)) {
                diffs.push(FieldDiff {
                    case: case.name.clone(),
                    path: check.path.clone(),
                    expected: check.expect,
                    actual,
                    after_op: None,
                    state: None,
                });
            }
        }
        if diffs.len() == before {
            passed += 1;
        }
    }

    Ok(SuiteReport {
        name: name.to_owned(),
        level: Level::L1,
        backend: backend.id().to_owned(),
        status: Status::from_pass(passed == cases.len()),
        cases: cases.len(),
        passed,
        diffs,
        errors,
    })
}
