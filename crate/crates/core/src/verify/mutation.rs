use serde::{Deserialize, Serialize};

use super::suites::{interaction_scenarios, property_cases};
use super::{compare_rollouts, run_interaction_suite, run_property_suite, Level, RolloutConfig, Status, VerifyError};
use crate::env::EnvKind;
use crate::registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BugClass {
    Arithmetic,
    Ordering,
    Drift,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantSpec {
    pub id: String,
    pub environment: EnvKind,
    pub bug_class: BugClass,
    pub description: String,
    pub expected_catch_level: Level,
}

fn spec(id: &str, environment: EnvKind, bug_class: BugClass, level: Level, description: &str) -> MutantSpec {
    MutantSpec {
        id: id.to_owned(),
        environment,
        bug_class,
        description: description.to_owned(),
        expected_catch_level: level,
    }
}

/// Every compiled-in mutant with the level expected to catch it first.
pub fn registered_mutants() -> Vec<MutantSpec> {
    use BugClass::*;
    use EnvKind::{CartPole, Pong};
    use Level::*;
    vec![
        spec(registry::PONG_WALL_VELOCITY, Pong, Arithmetic, L1, "wall reflection mirrors y but keeps vy"),
        spec(registry::PONG_SCORE_BEFORE_PADDLE, Pong, Ordering, L2, "miss check runs before paddle contact"),
        spec(registry::PONG_OPPONENT_AFTER_BALL, Pong, Ordering, L2, "opponent tracks the post-move ball"),
        spec(registry::PONG_VX_DECAY, Pong, Drift, L3, "ball_vx decays by a factor 0.999 per step"),
        spec(registry::PONG_SERVE_STREAM, Pong, Reset, L3, "serve draw does not advance the stored stream"),
        spec(registry::CARTPOLE_THETA_ACC_SIGN, CartPole, Arithmetic, L1, "coupling term sign flipped in theta_acc"),
        spec(registry::CARTPOLE_GRAVITY, CartPole, Drift, L3, "gravity 9.81 instead of 9.8"),
        spec(registry::CARTPOLE_RESET_ORDER, CartPole, Reset, L3, "reset draws x_dot before x"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub id: String,
    pub environment: EnvKind,
    pub bug_class: BugClass,
    pub expected_catch_level: Level,
    pub caught_l1: bool,
    pub caught_l2: bool,
    pub caught_l3: bool,
    /// Lowest catching level; `None` is a kill gap.
    pub caught_at: Option<Level>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub status: Status,
    pub rollout_episodes: u32,
    pub base_seed: u64,
    pub rows: Vec<MatrixRow>,
    /// Mutants no level caught.
    pub kill_gaps: Vec<String>,
}

/// Runs each mutant through the built-in L1 and L2 suites and an L3 rollout
/// comparison against its environment's reference, and checks that the
/// lowest catching level is the expected one.
pub fn run_mutation_matrix(
    mutants: &[MutantSpec],
    rollout_episodes: u32,
    base_seed: u64,
) -> Result<MatrixReport, VerifyError> {
    if mutants.is_empty() {
        return Err(VerifyError::EmptyRegistry);
    }
    let mut rows = Vec::with_capacity(mutants.len());
    for m in mutants {
        let backend = registry::backend(&m.id).ok_or_else(|| VerifyError::UnknownBackend(m.id.clone()))?;
        if backend.kind() != m.environment {
            return Err(VerifyError::Malformed {
                case: m.id.clone(),
                reason: format!("registered as {} but the backend is {}", m.environment, backend.kind()),
            });
        }
        let reference = registry::backend(registry::reference_id(m.environment)).expect("reference registered");

        let caught_l1 = !run_property_suite("mutant-l1", backend.as_ref(), &property_cases(m.environment))?.passed();
        let caught_l2 =
            !run_interaction_suite("mutant-l2", backend.as_ref(), &interaction_scenarios(m.environment))?.passed();
        let config = RolloutConfig::new(rollout_episodes, base_seed, registry::default_mode(m.environment));
        let caught_l3 = !compare_rollouts(reference.as_ref(), backend.as_ref(), &config)?.passed();

        let caught_at = [(caught_l1, Level::L1), (caught_l2, Level::L2), (caught_l3, Level::L3)]
            .into_iter()
            .find_map(|(caught, level)| caught.then_some(level));
        rows.push(MatrixRow {
            id: m.id.clone(),
            environment: m.environment,
            bug_class: m.bug_class,
            expected_catch_level: m.expected_catch_level,
            caught_l1,
            caught_l2,
            caught_l3,
            caught_at,
            status: Status::from_pass(caught_at == Some(m.expected_catch_level)),
        });
    }
    let kill_gaps = rows.iter().filter(|r| r.caught_at.is_none()).map(|r| r.id.clone()).collect();
    Ok(MatrixReport {
        status: Status::from_pass(rows.iter().all(|r| r.status.passed())),
        rollout_episodes,
        base_seed,
        rows,
        kill_gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_mutant_is_caught_at_its_level() {
        let report = run_mutation_matrix(&registered_mutants(), 100, 0).unwrap();
        for row in &report.rows {
            assert_eq!(row.caught_at, Some(row.expected_catch_level), "{row:?}");
        }
        assert!(report.status.passed());
        assert!(report.kill_gaps.is_empty());
    }

    #[test]
    fn every_bug_class_is_represented() {
        let mutants = registered_mutants();
        for class in [BugClass::Arithmetic, BugClass::Ordering, BugClass::Drift, BugClass::Reset] {
            assert!(mutants.iter().any(|m| m.bug_class == class));
        }
        let ids: Vec<&str> = mutants.iter().map(|m| m.id.as_str()).collect();
        for id in &ids {
            assert!(registry::backend_ids().contains(id));
        }
    }

    #[test]
    fn empty_registry_is_an_error() {
        assert!(matches!(run_mutation_matrix(&[], 1, 0), Err(VerifyError::EmptyRegistry)));
    }

    #[test]
    fn a_twin_registered_as_a_mutant_is_a_kill_gap() {
        let fake = spec("pong-perf", EnvKind::Pong, BugClass::Drift, Level::L3, "not actually broken");
        let report = run_mutation_matrix(&[fake], 5, 0).unwrap();
        assert_eq!(report.kill_gaps, vec!["pong-perf".to_owned()]);
        assert!(!report.status.passed());
    }
}
