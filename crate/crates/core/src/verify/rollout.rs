use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Status, VerifyError};
use crate::env::{Backend, ComparisonMode, EnvKind, EnvState, StepOutcome, Value};
use crate::rng::{derive_stream, RngState};

/// Mixed into the base seed so the action stream never aliases a reset stream.
const ACTION_SALT: u64 = 0xA5A5_5A5A_C3C3_3C3C;

/// Where the shared actions come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSource {
    /// Uniform actions; episode `i` draws from `derive_stream(seed, i)`.
    Random { seed: u64 },
    /// A fixed sequence, repeated cyclically within each episode.
    Scripted { actions: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub episodes: u32,
    pub base_seed: u64,
    pub mode: ComparisonMode,
    pub actions: ActionSource,
}

impl RolloutConfig {
    /// Random actions from a stream independent of the reset streams.
    pub fn new(episodes: u32, base_seed: u64, mode: ComparisonMode) -> Self {
        Self { episodes, base_seed, mode, actions: ActionSource::Random { seed: base_seed ^ ACTION_SALT } }
    }
}

/// First mismatch between two rollouts. Step 0 is the reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub episode_index: u32,
    pub step_index: u32,
    pub field_path: String,
    pub value_a: Value,
    pub value_b: Value,
    /// State of `backend_a` after step `step_index - 1`; `None` when the reset diverged.
    pub last_matching_state: Option<EnvState>,
    /// State of `backend_b` at the same step. Equal to `last_matching_state`
    /// under exact comparison; within tolerance of it otherwise.
    pub last_matching_state_b: Option<EnvState>,
    /// Action applied at `step_index`; `None` when the reset diverged.
    pub action_taken: Option<u32>,
    pub backend_a: String,
    pub backend_b: String,
    pub base_seed: u64,
    pub mode: ComparisonMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub backend_a: String,
    pub backend_b: String,
    pub env: EnvKind,
    pub status: Status,
    pub mode: ComparisonMode,
    pub base_seed: u64,
    pub episodes: u32,
    /// Episodes compared in full; all of them on a pass.
    pub episodes_matched: u32,
    /// Transitions compared, excluding resets.
    pub steps_compared: u64,
    pub divergence: Option<DivergenceReport>,
}

impl RolloutReport {
    pub fn passed(&self) -> bool {
        self.status.passed()
    }
}

struct Mismatch {
    path: String,
    a: Value,
    b: Value,
}

fn compare_outcomes(kind: EnvKind, mode: ComparisonMode, a: &StepOutcome, b: &StepOutcome) -> Option<Mismatch> {
    for (name, (&x, &y)) in kind.obs_names().iter().zip(a.observation.iter().zip(&b.observation)) {
        if !mode.reals_match(x, y) {
            return Some(Mismatch { path: format!("observation.{name}"), a: Value::Real(x), b: Value::Real(y) });
        }
    }
    if !mode.reals_match(a.reward, b.reward) {
        return Some(Mismatch { path: "reward".into(), a: Value::Real(a.reward), b: Value::Real(b.reward) });
    }
    if a.done != b.done {
        return Some(Mismatch { path: "done".into(), a: Value::Bool(a.done), b: Value::Bool(b.done) });
    }
    None
}

fn compare_observations(kind: EnvKind, mode: ComparisonMode, a: &[f32], b: &[f32]) -> Option<Mismatch> {
    let wrap = |obs: &[f32]| StepOutcome { observation: obs.to_vec(), reward: 0.0, done: false };
    compare_outcomes(kind, mode, &wrap(a), &wrap(b))
}

/// Hidden state is compared too, so a divergence is reported at the step
/// that introduced it rather than when it first surfaces in an observation.
fn compare_states(mode: ComparisonMode, a: &EnvState, b: &EnvState) -> Option<Mismatch> {
    a.fields().into_iter().zip(b.fields()).find_map(|((path, x), (_, y))| {
        (!mode.values_match(x, y)).then(|| Mismatch { path: path.to_owned(), a: x, b: y })
    })
}

struct EpisodeResult {
    steps: u64,
    divergence: Option<DivergenceReport>,
}

fn run_episode(
    a: &dyn Backend,
    b: &dyn Backend,
    config: &RolloutConfig,
    episode: u32,
) -> Result<EpisodeResult, VerifyError> {
    let kind = a.kind();
    let mode = config.mode;
    let diverged = |step: u32, m: Mismatch, last: Option<(EnvState, EnvState)>, action: Option<u32>| DivergenceReport {
        episode_index: episode,
        step_index: step,
        field_path: m.path,
        value_a: m.a,
        value_b: m.b,
        last_matching_state: last.as_ref().map(|(a, _)| a.clone()),
        last_matching_state_b: last.map(|(_, b)| b),
        action_taken: action,
        backend_a: a.id().to_owned(),
        backend_b: b.id().to_owned(),
        base_seed: config.base_seed,
        mode,
    };

    let stream = derive_stream(config.base_seed, episode);
    let (mut sa, oa) = a.reset(stream);
    let (mut sb, ob) = b.reset(stream);
    if let Some(m) = compare_observations(kind, mode, &oa, &ob).or_else(|| compare_states(mode, &sa, &sb)) {
        return Ok(EpisodeResult { steps: 0, divergence: Some(diverged(0, m, None, None)) });
    }

    let mut action_rng = match &config.actions {
        ActionSource::Random { seed } => derive_stream(*seed, episode),
        ActionSource::Scripted { .. } => RngState::new(0),
    };
    let mut step: u32 = 0;
    loop {
        let action = match &config.actions {
            ActionSource::Random { .. } => {
                let (next, action) = action_rng.below(a.action_count());
                action_rng = next;
                action
            }
            ActionSource::Scripted { actions } => actions[step as usize % actions.len()],
        };
        step += 1;
        let (na, outa) = a.step(&sa, action)?;
        let (nb, outb) = b.step(&sb, action)?;
        if let Some(m) = compare_outcomes(kind, mode, &outa, &outb).or_else(|| compare_states(mode, &na, &nb)) {
            return Ok(EpisodeResult { steps: step as u64, divergence: Some(diverged(step, m, Some((sa, sb)), Some(action))) });
        }
        sa = na;
        sb = nb;
        if outa.done {
            return Ok(EpisodeResult { steps: step as u64, divergence: None });
        }
    }
}

/// Runs `config.episodes` seed-matched episodes on both backends and reports
/// the first divergence of the lowest-indexed diverging episode.
///
/// Episodes run in parallel; the report is identical to a sequential run.
pub fn compare_rollouts(a: &dyn Backend, b: &dyn Backend, config: &RolloutConfig) -> Result<RolloutReport, VerifyError> {
    if a.kind() != b.kind() || a.obs_len() != b.obs_len() || a.action_count() != b.action_count() {
        return Err(VerifyError::SchemaMismatch {
            a: a.id().to_owned(),
            kind_a: a.kind(),
            b: b.id().to_owned(),
            kind_b: b.kind(),
        });
    }
    if config.episodes == 0 {
        return Err(VerifyError::Malformed { case: "rollout".into(), reason: "episodes must be at least 1".into() });
    }
    if let ActionSource::Scripted { actions } = &config.actions {
        if actions.is_empty() {
            return Err(VerifyError::Malformed { case: "rollout".into(), reason: "scripted actions are empty".into() });
        }
        if let Some(&bad) = actions.iter().find(|&&x| x >= a.action_count()) {
            return Err(VerifyError::Malformed {
                case: "rollout".into(),
                reason: format!("scripted action {bad} outside 0..{}", a.action_count()),
            });
        }
    }

    let results: Vec<EpisodeResult> =
        (0..config.episodes).into_par_iter().map(|i| run_episode(a, b, config, i)).collect::<Result<_, _>>()?;

    let mut steps_compared = 0;
    let mut episodes_matched = 0;
    let mut divergence = None;
    for r in results {
        steps_compared += r.steps;
        if r.divergence.is_some() {
            divergence = r.divergence;
            break;
        }
        episodes_matched += 1;
    }

    Ok(RolloutReport {
        backend_a: a.id().to_owned(),
        backend_b: b.id().to_owned(),
        env: a.kind(),
        status: Status::from_pass(divergence.is_none()),
        mode: config.mode,
        base_seed: config.base_seed,
        episodes: config.episodes,
        episodes_matched,
        steps_compared,
        divergence,
    })
}

/// Re-executes only the diverging step from the report's last matching state
/// and returns the two values of the reported field.
pub fn replay_divergence(
    a: &dyn Backend,
    b: &dyn Backend,
    report: &DivergenceReport,
) -> Result<(Value, Value), VerifyError> {
    let kind = a.kind();
    let (sa, sb, oa, ob) = match (&report.last_matching_state, report.action_taken) {
        (Some(state), Some(action)) => {
            let state_b = report.last_matching_state_b.as_ref().unwrap_or(state);
            let (sa, oa) = a.step(state, action)?;
            let (sb, ob) = b.step(state_b, action)?;
            (sa, sb, oa, ob)
        }
        _ => {
            let stream = derive_stream(report.base_seed, report.episode_index);
            let wrap = |obs| StepOutcome { observation: obs, reward: 0.0, done: false };
            let (sa, oa) = a.reset(stream);
            let (sb, ob) = b.reset(stream);
            (sa, sb, wrap(oa), wrap(ob))
        }
    };
    let value = |s: &EnvState, o: &StepOutcome| super::resolve(kind, s, Some(o), &report.field_path);
    match (value(&sa, &oa), value(&sb, &ob)) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(VerifyError::UnknownField {
            case: "replay".into(),
            path: report.field_path.clone(),
            env: kind,
        }),
    }
}

/// Renders a divergence as plain text for a repair agent: what diverged, the
/// last matching state, and the action taken.
pub fn repair_prompt(report: &DivergenceReport) -> String {
    let step = report.step_index;
    let mut out = String::new();
    let _ = writeln!(out, "Level 3 rollout comparison failed at step {step} of episode {}.", report.episode_index);
    let _ = writeln!(out);
    let _ = writeln!(out, "Divergence:");
    let _ = writeln!(
        out,
        "- Step {step}: {} = {} ({}) vs {} ({})",
        report.field_path, report.value_a, report.backend_a, report.value_b, report.backend_b
    );
    let _ = writeln!(out, "- Comparison mode: {}", report.mode.label());
    if step == 0 {
        let _ = writeln!(out, "- Reset from derive_stream({}, {}) already differs", report.base_seed, report.episode_index);
    } else {
        let _ = writeln!(out, "- All steps 0-{} matched", step - 1);
    }
    let _ = writeln!(out);
    match (&report.last_matching_state, report.action_taken) {
        (Some(state), Some(action)) => {
            let _ = writeln!(out, "State at step {} (last matching):", step - 1);
            for (path, value) in state.fields() {
                let _ = writeln!(out, "- {path} = {value}");
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "Action taken at step {step}: {action}");
        }
        _ => {
            let _ = writeln!(out, "State at step 0 (last matching): none, the reset diverged");
            let _ = writeln!(out);
            let _ = writeln!(out, "Action taken at step 0: none (reset)");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Diagnose the root cause, fix it, and add a targeted Level 1 or Level 2 test that would have caught this failure."
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    fn backend(id: &str) -> std::sync::Arc<dyn Backend> {
        registry::backend(id).unwrap()
    }

    #[test]
    fn pong_twins_match_exactly() {
        let cfg = RolloutConfig::new(20, 0, ComparisonMode::Exact);
        let r = compare_rollouts(backend("pong-ref").as_ref(), backend("pong-perf").as_ref(), &cfg).unwrap();
        assert!(r.passed(), "{:?}", r.divergence);
        assert_eq!(r.episodes_matched, 20);
        assert!(r.steps_compared > 20);
    }

    #[test]
    fn drift_mutant_diverges_after_the_reset() {
        let cfg = RolloutConfig::new(10, 0, ComparisonMode::Exact);
        let a = backend("pong-ref");
        let b = backend(registry::PONG_VX_DECAY);
        let d = compare_rollouts(a.as_ref(), b.as_ref(), &cfg).unwrap().divergence.unwrap();
        assert_eq!(d.episode_index, 0);
        assert!(d.step_index >= 1);
        assert!(["observation.ball_vx", "observation.ball_x", "ball_x", "ball_vx"].contains(&d.field_path.as_str()));
        let (x, y) = replay_divergence(a.as_ref(), b.as_ref(), &d).unwrap();
        assert_eq!((x, y), (d.value_a, d.value_b));
    }

    #[test]
    fn reset_divergence_has_no_prior_state() {
        let cfg = RolloutConfig::new(3, 9, ComparisonMode::epsilon(1e-5));
        let a = backend("cartpole-ref");
        let b = backend(registry::CARTPOLE_RESET_ORDER);
        let d = compare_rollouts(a.as_ref(), b.as_ref(), &cfg).unwrap().divergence.unwrap();
        assert_eq!(d.step_index, 0);
        assert!(d.last_matching_state.is_none() && d.action_taken.is_none());
        let (x, y) = replay_divergence(a.as_ref(), b.as_ref(), &d).unwrap();
        assert_eq!((x, y), (d.value_a, d.value_b));
        assert!(repair_prompt(&d).contains("Action taken at step 0"));
    }

    #[test]
    fn schema_mismatch_and_zero_episodes_are_rejected() {
        let cfg = RolloutConfig::new(1, 0, ComparisonMode::Exact);
        assert!(matches!(
            compare_rollouts(backend("pong-ref").as_ref(), backend("cartpole-ref").as_ref(), &cfg),
            Err(VerifyError::SchemaMismatch { .. })
        ));
        let cfg = RolloutConfig::new(0, 0, ComparisonMode::Exact);
        assert!(compare_rollouts(backend("pong-ref").as_ref(), backend("pong-ref").as_ref(), &cfg).is_err());
    }

    #[test]
    fn scripted_actions_drive_both_sides() {
        let cfg = RolloutConfig {
            actions: ActionSource::Scripted { actions: vec![1, 1, 0] },
            ..RolloutConfig::new(4, 2, ComparisonMode::epsilon(1e-5))
        };
        let r = compare_rollouts(backend("cartpole-ref").as_ref(), backend("cartpole-perf").as_ref(), &cfg).unwrap();
        assert!(r.passed());
        let bad = RolloutConfig { actions: ActionSource::Scripted { actions: vec![2] }, ..cfg };
        assert!(compare_rollouts(backend("cartpole-ref").as_ref(), backend("cartpole-perf").as_ref(), &bad).is_err());
    }

    #[test]
    fn repair_prompt_has_the_three_sections() {
        let cfg = RolloutConfig::new(5, 0, ComparisonMode::Exact);
        let d = compare_rollouts(backend("pong-ref").as_ref(), backend(registry::PONG_VX_DECAY).as_ref(), &cfg)
            .unwrap()
            .divergence
            .unwrap();
        let text = repair_prompt(&d);
        assert!(text.contains("Divergence:"));
        assert!(text.contains(&format!("State at step {} (last matching):", d.step_index - 1)));
        assert!(text.contains(&format!("Action taken at step {}:", d.step_index)));
        assert!(text.contains("- ball_vx = "));
    }

    #[test]
    fn report_json_is_deterministic() {
        let cfg = RolloutConfig::new(8, 1, ComparisonMode::Exact);
        let a = backend("pong-ref");
        let b = backend(registry::PONG_SERVE_STREAM);
        let x = serde_json::to_string(&compare_rollouts(a.as_ref(), b.as_ref(), &cfg).unwrap()).unwrap();
        let y = serde_json::to_string(&compare_rollouts(a.as_ref(), b.as_ref(), &cfg).unwrap()).unwrap();
        assert_eq!(x, y);
    }
}
