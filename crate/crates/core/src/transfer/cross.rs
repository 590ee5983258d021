use serde::{Deserialize, Serialize};

use super::{evaluate_policy, train_cem, CemConfig, Policy, TostConfig, TostResult, TransferError, EVAL_EPISODES};
use crate::env::{Backend, ComparisonMode, EnvKind};
use crate::registry;
use crate::verify::{compare_rollouts, DivergenceReport, RolloutConfig, VerifyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainOn {
    Ref,
    Perf,
}

/// How the transferred policy is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Use this policy as is; nothing is trained.
    Fixed { policy: Policy },
    Cem { config: CemConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub train_on: TrainOn,
    pub policy: PolicySpec,
    pub tost: TostConfig,
    pub n_seeds: u32,
    pub episodes_per_seed: u32,
    pub base_seed: u64,
    /// Episodes of L3 rollout comparison run before any training; `None` skips the gate.
    pub l3_gate_episodes: Option<u32>,
    /// Gate tolerance; `None` uses the environment's twin tolerance.
    pub l3_gate_mode: Option<ComparisonMode>,
}

impl TransferConfig {
    pub fn new(policy: PolicySpec, margin_delta: f64) -> Self {
        Self {
            train_on: TrainOn::Perf,
            policy,
            tost: TostConfig::new(margin_delta),
            n_seeds: super::DEFAULT_SEEDS,
            episodes_per_seed: EVAL_EPISODES,
            base_seed: 0,
            l3_gate_episodes: Some(100),
            l3_gate_mode: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    L3,
    Tost,
}

/// One results-table row plus the full test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub env: EnvKind,
    pub policy: String,
    pub train_backend: String,
    pub eval_perf_backend: String,
    pub eval_ref_backend: String,
    pub eval_perf_mean: Option<f64>,
    pub eval_perf_std: Option<f64>,
    pub eval_ref_mean: Option<f64>,
    pub eval_ref_std: Option<f64>,
    pub equivalent: bool,
    /// Per-seed returns identical to the bit on both backends.
    pub bit_identical: bool,
    pub failed_gate: Option<Gate>,
    pub l3_divergence: Option<DivergenceReport>,
    pub tost: Option<TostResult>,
    pub samples_perf: Vec<f64>,
    pub samples_ref: Vec<f64>,
    pub trained_policy: Option<Policy>,
}

/// Obtains a policy on the designated backend, evaluates it on both with the
/// same seeds, and tests the two return samples for equivalence.
pub fn cross_backend_transfer(
    env_ref: &dyn Backend,
    env_perf: &dyn Backend,
    config: &TransferConfig,
) -> Result<TransferReport, TransferError> {
    config.tost.validate()?;
    let kind = env_ref.kind();
    if env_perf.kind() != kind || env_perf.obs_len() != env_ref.obs_len() {
        return Err(VerifyError::SchemaMismatch {
            a: env_ref.id().to_owned(),
            kind_a: kind,
            b: env_perf.id().to_owned(),
            kind_b: env_perf.kind(),
        }
        .into());
    }
    let train_backend = match config.train_on {
        TrainOn::Ref => env_ref,
        TrainOn::Perf => env_perf,
    };
    let policy_name = match &config.policy {
        PolicySpec::Fixed { policy } => policy.name().to_owned(),
        PolicySpec::Cem { .. } => "cem-linear".to_owned(),
    };
    let mut report = TransferReport {
        env: kind,
        policy: policy_name,
        train_backend: train_backend.id().to_owned(),
        eval_perf_backend: env_perf.id().to_owned(),
        eval_ref_backend: env_ref.id().to_owned(),
        eval_perf_mean: None,
        eval_perf_std: None,
        eval_ref_mean: None,
        eval_ref_std: None,
        equivalent: false,
        bit_identical: false,
        failed_gate: None,
        l3_divergence: None,
        tost: None,
        samples_perf: Vec::new(),
        samples_ref: Vec::new(),
        trained_policy: None,
    };

    if let Some(episodes) = config.l3_gate_episodes {
        let gate = RolloutConfig::new(episodes, config.base_seed, config.l3_gate_mode.unwrap_or(registry::default_mode(kind)));
        let l3 = compare_rollouts(env_ref, env_perf, &gate)?;
        if !l3.passed() {
            report.failed_gate = Some(Gate::L3);
            report.l3_divergence = l3.divergence;
            return Ok(report);
        }
    }

    let policy = match &config.policy {
        PolicySpec::Fixed { policy } => policy.clone(),
        PolicySpec::Cem { config: cem } => {
            let trained = train_cem(train_backend, cem)?.policy;
            report.trained_policy = Some(trained.clone());
            trained
        }
    };
    let perf = evaluate_policy(env_perf, &policy, config.n_seeds, config.episodes_per_seed, config.base_seed)?;
    let reference = evaluate_policy(env_ref, &policy, config.n_seeds, config.episodes_per_seed, config.base_seed)?;
    let tost = super::tost_equivalence(&perf, &reference, &config.tost)?;

    report.eval_perf_mean = Some(tost.mean_a);
    report.eval_perf_std = Some(tost.std_a);
    report.eval_ref_mean = Some(tost.mean_b);
    report.eval_ref_std = Some(tost.std_b);
    report.equivalent = tost.equivalent;
    report.bit_identical = perf.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits());
    report.failed_gate = (!tost.equivalent).then_some(Gate::Tost);
    report.tost = Some(tost);
    report.samples_perf = perf;
    report.samples_ref = reference;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pong_tracker_transfer_is_bit_identical() {
        let r = registry::backend("pong-ref").unwrap();
        let p = registry::backend("pong-perf").unwrap();
        let cfg = TransferConfig {
            n_seeds: 4,
            episodes_per_seed: 3,
            l3_gate_episodes: Some(5),
            ..TransferConfig::new(PolicySpec::Fixed { policy: Policy::Tracker }, 1.0)
        };
        let report = cross_backend_transfer(r.as_ref(), p.as_ref(), &cfg).unwrap();
        assert!(report.equivalent && report.bit_identical);
        assert_eq!(report.failed_gate, None);
    }

    #[test]
    fn drift_mutant_fails_the_l3_gate() {
        let r = registry::backend("pong-ref").unwrap();
        let m = registry::backend(registry::PONG_VX_DECAY).unwrap();
        let cfg = TransferConfig::new(PolicySpec::Fixed { policy: Policy::Tracker }, 1.0);
        let report = cross_backend_transfer(r.as_ref(), m.as_ref(), &cfg).unwrap();
        assert!(!report.equivalent);
        assert_eq!(report.failed_gate, Some(Gate::L3));
        assert!(report.l3_divergence.is_some());
    }

    #[test]
    fn mismatched_backends_are_rejected() {
        let r = registry::backend("pong-ref").unwrap();
        let c = registry::backend("cartpole-perf").unwrap();
        let cfg = TransferConfig::new(PolicySpec::Fixed { policy: Policy::Tracker }, 1.0);
        assert!(cross_backend_transfer(r.as_ref(), c.as_ref(), &cfg).is_err());
    }
}
