//! `transfer`: cross-backend policy transfer in both training directions.

use std::fmt::Write as _;

use twinverify::registry;
use twinverify::transfer::{
    cross_backend_transfer, CemConfig, Policy, PolicySpec, TrainOn, TransferConfig, TransferReport, DEFAULT_SEEDS,
    EVAL_EPISODES,
};
use twinverify::verify::Status;
use twinverify::EnvKind;

use crate::config::{run_error, usage, CliError, RunConfig};
use crate::document::{read_document, Document, TransferOutput};
use crate::verify::gate_path;

/// The policy each environment is transferred with.
pub fn policy_for(env: EnvKind, seed: u64) -> PolicySpec {
    match env {
        EnvKind::Pong => PolicySpec::Fixed { policy: Policy::Tracker },
        EnvKind::CartPole => PolicySpec::Cem { config: CemConfig { seed, ..CemConfig::default() } },
    }
}

/// Requires a passing verify artifact for this exact pair unless forced.
fn check_gate(config: &RunConfig) -> Result<(), CliError> {
    if config.force {
        return Ok(());
    }
    let path = gate_path(&config.gate_dir, &config.backend_a, &config.backend_b);
    let refuse = |why: &str| {
        usage(format!(
            "refusing to run transfer: {why}. Run `twinverify verify --backend-a {} --backend-b {}` first, or pass --force",
            config.backend_a, config.backend_b
        ))
    };
    if !path.exists() {
        return Err(refuse(&format!("no passing verify artifact at {}", path.display())));
    }
    match read_document(&path)? {
        Document::Verify(v) if v.status.passed() && v.backend_a == config.backend_a && v.backend_b == config.backend_b => {
            Ok(())
        }
        _ => Err(refuse(&format!("{} is not a passing verify report for this pair", path.display()))),
    }
}

pub fn run(config: &RunConfig) -> Result<TransferOutput, CliError> {
    check_gate(config)?;
    let reference = registry::backend(&config.backend_a).expect("resolved ids exist");
    let perf = registry::backend(&config.backend_b).expect("resolved ids exist");
    let rows = [TrainOn::Ref, TrainOn::Perf]
        .into_iter()
        .map(|train_on| {
            let cfg = TransferConfig {
                train_on,
                policy: policy_for(config.env, config.seed),
                tost: config.tost,
                n_seeds: DEFAULT_SEEDS,
                episodes_per_seed: EVAL_EPISODES,
                base_seed: config.seed,
                l3_gate_episodes: (!config.force).then_some(config.episodes),
                l3_gate_mode: Some(config.mode),
            };
            cross_backend_transfer(reference.as_ref(), perf.as_ref(), &cfg).map_err(run_error)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TransferOutput {
        env: config.env,
        backend_ref: config.backend_a.clone(),
        backend_perf: config.backend_b.clone(),
        forced: config.force,
        status: Status::from_pass(rows.iter().all(|r| r.equivalent)),
        rows,
    })
}

fn mean_std(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        _ => "-".to_owned(),
    }
}

fn verdict(row: &TransferReport) -> String {
    match row.failed_gate {
        None => "equivalent".to_owned(),
        Some(gate) => format!("FAIL ({gate:?} gate)"),
    }
}

pub fn render(out: &TransferOutput) -> String {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<9} {:<11} {:<22} {:>17} {:>17} {:>9} {:>9} {:>13}  {}",
        "env", "policy", "trained on", "perf return", "ref return", "p_lower", "p_upper", "bit-identical", "verdict"
    );
    for r in &out.rows {
        let (pl, pu) = r.tost.as_ref().map_or(("-".into(), "-".into()), |t| {
            (format!("{:.2e}", t.p_lower), format!("{:.2e}", t.p_upper))
        });
        let _ = writeln!(
            text,
            "{:<9} {:<11} {:<22} {:>17} {:>17} {:>9} {:>9} {:>13}  {}",
            r.env.name(),
            r.policy,
            r.train_backend,
            mean_std(r.eval_perf_mean, r.eval_perf_std),
            mean_std(r.eval_ref_mean, r.eval_ref_std),
            pl,
            pu,
            if r.bit_identical { "yes" } else { "no" },
            verdict(r)
        );
        if let Some(d) = &r.l3_divergence {
            let _ = writeln!(
                text,
                "  L3 gate diverged at episode {} step {}: {} = {} vs {}",
                d.episode_index, d.step_index, d.field_path, d.value_a, d.value_b
            );
        }
    }
    if out.forced {
        let _ = writeln!(text, "note: run with --force; the verify gate was not checked");
    }
    let _ = writeln!(text, "result: {}", if out.status.passed() { "pass" } else { "FAIL" });
    text
}
