//! `bench`: throughput of `backend_b` against the `backend_a` baseline at
//! each batch size, and optionally the env/policy time breakdown.

use std::fmt::Write as _;

use twinverify::bench::{format_table, measure_breakdown, sweep_batches, BenchError, ThroughputReport, MODEL_SCALES};
use twinverify::registry;

use crate::config::{run_error, usage, CliError, RunConfig};
use crate::document::{BenchOutput, BenchTiming};

/// Multiply-adds spent per breakdown scale; larger models get fewer steps.
const BREAKDOWN_BUDGET: f64 = 2e9;

fn bench_error(e: BenchError) -> CliError {
    match e {
        BenchError::Config(_) | BenchError::RunTooShort { .. } => usage(e.to_string()),
        BenchError::Env(_) => run_error(e),
    }
}

pub fn breakdown_steps(param_count: u64, batch_size: usize) -> u64 {
    ((BREAKDOWN_BUDGET / (param_count as f64 * batch_size as f64)).ceil() as u64).max(2)
}

fn speedup(row: &ThroughputReport, baselines: &[ThroughputReport]) -> Option<f64> {
    baselines
        .iter()
        .find(|b| b.batch_size == row.batch_size)
        .map(|b| row.timing.mean_sps / b.timing.mean_sps)
}

pub fn run(config: &RunConfig, breakdown: bool) -> Result<BenchOutput, CliError> {
    let a = registry::backend(&config.backend_a).expect("resolved ids exist");
    let b = registry::backend(&config.backend_b).expect("resolved ids exist");
    let measure = |backend: &dyn twinverify::Backend| {
        sweep_batches(backend, &config.batches, config.steps, config.runs, config.seed).map_err(bench_error)
    };
    let baseline_rows = if config.backend_a == config.backend_b { Vec::new() } else { measure(a.as_ref())? };
    let rows = measure(b.as_ref())?;
    let breakdown = if breakdown {
        let batch = config.batches[0];
        MODEL_SCALES
            .iter()
            .map(|&p| measure_breakdown(b.as_ref(), batch, p, breakdown_steps(p, batch), config.seed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bench_error)?
    } else {
        Vec::new()
    };
    let all_stable = rows.iter().chain(&baseline_rows).all(|r| r.timing.stable);
    let speedups = rows.iter().map(|r| speedup(r, &baseline_rows)).collect();
    Ok(BenchOutput {
        env: config.env,
        backend_a: config.backend_a.clone(),
        backend_b: config.backend_b.clone(),
        batches: config.batches.clone(),
        n_runs: config.runs,
        base_seed: config.seed,
        requested_steps: config.steps,
        rows,
        baseline_rows,
        breakdown,
        timing: BenchTiming { all_stable, speedups },
    })
}

pub fn render(out: &BenchOutput) -> String {
    let mut text = String::new();
    if !out.baseline_rows.is_empty() {
        text.push_str(&format_table(&out.baseline_rows, &[]));
        let _ = writeln!(text);
    }
    text.push_str(&format_table(&out.rows, &out.baseline_rows));
    if !out.breakdown.is_empty() {
        let _ = writeln!(text);
        let _ = writeln!(text, "{:<22} {:>7} {:>12} {:>7} {:>10} {:>10}", "backend", "batch", "params", "steps", "env %", "policy %");
        for r in &out.breakdown {
            let _ = writeln!(
                text,
                "{:<22} {:>7} {:>12.0e} {:>7} {:>9.3}% {:>9.3}%",
                r.backend_id,
                r.batch_size,
                r.synthetic_param_count as f64,
                r.steps,
                r.timing.env_time_fraction * 100.0,
                r.timing.policy_time_fraction * 100.0
            );
        }
    }
    if !out.timing.all_stable {
        let _ = writeln!(text, "unstable: at least one measurement has cv above 3%");
    }
    text
}
