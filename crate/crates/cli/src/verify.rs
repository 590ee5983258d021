//! `verify`: L1, L2 and L3 as sequential gates against `backend_b`, with
//! `backend_a` as the trusted side of the rollout comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use twinverify::registry;
use twinverify::verify::{
    compare_rollouts, repair_prompt, run_interaction_suite, run_property_suite, suites, Level, RolloutConfig,
    Status, SuiteReport,
};

use crate::config::{run_error, CliError, RunConfig};
use crate::document::{to_json, Document, VerifyOutput};

/// Artifact that `transfer` looks for before running.
pub fn gate_path(dir: &Path, backend_a: &str, backend_b: &str) -> PathBuf {
    dir.join(format!("l3-{backend_a}-vs-{backend_b}.json"))
}

pub fn run(config: &RunConfig) -> Result<VerifyOutput, CliError> {
    let a = registry::backend(&config.backend_a).expect("resolved ids exist");
    let b = registry::backend(&config.backend_b).expect("resolved ids exist");
    let mut out = VerifyOutput {
        env: config.env,
        backend_a: config.backend_a.clone(),
        backend_b: config.backend_b.clone(),
        mode: config.mode,
        episodes: config.episodes,
        base_seed: config.seed,
        status: Status::Fail,
        failed_phase: None,
        l1: None,
        l2: None,
        l3: None,
        repair_prompt: None,
    };

    let l1 = run_property_suite("l1-properties", b.as_ref(), &suites::property_cases(config.env)).map_err(run_error)?;
    let l1_passed = l1.passed();
    out.l1 = Some(l1);
    if !l1_passed {
        out.failed_phase = Some(Level::L1);
        return Ok(out);
    }

    let l2 = run_interaction_suite("l2-interactions", b.as_ref(), &suites::interaction_scenarios(config.env))
        .map_err(run_error)?;
    let l2_passed = l2.passed();
    out.l2 = Some(l2);
    if !l2_passed {
        out.failed_phase = Some(Level::L2);
        return Ok(out);
    }

    let rollout = RolloutConfig::new(config.episodes, config.seed, config.mode);
    let l3 = compare_rollouts(a.as_ref(), b.as_ref(), &rollout).map_err(run_error)?;
    if let Some(d) = &l3.divergence {
        out.failed_phase = Some(Level::L3);
        out.repair_prompt = Some(repair_prompt(d));
    } else {
        out.status = Status::Pass;
    }
    out.l3 = Some(l3);
    Ok(out)
}

/// Records a pass for `transfer`; a failure removes any earlier artifact.
pub fn update_gate(config: &RunConfig, out: &VerifyOutput) -> Result<(), CliError> {
    let path = gate_path(&config.gate_dir, &config.backend_a, &config.backend_b);
    if out.status.passed() {
        std::fs::create_dir_all(&config.gate_dir)
            .and_then(|_| std::fs::write(&path, to_json(&Document::Verify(out.clone()))))
            .map_err(|e| run_error(format!("cannot write gate artifact {}: {e}", path.display())))
    } else {
        match std::fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
                Err(run_error(format!("cannot remove stale gate artifact {}: {e}", path.display())))
            }
            _ => Ok(()),
        }
    }
}

fn suite_line(out: &mut String, label: &str, unit: &str, suite: &SuiteReport) {
    let _ = writeln!(
        out,
        "{label:<15} {:<5} {}/{} {unit} on {}",
        if suite.passed() { "pass" } else { "FAIL" },
        suite.passed,
        suite.cases,
        suite.backend
    );
    for d in &suite.diffs {
        let actual = d.actual.map_or_else(|| "nothing".to_owned(), |v| v.to_string());
        let after = d.after_op.map(|i| format!(" after op {i}")).unwrap_or_default();
        let _ = writeln!(out, "  {}: {}{after} expected {}, got {actual}", d.case, d.path, d.expected);
    }
    for e in &suite.errors {
        let _ = writeln!(out, "  {}: error: {}", e.case, e.message);
    }
}

pub fn render(out: &VerifyOutput) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "verify {} vs {} ({})", out.backend_a, out.backend_b, out.env);
    let skipped = |text: &mut String, label: &str| {
        let _ = writeln!(text, "{label:<15} skipped");
    };
    match &out.l1 {
        Some(s) => suite_line(&mut text, "L1 properties", "cases", s),
        None => skipped(&mut text, "L1 properties"),
    }
    match &out.l2 {
        Some(s) => suite_line(&mut text, "L2 interactions", "scenarios", s),
        None => skipped(&mut text, "L2 interactions"),
    }
    match &out.l3 {
        Some(r) => {
            let _ = writeln!(
                text,
                "{:<15} {:<5} {}/{} episodes, {} steps, {}",
                "L3 rollouts",
                if r.passed() { "pass" } else { "FAIL" },
                r.episodes_matched,
                r.episodes,
                r.steps_compared,
                r.mode.label()
            );
        }
        None => skipped(&mut text, "L3 rollouts"),
    }
    match out.failed_phase {
        Some(level) => {
            let _ = writeln!(text, "result: FAIL at {level}");
        }
        None => {
            let _ = writeln!(text, "result: pass");
        }
    }
    if let Some(prompt) = &out.repair_prompt {
        let _ = writeln!(text);
        text.push_str(prompt);
    }
    text
}
