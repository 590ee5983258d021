//! `report`: merges verify, transfer and bench documents into one markdown
//! summary with a row per environment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use twinverify::bench::format_table;
use twinverify::EnvKind;

use crate::config::CliError;
use crate::document::{read_document, BenchOutput, Document, TransferOutput, VerifyOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCount {
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub env: EnvKind,
    pub backend_a: Option<String>,
    pub backend_b: Option<String>,
    pub l1: Option<SuiteCount>,
    pub l2: Option<SuiteCount>,
    pub l3_episodes: Option<u32>,
    pub l3_passed: Option<bool>,
    pub mode: Option<String>,
    pub transfer_equivalent: Option<bool>,
    /// Every present verdict passed and a verify report was given.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub bench: Vec<BenchOutput>,
}

#[derive(Default)]
struct Merged {
    verify: BTreeMap<&'static str, VerifyOutput>,
    transfer: BTreeMap<&'static str, TransferOutput>,
    bench: Vec<BenchOutput>,
}

/// Later files win for the same environment; each replacement is returned as a warning.
fn merge(paths: &[PathBuf]) -> Result<(Merged, Vec<String>), CliError> {
    let mut merged = Merged::default();
    let mut warnings = Vec::new();
    for path in paths {
        let replaced = match read_document(path)? {
            Document::Verify(v) => merged.verify.insert(v.env.name(), v).map(|old| ("verify", old.env)),
            Document::Transfer(t) => merged.transfer.insert(t.env.name(), t).map(|old| ("transfer", old.env)),
            Document::Bench(b) => {
                merged.bench.push(b);
                None
            }
        };
        if let Some((kind, env)) = replaced {
            warnings.push(format!("{}: replaces an earlier {kind} report for {env}", path.display()));
        }
    }
    Ok((merged, warnings))
}

fn summarize(merged: Merged) -> Summary {
    let mut envs: Vec<&'static str> = merged.verify.keys().chain(merged.transfer.keys()).copied().collect();
    envs.sort_unstable();
    envs.dedup();
    let rows = envs
        .into_iter()
        .map(|name| {
            let v = merged.verify.get(name);
            let t = merged.transfer.get(name);
            let count = |s: &twinverify::verify::SuiteReport| SuiteCount { passed: s.passed, total: s.cases };
            let transfer_equivalent = t.map(|t| t.status.passed());
            SummaryRow {
                env: EnvKind::parse(name).expect("names come from EnvKind"),
                backend_a: v.map(|v| v.backend_a.clone()).or_else(|| t.map(|t| t.backend_ref.clone())),
                backend_b: v.map(|v| v.backend_b.clone()).or_else(|| t.map(|t| t.backend_perf.clone())),
                l1: v.and_then(|v| v.l1.as_ref()).map(count),
                l2: v.and_then(|v| v.l2.as_ref()).map(count),
                l3_episodes: v.and_then(|v| v.l3.as_ref()).map(|r| r.episodes),
                l3_passed: v.and_then(|v| v.l3.as_ref()).map(|r| r.passed()),
                mode: v.map(|v| v.mode.label()),
                transfer_equivalent,
                passed: v.is_some_and(|v| v.status.passed()) && transfer_equivalent != Some(false),
            }
        })
        .collect();
    Summary { rows, bench: merged.bench }
}

pub fn run(paths: &[PathBuf]) -> Result<(Summary, Vec<String>), CliError> {
    let (merged, warnings) = merge(paths)?;
    Ok((summarize(merged), warnings))
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "✓"
    } else {
        "✗"
    }
}

fn suite_cell(count: &Option<SuiteCount>) -> String {
    match count {
        Some(c) if c.passed == c.total => format!("{} {}", c.total, mark(true)),
        Some(c) => format!("{}/{} {}", c.passed, c.total, mark(false)),
        None => "–".to_owned(),
    }
}

pub fn render(summary: &Summary) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "## Verification summary");
    let _ = writeln!(text);
    let _ = writeln!(text, "| Env | Backends | L1 | L2 | L3 ep. | Mode | Xfer | Status |");
    let _ = writeln!(text, "|---|---|---|---|---|---|---|---|");
    for r in &summary.rows {
        let backends = match (&r.backend_a, &r.backend_b) {
            (Some(a), Some(b)) => format!("{a} / {b}"),
            _ => "–".to_owned(),
        };
        let l3 = match (r.l3_episodes, r.l3_passed) {
            (Some(n), Some(ok)) => format!("{n} {}", mark(ok)),
            _ => "–".to_owned(),
        };
        let _ = writeln!(
            text,
            "| {} | {backends} | {} | {} | {l3} | {} | {} | {} |",
            r.env,
            suite_cell(&r.l1),
            suite_cell(&r.l2),
            r.mode.as_deref().unwrap_or("–"),
            r.transfer_equivalent.map_or("–", mark),
            mark(r.passed)
        );
    }
    for b in &summary.bench {
        let _ = writeln!(text);
        let _ = writeln!(text, "## Throughput: {} vs {} ({})", b.backend_b, b.backend_a, b.env);
        let _ = writeln!(text);
        let _ = writeln!(text, "```");
        if !b.baseline_rows.is_empty() {
            text.push_str(&format_table(&b.baseline_rows, &[]));
        }
        text.push_str(&format_table(&b.rows, &b.baseline_rows));
        let _ = writeln!(text, "```");
    }
    text
}
