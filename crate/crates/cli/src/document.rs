//! JSON documents emitted by each command and read back by `report`.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use twinverify::bench::{BreakdownReport, ThroughputReport};
use twinverify::transfer::TransferReport;
use twinverify::verify::{Level, RolloutReport, Status, SuiteReport};
use twinverify::{ComparisonMode, EnvKind};

use crate::config::{usage, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub env: EnvKind,
    pub backend_a: String,
    pub backend_b: String,
    pub mode: ComparisonMode,
    pub episodes: u32,
    pub base_seed: u64,
    pub status: Status,
    /// First gate that failed; later gates did not run.
    pub failed_phase: Option<Level>,
    pub l1: Option<SuiteReport>,
    pub l2: Option<SuiteReport>,
    pub l3: Option<RolloutReport>,
    pub repair_prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutput {
    pub env: EnvKind,
    pub backend_ref: String,
    pub backend_perf: String,
    pub forced: bool,
    pub status: Status,
    /// One row per training direction: reference first, then performance.
    pub rows: Vec<TransferReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTiming {
    pub all_stable: bool,
    /// Candidate mean SPS over the baseline's at the same batch size.
    pub speedups: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutput {
    pub env: EnvKind,
    pub backend_a: String,
    pub backend_b: String,
    pub batches: Vec<usize>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub requested_steps: Option<u64>,
    /// Measurements of `backend_b`.
    pub rows: Vec<ThroughputReport>,
    /// Measurements of `backend_a`; empty when both ids are the same.
    pub baseline_rows: Vec<ThroughputReport>,
    pub breakdown: Vec<BreakdownReport>,
    pub timing: BenchTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Document {
    Verify(VerifyOutput),
    Transfer(TransferOutput),
    Bench(BenchOutput),
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `value` to `path`, or to stdout for `-`.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = to_json(value);
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes()).map_err(|e| usage(format!("cannot write stdout: {e}")))
    } else {
        std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
    }
}

pub fn read_document(path: &Path) -> Result<Document, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: cannot read: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: not a twinverify report: {e}", path.display())))
}
