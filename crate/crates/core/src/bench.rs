//! Throughput measurement: warm-up plus repeated timed runs, batch-size
//! sweeps, and an env-versus-policy time breakdown against a synthetic
//! dense policy.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Backend, BatchEnv, EnvError};
use crate::rng::{derive_stream, splitmix_mix, RngState};

/// Shortest timed run accepted; shorter runs are dominated by timer noise.
pub const MIN_RUN: Duration = Duration::from_millis(100);
/// A report is stable when its coefficient of variation is at most this.
pub const STABLE_CV: f64 = 0.03;
pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_SWEEP: [usize; 5] = [32, 128, 512, 2048, 8192];
/// Synthetic model scales in multiply-adds per environment per step.
pub const MODEL_SCALES: [u64; 3] = [2_000_000, 20_000_000, 200_000_000];

/// Steps of pre-generated actions; the timed loop cycles through them.
const ACTION_RING_STEPS: usize = 64;
const ACTION_SALT: u64 = 0xB3C4_D5E6_F708_192A;
const CALIBRATION_RETRIES: u32 = 3;
/// Distinct synthetic weights; larger parameter counts cycle through them.
const WEIGHT_BUFFER: usize = 1 << 16;
/// Accumulator width of the synthetic policy's inner loop.
const TILE: usize = 16;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(
        "timed run took {elapsed_ms:.1} ms, under the {min_ms} ms guard; use at least {suggested} steps per run"
    )]
    RunTooShort { elapsed_ms: f64, min_ms: u128, suggested: u64 },
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub batch_size: usize,
    pub steps_per_run: u64,
    pub n_runs: usize,
    pub base_seed: u64,
}

/// Wall-clock measurements; everything outside this object is deterministic.
/// The run length lives here because it may be calibrated from the clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputTiming {
    pub steps_per_run: u64,
    pub warmup_steps: u64,
    /// Hash of every instance's state after the last run.
    pub state_checksum: u64,
    /// Steps per second of each timed run; the warm-up run is excluded.
    pub run_samples: Vec<f64>,
    pub mean_sps: f64,
    pub std_sps: f64,
    pub cv: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub backend_id: String,
    pub batch_size: usize,
    pub n_runs: usize,
    pub base_seed: u64,
    /// Steps per run fixed by the caller; `None` when calibrated.
    pub requested_steps: Option<u64>,
    pub timing: ThroughputTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownTiming {
    pub env_seconds: f64,
    pub policy_seconds: f64,
    pub env_time_fraction: f64,
    pub policy_time_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub backend_id: String,
    pub batch_size: usize,
    pub synthetic_param_count: u64,
    pub steps: u64,
    pub base_seed: u64,
    pub timing: BreakdownTiming,
}

/// Steps per second of one run.
pub fn sps(batch_size: usize, steps: u64, elapsed: Duration) -> f64 {
    batch_size as f64 * steps as f64 / elapsed.as_secs_f64()
}

/// Population mean, sample standard deviation and their ratio.
pub fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt();
    (mean, std, std / mean)
}

struct Driver {
    env: Box<dyn BatchEnv>,
    actions: Vec<u32>,
    cursor: usize,
}

impl Driver {
    fn new(backend: &dyn Backend, batch_size: usize, base_seed: u64) -> Self {
        let streams: Vec<RngState> = (0..batch_size as u32).map(|i| derive_stream(base_seed, i)).collect();
        let mut rng = derive_stream(base_seed ^ ACTION_SALT, 0);
        let n = backend.action_count();
        let actions = (0..ACTION_RING_STEPS * batch_size)
            .map(|_| {
                let (next, a) = rng.below(n);
                rng = next;
                a
            })
            .collect();
        Self { env: backend.batch(&streams), actions, cursor: 0 }
    }

    /// One batched step followed by resets of finished instances. Allocation-free
    /// for the performance backends.
    #[inline]
    fn step(&mut self) -> Result<(), EnvError> {
        let b = self.env.len();
        self.env.step(&self.actions[self.cursor * b..(self.cursor + 1) * b])?;
        self.env.reset_done();
        self.cursor = (self.cursor + 1) % ACTION_RING_STEPS;
        Ok(())
    }

    fn run(&mut self, steps: u64) -> Result<(), EnvError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn checksum(&self) -> u64 {
        let mut h = 0u64;
        for i in 0..self.env.len() {
            for (_, v) in self.env.state(i).fields() {
                let bits = match v {
                    crate::env::Value::Bool(b) => b as u64,
                    crate::env::Value::Int(x) => x as u64,
                    crate::env::Value::Real(r) => r.to_bits() as u64,
                };
                h = splitmix_mix(h ^ bits);
            }
        }
        h
    }
}

fn check_config(config: &BenchConfig) -> Result<(), BenchError> {
    if config.batch_size == 0 {
        return Err(BenchError::Config("batch_size must be at least 1".into()));
    }
    if config.n_runs < 2 {
        return Err(BenchError::Config(format!("n_runs must be at least 2, got {}", config.n_runs)));
    }
    if config.steps_per_run == 0 {
        return Err(BenchError::Config("steps_per_run must be at least 1".into()));
    }
    Ok(())
}

/// One untimed warm-up run, then `n_runs` timed runs continuing from the same
/// instances. Each run must last at least [`MIN_RUN`].
pub fn measure_sps(backend: &dyn Backend, config: &BenchConfig) -> Result<ThroughputReport, BenchError> {
    check_config(config)?;
    let mut driver = Driver::new(backend, config.batch_size, config.base_seed);
    driver.run(config.steps_per_run)?;

    let mut samples = Vec::with_capacity(config.n_runs);
    for _ in 0..config.n_runs {
        let start = Instant::now();
        driver.run(config.steps_per_run)?;
        let elapsed = start.elapsed();
        if elapsed < MIN_RUN {
            let scale = MIN_RUN.as_secs_f64() / elapsed.as_secs_f64().max(1e-9);
            return Err(BenchError::RunTooShort {
                elapsed_ms: elapsed.as_secs_f64() * 1e3,
                min_ms: MIN_RUN.as_millis(),
                suggested: (config.steps_per_run as f64 * scale * 1.5).ceil() as u64,
            });
        }
        samples.push(sps(config.batch_size, config.steps_per_run, elapsed));
    }
    let (mean, std, cv) = summarize(&samples);
    Ok(ThroughputReport {
        backend_id: backend.id().to_owned(),
        batch_size: config.batch_size,
        n_runs: config.n_runs,
        base_seed: config.base_seed,
        requested_steps: Some(config.steps_per_run),
        timing: ThroughputTiming {
            steps_per_run: config.steps_per_run,
            warmup_steps: config.steps_per_run,
            state_checksum: driver.checksum(),
            run_samples: samples,
            mean_sps: mean,
            std_sps: std,
            cv,
            stable: cv <= STABLE_CV,
        },
    })
}

/// Drives the same step sequence as [`measure_sps`] without timing and
/// returns the final state checksum.
pub fn untimed_checksum(backend: &dyn Backend, config: &BenchConfig) -> Result<u64, BenchError> {
    check_config(config)?;
    let mut driver = Driver::new(backend, config.batch_size, config.base_seed);
    driver.run(config.steps_per_run * (config.n_runs as u64 + 1))?;
    Ok(driver.checksum())
}

/// Steps per run expected to take about `target` at this batch size.
pub fn calibrate_steps(
    backend: &dyn Backend,
    batch_size: usize,
    target: Duration,
    base_seed: u64,
) -> Result<u64, BenchError> {
    if batch_size == 0 {
        return Err(BenchError::Config("batch_size must be at least 1".into()));
    }
    let mut driver = Driver::new(backend, batch_size, base_seed);
    let mut steps = 1u64;
    loop {
        let start = Instant::now();
        driver.run(steps)?;
        let elapsed = start.elapsed();
        if elapsed >= Duration::from_millis(20) || steps >= 1 << 30 {
            let per_step = elapsed.as_secs_f64() / steps as f64;
            return Ok(((target.as_secs_f64() / per_step).ceil() as u64).max(1));
        }
        steps *= 2;
    }
}

/// One report per batch size. `steps_per_run = None` calibrates each size to
/// runs of about `2 * MIN_RUN`, and retries with a longer run if one still
/// falls under the guard.
pub fn sweep_batches(
    backend: &dyn Backend,
    batch_sizes: &[usize],
    steps_per_run: Option<u64>,
    n_runs: usize,
    base_seed: u64,
) -> Result<Vec<ThroughputReport>, BenchError> {
    if batch_sizes.is_empty() {
        return Err(BenchError::Config("batch size list is empty".into()));
    }
    if batch_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Config(format!("batch sizes must be strictly ascending: {batch_sizes:?}")));
    }
    batch_sizes
        .iter()
        .map(|&batch_size| {
            let config = |steps_per_run| BenchConfig { batch_size, steps_per_run, n_runs, base_seed };
            let Some(steps) = steps_per_run else {
                let mut steps = calibrate_steps(backend, batch_size, MIN_RUN * 2, base_seed)?;
                let mut retries = 0;
                return loop {
                    match measure_sps(backend, &config(steps)) {
                        Err(BenchError::RunTooShort { suggested, .. }) if retries < CALIBRATION_RETRIES => {
                            steps = suggested.max(steps * 2);
                            retries += 1;
                        }
                        other => break other.map(|r| ThroughputReport { requested_steps: None, ..r }),
                    }
                };
            };
            measure_sps(backend, &config(steps))
        })
        .collect()
}

/// Dense stand-in for a policy network: exactly `param_count` multiply-adds
/// per environment per step, cycling through a fixed weight buffer.
pub struct SyntheticPolicy {
    weights: Vec<f32>,
    param_count: u64,
    obs_len: usize,
}

impl SyntheticPolicy {
    pub fn new(param_count: u64, obs_len: usize, seed: u64) -> Self {
        let mut rng = RngState::new(seed);
        let weights = (0..WEIGHT_BUFFER)
            .map(|_| {
                let (next, u) = rng.uniform();
                rng = next;
                u - 0.5
            })
            .collect();
        Self { weights, param_count, obs_len }
    }

    /// Weight `k` of the stream multiplies input `k % obs_len`.
    fn forward_one(&self, x: &[f32]) -> f32 {
        let n = self.obs_len;
        let mut remaining = self.param_count as usize;
        let mut total = 0.0f32;
        if TILE % n == 0 {
            // Inputs tiled to a fixed width so the lanes accumulate independently.
            let tiled: [f32; TILE] = std::array::from_fn(|k| x[k % n]);
            let mut acc = [0.0f32; TILE];
            while remaining > 0 {
                let take = remaining.min(self.weights.len());
                let (full, rest) = self.weights[..take].split_at(take / TILE * TILE);
                for w in full.chunks_exact(TILE) {
                    for k in 0..TILE {
                        acc[k] += w[k] * tiled[k];
                    }
                }
                total += rest.iter().zip(&tiled).map(|(w, v)| w * v).sum::<f32>();
                remaining -= take;
            }
            total + acc.iter().sum::<f32>()
        } else {
            while remaining > 0 {
                let take = remaining.min(self.weights.len());
                total += self.weights[..take].iter().enumerate().map(|(k, w)| w * x[k % n]).sum::<f32>();
                remaining -= take;
            }
            total
        }
    }

    /// One output per observation row.
    pub fn forward(&self, observations: &[f32], out: &mut [f32]) {
        out.par_iter_mut()
            .zip(observations.par_chunks(self.obs_len))
            .for_each(|(o, x)| *o = self.forward_one(x));
    }
}

/// Alternates batched env steps with synthetic policy compute, timing each
/// phase separately. One untimed iteration precedes the measurement.
pub fn measure_breakdown(
    backend: &dyn Backend,
    batch_size: usize,
    synthetic_param_count: u64,
    steps: u64,
    base_seed: u64,
) -> Result<BreakdownReport, BenchError> {
    if synthetic_param_count == 0 {
        return Err(BenchError::Config("synthetic_param_count must be at least 1".into()));
    }
    if batch_size == 0 || steps == 0 {
        return Err(BenchError::Config("batch_size and steps must be at least 1".into()));
    }
    let obs_len = backend.obs_len();
    let policy = SyntheticPolicy::new(synthetic_param_count, obs_len, base_seed);
    let mut driver = Driver::new(backend, batch_size, base_seed);
    let mut out = vec![0.0f32; batch_size];

    driver.step()?;
    policy.forward(driver.env.observations(), &mut out);

    let (mut env_time, mut policy_time) = (Duration::ZERO, Duration::ZERO);
    for _ in 0..steps {
        let t0 = Instant::now();
        driver.step()?;
        let t1 = Instant::now();
        policy.forward(driver.env.observations(), &mut out);
        black_box(&out);
        let t2 = Instant::now();
        env_time += t1 - t0;
        policy_time += t2 - t1;
    }
    let total = (env_time + policy_time).as_secs_f64();
    let env_fraction = if total > 0.0 { env_time.as_secs_f64() / total } else { 0.5 };
    Ok(BreakdownReport {
        backend_id: backend.id().to_owned(),
        batch_size,
        synthetic_param_count,
        steps,
        base_seed,
        timing: BreakdownTiming {
            env_seconds: env_time.as_secs_f64(),
            policy_seconds: policy_time.as_secs_f64(),
            env_time_fraction: env_fraction,
            policy_time_fraction: 1.0 - env_fraction,
        },
    })
}

/// Aligned text table: backend, batch, mean ± std SPS, cv, stability and
/// speedup over the baseline with the same batch size. A single baseline
/// applies to every row.
pub fn format_table(reports: &[ThroughputReport], baselines: &[ThroughputReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:>7} {:>26} {:>7} {:>8} {:>9}",
        "backend", "batch", "mean ± std SPS", "cv", "stable", "speedup"
    );
    for r in reports {
        let t = &r.timing;
        let baseline = match baselines {
            [only] => Some(only),
            _ => baselines.iter().find(|b| b.batch_size == r.batch_size),
        };
        let speedup =
            baseline.map_or_else(|| "-".to_owned(), |b| format!("{:.2}x", t.mean_sps / b.timing.mean_sps));
        let _ = writeln!(
            out,
            "{:<22} {:>7} {:>26} {:>6.2}% {:>8} {:>9}",
            r.backend_id,
            r.batch_size,
            format!("{:.0} ± {:.0}", t.mean_sps, t.std_sps),
            t.cv * 100.0,
            if t.stable { "yes" } else { "no" },
            speedup
        );
    }
    out
}
