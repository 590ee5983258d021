use std::time::Duration;

use twinverify::bench::{
    calibrate_steps, format_table, measure_breakdown, measure_sps, sweep_batches, untimed_checksum, BenchConfig,
    BenchError, MIN_RUN,
};
use twinverify::registry;

fn config(backend: &str, batch_size: usize) -> BenchConfig {
    let b = registry::backend(backend).unwrap();
    let steps_per_run = calibrate_steps(b.as_ref(), batch_size, MIN_RUN.mul_f64(1.5), 3).unwrap();
    BenchConfig { batch_size, steps_per_run, n_runs: 2, base_seed: 3 }
}

#[test]
fn timing_does_not_change_what_is_simulated() {
    for (id, batch) in [("pong-perf", 64), ("cartpole-perf", 300), ("pong-ref", 8)] {
        let b = registry::backend(id).unwrap();
        let cfg = config(id, batch);
        let report = measure_sps(b.as_ref(), &cfg).unwrap();
        assert_eq!(report.timing.state_checksum, untimed_checksum(b.as_ref(), &cfg).unwrap(), "{id}");
        assert_eq!(report.timing.run_samples.len(), 2);
        assert_eq!(report.timing.warmup_steps, cfg.steps_per_run);
    }
}

#[test]
fn twins_simulate_the_same_pong_instances() {
    let cfg = BenchConfig { batch_size: 16, steps_per_run: 200, n_runs: 3, base_seed: 11 };
    let r = registry::backend("pong-ref").unwrap();
    let p = registry::backend("pong-perf").unwrap();
    assert_eq!(untimed_checksum(r.as_ref(), &cfg).unwrap(), untimed_checksum(p.as_ref(), &cfg).unwrap());
}

#[test]
fn single_size_sweep_and_table() {
    let b = registry::backend("pong-perf").unwrap();
    let reports = sweep_batches(b.as_ref(), &[128], None, 2, 0).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].batch_size, 128);
    let table = format_table(&reports, &reports);
    assert!(table.contains("pong-perf") && table.contains("1.00x"), "{table}");
    assert!(matches!(sweep_batches(b.as_ref(), &[128, 64], None, 2, 0), Err(BenchError::Config(_))));
}

#[test]
fn breakdown_fractions_partition_the_time() {
    let b = registry::backend("cartpole-perf").unwrap();
    let small = measure_breakdown(b.as_ref(), 64, 16, 50, 0).unwrap();
    let large = measure_breakdown(b.as_ref(), 64, 2_000_000, 4, 0).unwrap();
    for r in [&small, &large] {
        let t = &r.timing;
        assert!((t.env_time_fraction + t.policy_time_fraction - 1.0).abs() < 1e-12);
        assert!(t.env_seconds > 0.0 && t.policy_seconds > 0.0);
    }
    // Two million multiply-adds per instance dwarf a CartPole step.
    assert!(large.timing.policy_time_fraction > 0.9, "{:?}", large.timing);
    assert!(large.timing.policy_time_fraction > small.timing.policy_time_fraction);
}

#[test]
#[ignore = "timing sensitive; run on an idle machine"]
fn repeated_measurements_are_consistent() {
    let b = registry::backend("pong-perf").unwrap();
    let cfg = BenchConfig { n_runs: 5, ..config("pong-perf", 2048) };
    let first = measure_sps(b.as_ref(), &cfg).unwrap();
    let second = measure_sps(b.as_ref(), &cfg).unwrap();
    let ratio = first.timing.mean_sps / second.timing.mean_sps;
    assert!((0.8..1.25).contains(&ratio), "{ratio}");
    assert!(first.timing.run_samples.iter().all(|&s| s > 0.0));
    assert!(Duration::from_secs_f64(cfg.steps_per_run as f64 * 2048.0 / first.timing.mean_sps) >= MIN_RUN);
}
