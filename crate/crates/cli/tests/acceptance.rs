//! Acceptance suite: one line per criterion. Runs as a plain binary so the
//! lines always print; exits nonzero if an enforced criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value as Json;
use twinverify::bench::{measure_breakdown, sweep_batches, MODEL_SCALES, STABLE_CV};
use twinverify::registry;
use twinverify::transfer::{
    cross_backend_transfer, evaluate_policy, tost_equivalence, CemConfig, Policy, PolicySpec, TostConfig, TrainOn,
    TransferConfig,
};
use twinverify::verify::{compare_rollouts, registered_mutants, run_mutation_matrix, BugClass, RolloutConfig};
use twinverify::ComparisonMode;

struct Outcome {
    passed: bool,
    detail: String,
    /// Why a measured failure is not held against this machine.
    unenforced: Option<String>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail, unenforced: None }
    }
}

fn criterion(n: u32, title: &str, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = check();
    let secs = start.elapsed().as_secs_f64();
    let verdict = if o.passed { "PASS" } else { "FAIL" };
    let mut line = format!("criterion {n} {verdict} {title}: {} [{secs:.1} s]", o.detail);
    if let (false, Some(why)) = (o.passed, &o.unenforced) {
        line.push_str(&format!(" (not enforced: {why})"));
    }
    println!("{line}");
    o.passed || o.unenforced.is_some()
}

fn rollout_twins(env: &str, mode: ComparisonMode, limit: Duration) -> Outcome {
    let kind = twinverify::EnvKind::parse(env).unwrap();
    let a = registry::backend(registry::reference_id(kind)).unwrap();
    let b = registry::backend(registry::perf_id(kind)).unwrap();
    let start = Instant::now();
    let r = compare_rollouts(a.as_ref(), b.as_ref(), &RolloutConfig::new(100, 0, mode)).unwrap();
    let elapsed = start.elapsed();
    Outcome::new(
        r.passed() && r.episodes_matched == 100 && elapsed < limit,
        format!(
            "{} vs {}, {}/100 episodes, {} steps, {} divergences, mode {}, {:.2} s (limit {} s)",
            a.id(),
            b.id(),
            r.episodes_matched,
            r.steps_compared,
            usize::from(r.divergence.is_some()),
            r.mode.label(),
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn mutation_matrix() -> Outcome {
    let mutants = registered_mutants();
    let per_class = |classes: &[BugClass]| mutants.iter().filter(|m| classes.contains(&m.bug_class)).count();
    let counts =
        [per_class(&[BugClass::Arithmetic]), per_class(&[BugClass::Ordering]), per_class(&[BugClass::Drift, BugClass::Reset])];
    let m = run_mutation_matrix(&mutants, 100, 0).unwrap();
    let wrong: Vec<String> = m
        .rows
        .iter()
        .filter(|r| !r.status.passed())
        .map(|r| format!("{} expected {} caught {:?}", r.id, r.expected_catch_level, r.caught_at))
        .collect();
    Outcome::new(
        mutants.len() >= 6 && counts.iter().all(|&c| c >= 2) && m.status.passed() && m.kill_gaps.is_empty(),
        format!(
            "{} mutants (arithmetic {}, ordering {}, drift/reset {}), {} at the expected level, kill gaps {:?}{}",
            mutants.len(),
            counts[0],
            counts[1],
            counts[2],
            m.rows.len() - wrong.len(),
            m.kill_gaps,
            if wrong.is_empty() { String::new() } else { format!(", mismatches {wrong:?}") }
        ),
    )
}

fn pong_transfer() -> Outcome {
    let r = registry::backend("pong-ref").unwrap();
    let p = registry::backend("pong-perf").unwrap();
    let cfg = TransferConfig::new(PolicySpec::Fixed { policy: Policy::Tracker }, 1.0);
    let rep = cross_backend_transfer(r.as_ref(), p.as_ref(), &cfg).unwrap();
    let t = rep.tost.as_ref().unwrap();
    Outcome::new(
        rep.bit_identical && rep.equivalent && rep.samples_perf.len() == 10 && t.alpha == 0.05,
        format!(
            "tracker, 10 seeds x 20 episodes, bit-identical {}, mean {:.3} vs {:.3}, p = ({:.3e}, {:.3e}), delta 1.0, equivalent {}",
            rep.bit_identical, t.mean_a, t.mean_b, t.p_lower, t.p_upper, rep.equivalent
        ),
    )
}

fn cartpole_transfer() -> Outcome {
    let start = Instant::now();
    let r = registry::backend("cartpole-ref").unwrap();
    let p = registry::backend("cartpole-perf").unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for train_on in [TrainOn::Ref, TrainOn::Perf] {
        let cem = CemConfig { generations: 30, population: 64, elite_frac: 0.125, ..CemConfig::default() };
        let cfg = TransferConfig { train_on, ..TransferConfig::new(PolicySpec::Cem { config: cem }, 25.0) };
        let rep = cross_backend_transfer(r.as_ref(), p.as_ref(), &cfg).unwrap();
        let policy = rep.trained_policy.clone().unwrap();
        let train = if train_on == TrainOn::Ref { r.as_ref() } else { p.as_ref() };
        // 10 seeds x 10 episodes from a seed unused by training or the transfer test.
        let returns = evaluate_policy(train, &policy, 10, 10, 1_000).unwrap();
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        ok &= mean >= 475.0 && rep.equivalent;
        parts.push(format!(
            "trained on {}: 100-episode mean {mean:.1}, transfer {:.1} vs {:.1}, equivalent {}",
            train.id(),
            rep.eval_perf_mean.unwrap_or(f64::NAN),
            rep.eval_ref_mean.unwrap_or(f64::NAN),
            rep.equivalent
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    Outcome::new(ok, format!("{}; {:.1} s (limit 300 s)", parts.join("; "), elapsed.as_secs_f64()))
}

fn throughput(threads: usize) -> Outcome {
    let r = registry::backend("pong-ref").unwrap();
    let p = registry::backend("pong-perf").unwrap();
    let ref_report = sweep_batches(r.as_ref(), &[2048], None, 5, 0).unwrap().remove(0);
    let perf_report = sweep_batches(p.as_ref(), &[2048], None, 5, 0).unwrap().remove(0);
    let ratio = perf_report.timing.mean_sps / ref_report.timing.mean_sps;
    let stable = ref_report.timing.cv <= STABLE_CV && perf_report.timing.cv <= STABLE_CV;
    let mut o = Outcome::new(
        stable && ratio >= 5.0,
        format!(
            "batch 2048, 5 runs: pong-ref {:.3e} SPS cv {:.2}%, pong-perf {:.3e} SPS cv {:.2}%, speedup {ratio:.2}x (need cv <= 3%, speedup >= 5x)",
            ref_report.timing.mean_sps,
            ref_report.timing.cv * 100.0,
            perf_report.timing.mean_sps,
            perf_report.timing.cv * 100.0
        ),
    );
    if threads < 8 {
        o.unenforced = Some(format!("requires an idle machine with >= 8 hardware threads, found {threads}"));
    }
    o
}

fn breakdown() -> Outcome {
    let batch = 32;
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ["pong-perf", "cartpole-perf"] {
        let b = registry::backend(id).unwrap();
        let fractions: Vec<f64> = MODEL_SCALES
            .iter()
            .map(|&p| {
                let steps = ((2e9 / (p as f64 * batch as f64)).ceil() as u64).max(2);
                measure_breakdown(b.as_ref(), batch, p, steps, 0).unwrap().timing.env_time_fraction
            })
            .collect();
        let decreasing = fractions.windows(2).all(|w| w[1] < w[0]);
        let last = fractions[fractions.len() - 1];
        ok &= decreasing && last <= 0.10;
        parts.push(format!(
            "{id} env fractions {}",
            fractions.iter().map(|f| format!("{f:.2e}")).collect::<Vec<_>>().join(" > ")
        ));
    }
    Outcome::new(ok, format!("batch {batch}, scales 2e6/2e7/2e8: {} (need strictly decreasing, last <= 0.10)", parts.join("; ")))
}

/// Student-t CDF by Simpson quadrature of cos^(df-1) after t = sqrt(df) tan(theta).
fn oracle_cdf(t: f64, df: f64) -> f64 {
    let f = |theta: f64| theta.cos().max(0.0).powf(df - 1.0);
    let simpson = |a: f64, b: f64| {
        let n = 200_000;
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
        (f(a) + f(b) + inner) * h / 3.0
    };
    let theta = (t / df.sqrt()).atan();
    let total = simpson(-FRAC_PI_2, FRAC_PI_2);
    if theta <= 0.0 {
        simpson(-FRAC_PI_2, theta) / total
    } else {
        1.0 - simpson(theta, FRAC_PI_2) / total
    }
}

fn tost_suite() -> Outcome {
    let c = 0.1 * (99.0f64 / 100.0).sqrt();
    let high_n = |mean: f64| -> Vec<f64> { (0..100).map(|i| if i % 2 == 0 { mean + c } else { mean - c }).collect() };
    let cases = [
        ("n=3 underpowered", vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], 1.0, false),
        ("n=100 close means", high_n(10.0), high_n(10.01), 1.0, true),
        ("SE=0 identical", vec![5.0; 3], vec![5.0; 3], 1.0, true),
    ];
    let mut worst = 0.0f64;
    let mut ok = true;
    for (_, a, b, delta, expect) in &cases {
        let r = tost_equivalence(a, b, &TostConfig::new(*delta)).unwrap();
        ok &= r.equivalent == *expect;
        match (r.t_lower, r.t_upper, r.df) {
            (Some(tl), Some(tu), Some(df)) => {
                worst = worst.max((r.p_lower - (1.0 - oracle_cdf(tl, df))).abs());
                worst = worst.max((r.p_upper - oracle_cdf(tu, df)).abs());
            }
            _ => ok &= r.degenerate && r.p_lower == 0.0 && r.p_upper == 0.0,
        }
    }
    ok &= worst <= 1e-6;
    Outcome::new(ok, format!("3 worked examples, verdicts as expected {ok}, max |p - oracle| = {worst:.2e} (limit 1e-6)"))
}

fn cli(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_twinverify")).current_dir(dir).args(args).output().unwrap();
    out.status.code().unwrap_or(-1)
}

fn strip_timing(v: &mut Json) {
    match v {
        Json::Object(map) => {
            map.remove("timing");
            map.values_mut().for_each(strip_timing);
        }
        Json::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let runs: [(&str, &[&str]); 8] = [
        ("verify pong", &["verify"]),
        ("verify cartpole", &["verify", "--env", "cartpole"]),
        ("verify mutant", &["verify", "--backend-b", "pong-mut-vx-decay"]),
        ("transfer pong", &["transfer"]),
        ("transfer cartpole", &["transfer", "--env", "cartpole"]),
        ("bench fixed steps", &["bench", "--batches", "64", "--runs", "2", "--steps", "400000"]),
        ("bench calibrated", &["bench", "--env", "cartpole", "--batches", "64", "--runs", "2", "--breakdown"]),
        ("report", &["report", "verify pong-1.json", "transfer cartpole-1.json", "bench fixed steps-1.json"]),
    ];
    let mut mismatched = Vec::new();
    for (name, args) in runs {
        for rep in 1..=2 {
            let json = format!("{name}-{rep}.json");
            let code = cli(d, &[args, &["--json", &json]].concat());
            if !matches!(code, 0 | 1 | 3) {
                mismatched.push(format!("{name} exited {code}"));
            }
        }
        let read = |rep: u32| std::fs::read_to_string(d.join(format!("{name}-{rep}.json"))).unwrap_or_default();
        let (first, second) = (read(1), read(2));
        let identical = if name.starts_with("bench") || name == "report" {
            let parse = |s: &str| -> Json {
                let mut v = serde_json::from_str(s).unwrap_or(Json::Null);
                strip_timing(&mut v);
                v
            };
            let (a, b) = (parse(&first), parse(&second));
            !a.is_null() && serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap()
        } else {
            !first.is_empty() && first == second
        };
        if !identical {
            mismatched.push(name.to_owned());
        }
    }
    Outcome::new(
        mismatched.is_empty(),
        format!("8 commands run twice; timing sub-objects excluded for bench and report; mismatches {mismatched:?}"),
    )
}

fn main() {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    println!("acceptance suite on {threads} hardware thread(s)");
    let results = [
        criterion(1, "L3 exact twin equivalence (pong)", || {
            rollout_twins("pong", ComparisonMode::Exact, Duration::from_secs(10))
        }),
        criterion(2, "L3 epsilon twin equivalence (cartpole)", || {
            rollout_twins("cartpole", ComparisonMode::epsilon(1e-5), Duration::from_secs(10))
        }),
        criterion(3, "mutation matrix", mutation_matrix),
        criterion(4, "L4 transfer (pong)", pong_transfer),
        criterion(5, "L4 transfer (cartpole)", cartpole_transfer),
        criterion(6, "throughput protocol", || throughput(threads)),
        criterion(7, "breakdown monotonicity", breakdown),
        criterion(8, "TOST unit suite", tost_suite),
        criterion(9, "determinism", determinism),
    ];
    if results.iter().any(|ok| !ok) {
        std::process::exit(1);
    }
}
