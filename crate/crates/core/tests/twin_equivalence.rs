use proptest::prelude::*;
use twinverify::cartpole::{cartpole_step, Arithmetic, CartPoleBatch, CartPoleState};
use twinverify::pong::{pong_observe, pong_step, PongBatch, PongState};
use twinverify::registry;
use twinverify::verify::{compare_rollouts, replay_divergence, RolloutConfig};
use twinverify::{ComparisonMode, RngState};

fn pong_state() -> impl Strategy<Value = PongState> {
    (
        (0.0f32..1.0, 0.0f32..1.0, prop::bool::ANY, -0.03f32..0.03),
        (0.1f32..0.9, 0.1f32..0.9, 0u32..5, 0u32..5, 0u32..2000, any::<u64>()),
    )
        .prop_map(|((bx, by, right, vy), (py, oy, pp, op, steps, rng))| PongState {
            ball_x: bx,
            ball_y: by,
            ball_vx: if right { 0.025 } else { -0.025 },
            ball_vy: vy,
            player_y: py,
            opponent_y: oy,
            player_points: pp,
            opponent_points: op,
            step_count: steps,
            rng: RngState::new(rng),
        })
}

fn cartpole_state() -> impl Strategy<Value = CartPoleState> {
    (-2.4f32..2.4, -3.0f32..3.0, -0.21f32..0.21, -3.0f32..3.0, 0u32..500, any::<u64>()).prop_map(
        |(x, x_dot, theta, theta_dot, step_count, rng)| CartPoleState {
            x,
            x_dot,
            theta,
            theta_dot,
            step_count,
            rng: RngState::new(rng),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pong_batch_equals_scalar_bitwise(
        states in prop::collection::vec(pong_state(), 1..600),
        seed in any::<u64>(),
    ) {
        let mut rng = RngState::new(seed);
        let actions: Vec<u32> = states.iter().map(|_| { let (n, a) = rng.below(3); rng = n; a }).collect();
        let mut batch = PongBatch::from_states(&states);
        batch.step(&actions).unwrap();
        for (i, (s, &a)) in states.iter().zip(&actions).enumerate() {
            let (n, out) = pong_step(s, a).unwrap();
            prop_assert_eq!(&batch.state(i), &n);
            let obs = &batch.observations()[i * 8..(i + 1) * 8];
            prop_assert_eq!(obs.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            pong_observe(&n).iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!((batch.rewards()[i], batch.dones()[i]), (out.reward, out.done));
        }
    }

    #[test]
    fn cartpole_batch_agrees_with_scalar(
        states in prop::collection::vec(cartpole_state(), 1..600),
        seed in any::<u64>(),
    ) {
        let mut rng = RngState::new(seed);
        let actions: Vec<u32> = states.iter().map(|_| { let (n, a) = rng.below(2); rng = n; a }).collect();
        let mut exact = CartPoleBatch::from_states(Arithmetic::Reference, &states);
        let mut fast = CartPoleBatch::from_states(Arithmetic::Fast, &states);
        exact.step(&actions).unwrap();
        fast.step(&actions).unwrap();
        for (i, (s, &a)) in states.iter().zip(&actions).enumerate() {
            let (n, out) = cartpole_step(s, a).unwrap();
            prop_assert_eq!(&exact.state(i), &n);
            let f = fast.state(i);
            for (x, y) in f.observation().iter().zip(n.observation()) {
                prop_assert!((x - y).abs() <= 1e-5, "{} vs {}", x, y);
            }
            prop_assert_eq!(exact.dones()[i], out.done);
        }
    }

    #[test]
    fn exact_pass_implies_epsilon_pass(epsilon in 0.0f32..1.0, seed in any::<u64>()) {
        let a = registry::backend("pong-ref").unwrap();
        let b = registry::backend("pong-perf").unwrap();
        prop_assert!(compare_rollouts(a.as_ref(), b.as_ref(), &RolloutConfig::new(3, seed, ComparisonMode::Exact)).unwrap().passed());
        let eps = RolloutConfig::new(3, seed, ComparisonMode::epsilon(epsilon));
        prop_assert!(compare_rollouts(a.as_ref(), b.as_ref(), &eps).unwrap().passed());
    }
}

#[test]
fn pong_twins_agree_exactly_over_100_episodes() {
    let a = registry::backend("pong-ref").unwrap();
    let b = registry::backend("pong-perf").unwrap();
    let report = compare_rollouts(a.as_ref(), b.as_ref(), &RolloutConfig::new(100, 0, ComparisonMode::Exact)).unwrap();
    assert!(report.passed(), "{:?}", report.divergence);
    assert_eq!(report.episodes_matched, 100);
}

#[test]
fn cartpole_twins_agree_within_epsilon_over_100_episodes() {
    let a = registry::backend("cartpole-ref").unwrap();
    let b = registry::backend("cartpole-perf").unwrap();
    let cfg = RolloutConfig::new(100, 0, ComparisonMode::epsilon(1e-5));
    let report = compare_rollouts(a.as_ref(), b.as_ref(), &cfg).unwrap();
    assert!(report.passed(), "{:?}", report.divergence);
    let exact = registry::backend("cartpole-perf-exact").unwrap();
    let report = compare_rollouts(a.as_ref(), exact.as_ref(), &RolloutConfig::new(100, 0, ComparisonMode::Exact)).unwrap();
    assert!(report.passed(), "{:?}", report.divergence);
}

#[test]
fn every_mutant_divergence_replays_in_one_step() {
    for id in registry::backend_ids().into_iter().filter(|id| id.contains("-mut-")) {
        let m = registry::backend(id).unwrap();
        let kind = m.kind();
        let r = registry::backend(registry::reference_id(kind)).unwrap();
        let cfg = RolloutConfig::new(100, 0, registry::default_mode(kind));
        let report = compare_rollouts(r.as_ref(), m.as_ref(), &cfg).unwrap();
        // Mutants aimed at L1 or L2 may survive a rollout comparison.
        let Some(d) = report.divergence else { continue };
        let (x, y) = replay_divergence(r.as_ref(), m.as_ref(), &d).unwrap();
        assert_eq!((x, y), (d.value_a, d.value_b), "{id}");
        assert!(!d.mode.values_match(x, y), "{id}");
    }
}
