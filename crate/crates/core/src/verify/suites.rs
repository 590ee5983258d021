//! Built-in L1 cases and L2 scenarios for both environments.
//!
//! Every expected value is computed by hand from the transition rules. Cases
//! avoid asserting quantities that only a drifting or reset-level defect would
//! change (exact `ball_vx`, serve draws, reset draws); those belong to L3.

use super::{Assertion, FieldCheck, InteractionScenario, Op, PropertyCase};
use crate::cartpole::{self, CartPoleState};
use crate::env::{ComparisonMode, EnvKind, EnvState};
use crate::pong::{self, PongState};
use crate::rng::RngState;

/// Pong expectations are decimal literals; allow their `f32` rounding.
const PONG_EPS: f32 = 1e-6;
const CARTPOLE_EPS: f32 = 1e-5;

pub fn property_cases(kind: EnvKind) -> Vec<PropertyCase> {
    match kind {
        EnvKind::Pong => pong_cases(),
        EnvKind::CartPole => cartpole_cases(),
    }
}

pub fn interaction_scenarios(kind: EnvKind) -> Vec<InteractionScenario> {
    match kind {
        EnvKind::Pong => pong_scenarios(),
        EnvKind::CartPole => cartpole_scenarios(),
    }
}

fn pong_state(f: impl FnOnce(&mut PongState)) -> EnvState {
    let mut s = PongState::centered(0.0, RngState::new(0x5EED));
    s.ball_vx = pong::BALL_VX;
    f(&mut s);
    EnvState::Pong(s)
}

fn pong_case(name: &str, setup: EnvState, action: u32, expected: Vec<FieldCheck>) -> PropertyCase {
    PropertyCase { name: name.to_owned(), setup, action, expected, mode: ComparisonMode::epsilon(PONG_EPS) }
}

fn pong_cases() -> Vec<PropertyCase> {
    use pong::{ACTION_DOWN, ACTION_STAY, ACTION_UP};
    vec![
        pong_case(
            "free_flight",
            pong_state(|_| {}),
            ACTION_STAY,
            vec![
                FieldCheck::equals("ball_x", 0.525f32),
                FieldCheck::equals("ball_y", 0.5f32),
                FieldCheck::equals("reward", 0.0f32),
                FieldCheck::equals("done", false),
            ],
        ),
        pong_case(
            "wall_bounce_bottom",
            pong_state(|s| {
                s.ball_y = 0.005;
                s.ball_vy = -0.01;
            }),
            ACTION_STAY,
            vec![FieldCheck::equals("ball_y", 0.005f32), FieldCheck::equals("ball_vy", 0.01f32)],
        ),
        pong_case(
            "wall_bounce_top",
            pong_state(|s| {
                s.ball_y = 0.995;
                s.ball_vy = 0.01;
            }),
            ACTION_STAY,
            vec![FieldCheck::equals("ball_y", 0.995f32), FieldCheck::equals("ball_vy", -0.01f32)],
        ),
        pong_case(
            "player_up_clamps",
            pong_state(|s| s.player_y = 0.88),
            ACTION_UP,
            vec![FieldCheck::equals("player_y", 0.9f32), FieldCheck::equals("observation.player_y", 1.0f32)],
        ),
        pong_case(
            "player_down",
            pong_state(|_| {}),
            ACTION_DOWN,
            vec![FieldCheck::equals("player_y", 0.46f32), FieldCheck::equals("observation.player_y", 0.45f32)],
        ),
        pong_case(
            "player_floor",
            pong_state(|s| s.player_y = 0.1),
            ACTION_DOWN,
            vec![FieldCheck::equals("player_y", 0.1f32), FieldCheck::equals("observation.player_y", 0.0f32)],
        ),
        pong_case(
            "opponent_speed_limit",
            pong_state(|s| s.ball_y = 0.8),
            ACTION_STAY,
            vec![FieldCheck::equals("opponent_y", 0.53f32)],
        ),
        pong_case(
            "opponent_closes_small_gap",
            pong_state(|s| s.ball_y = 0.52),
            ACTION_STAY,
            vec![FieldCheck::equals("opponent_y", 0.52f32)],
        ),
        pong_case(
            "miss_at_player_plane",
            pong_state(|s| {
                s.ball_x = 0.99;
                s.player_y = 0.2;
            }),
            ACTION_STAY,
            vec![
                FieldCheck::equals("reward", -1.0f32),
                FieldCheck::equals("opponent_points", 1i64),
                FieldCheck::equals("player_points", 0i64),
                FieldCheck::equals("ball_x", 0.5f32),
                FieldCheck::equals("ball_y", 0.5f32),
                FieldCheck::in_range("ball_vy", -pong::VY0, pong::VY0),
                FieldCheck::equals("done", false),
            ],
        ),
        pong_case(
            "terminal_point",
            pong_state(|s| {
                s.ball_x = 0.01;
                s.ball_vx = -pong::BALL_VX;
                s.opponent_y = 0.9;
                s.player_points = 4;
            }),
            ACTION_STAY,
            vec![
                FieldCheck::equals("reward", 1.0f32),
                FieldCheck::equals("player_points", 5i64),
                FieldCheck::equals("observation.player_points", 1.0f32),
                FieldCheck::equals("done", true),
            ],
        ),
        pong_case(
            "observation_scaling",
            pong_state(|s| {
                s.ball_vx = -pong::BALL_VX;
                s.ball_vy = 0.015;
            }),
            ACTION_STAY,
            vec![
                FieldCheck::equals("observation.ball_x", 0.475f32),
                FieldCheck::equals("observation.ball_y", 0.515f32),
                FieldCheck::equals("observation.ball_vy", 0.5f32),
            ],
        ),
        pong_case(
            "horizon",
            pong_state(|s| s.step_count = pong::MAX_STEPS - 1),
            ACTION_STAY,
            vec![FieldCheck::equals("step_count", pong::MAX_STEPS as i64), FieldCheck::equals("done", true)],
        ),
    ]
}

fn pong_scenarios() -> Vec<InteractionScenario> {
    let mode = ComparisonMode::epsilon(PONG_EPS);
    vec![
        InteractionScenario {
            // Return off the player's paddle, then a point on the opponent's side.
            name: "paddle_return_then_point".into(),
            ops: vec![
                Op::SetState { state: pong_state(|s| s.ball_x = 0.96) },
                Op::Step { action: pong::ACTION_STAY },
                Op::Step { action: pong::ACTION_STAY },
                Op::SetField { path: "ball_x".into(), value: 0.01f32.into() },
                Op::SetField { path: "opponent_y".into(), value: 0.9f32.into() },
                Op::Step { action: pong::ACTION_STAY },
            ],
            assertions: vec![
                Assertion::in_range(2, "ball_vx", -1.0, -0.01),
                Assertion::in_range(2, "ball_x", 0.9, 0.999),
                Assertion::equals(2, "player_points", 0i64),
                Assertion::equals(2, "opponent_points", 0i64),
                Assertion::equals(5, "reward", 1.0f32),
                Assertion::equals(5, "player_points", 1i64),
                Assertion::equals(5, "ball_x", 0.5f32),
            ],
            mode,
        },
        InteractionScenario {
            name: "opponent_tracks_pre_move_ball".into(),
            ops: vec![
                Op::SetState {
                    state: pong_state(|s| {
                        s.ball_x = 0.3;
                        s.ball_vx = -pong::BALL_VX;
                        s.ball_vy = 0.02;
                    }),
                },
                Op::Step { action: pong::ACTION_STAY },
                Op::Step { action: pong::ACTION_STAY },
            ],
            assertions: vec![
                Assertion::equals(1, "opponent_y", 0.5f32),
                Assertion::equals(1, "ball_y", 0.52f32),
                Assertion::equals(2, "opponent_y", 0.52f32),
                Assertion::equals(2, "ball_y", 0.54f32),
            ],
            mode,
        },
        InteractionScenario {
            // The wall reflection feeds the paddle offset in the same step.
            name: "wall_then_paddle".into(),
            ops: vec![
                Op::SetState {
                    state: pong_state(|s| {
                        s.ball_x = 0.98;
                        s.ball_y = 0.005;
                        s.ball_vy = -0.01;
                        s.player_y = 0.1;
                    }),
                },
                Op::Step { action: pong::ACTION_STAY },
            ],
            assertions: vec![
                Assertion::equals(1, "ball_vy", -0.0285f32),
                Assertion::in_range(1, "ball_vx", -1.0, -0.01),
                Assertion::equals(1, "ball_x", 0.995f32),
                Assertion::equals(1, "opponent_points", 0i64),
            ],
            mode,
        },
    ]
}

fn cartpole_state(f: impl FnOnce(&mut CartPoleState)) -> EnvState {
    let mut s = CartPoleState::at_rest(RngState::new(0x5EED));
    f(&mut s);
    EnvState::CartPole(s)
}

fn cartpole_case(name: &str, setup: EnvState, action: u32, expected: Vec<FieldCheck>) -> PropertyCase {
    PropertyCase { name: name.to_owned(), setup, action, expected, mode: ComparisonMode::epsilon(CARTPOLE_EPS) }
}

fn cartpole_cases() -> Vec<PropertyCase> {
    use cartpole::{ACTION_LEFT, ACTION_RIGHT};
    // From rest: temp = F / M, theta_acc = -temp / (l (4/3 - m / M)), x_acc = temp - ml theta_acc / M.
    vec![
        cartpole_case(
            "push_right_from_rest",
            cartpole_state(|_| {}),
            ACTION_RIGHT,
            vec![
                FieldCheck::equals("x", 0.0f32),
                FieldCheck::equals("x_dot", 0.195_121_95f32),
                FieldCheck::equals("theta", 0.0f32),
                FieldCheck::equals("theta_dot", -0.292_682_93f32),
                FieldCheck::equals("reward", 1.0f32),
                FieldCheck::equals("done", false),
                FieldCheck::equals("step_count", 1i64),
            ],
        ),
        cartpole_case(
            "push_left_from_rest",
            cartpole_state(|_| {}),
            ACTION_LEFT,
            vec![
                FieldCheck::equals("x_dot", -0.195_121_95f32),
                FieldCheck::equals("theta_dot", 0.292_682_93f32),
                FieldCheck::equals("done", false),
            ],
        ),
        cartpole_case(
            "theta_limit_terminates",
            cartpole_state(|s| {
                s.theta = 0.2094;
                s.theta_dot = 0.5;
            }),
            ACTION_LEFT,
            vec![
                FieldCheck::equals("theta", 0.2194f32),
                FieldCheck::equals("done", true),
                FieldCheck::equals("reward", 1.0f32),
            ],
        ),
        cartpole_case(
            "cart_limit_terminates",
            cartpole_state(|s| {
                s.x = 2.39;
                s.x_dot = 1.0;
            }),
            ACTION_RIGHT,
            vec![FieldCheck::equals("x", 2.41f32), FieldCheck::equals("done", true)],
        ),
        cartpole_case(
            "horizon",
            cartpole_state(|s| s.step_count = cartpole::MAX_EPISODE - 1),
            ACTION_RIGHT,
            vec![
                FieldCheck::equals("step_count", cartpole::MAX_EPISODE as i64),
                FieldCheck::equals("done", true),
            ],
        ),
    ]
}

fn cartpole_scenarios() -> Vec<InteractionScenario> {
    let mode = ComparisonMode::epsilon(CARTPOLE_EPS);
    let r = cartpole::RESET_RANGE;
    vec![
        InteractionScenario {
            name: "terminal_then_reset".into(),
            ops: vec![
                Op::SetState {
                    state: cartpole_state(|s| {
                        s.x = 2.39;
                        s.x_dot = 1.0;
                        s.step_count = 17;
                    }),
                },
                Op::Step { action: cartpole::ACTION_RIGHT },
                Op::Reset { seed: 3, index: 0 },
            ],
            assertions: vec![
                Assertion::equals(1, "done", true),
                Assertion::equals(1, "step_count", 18i64),
                Assertion::equals(2, "step_count", 0i64),
                Assertion::in_range(2, "x", -r, r),
                Assertion::in_range(2, "x_dot", -r, r),
                Assertion::in_range(2, "theta", -r, r),
                Assertion::in_range(2, "theta_dot", -r, r),
            ],
            mode,
        },
        InteractionScenario {
            // Three explicit-Euler steps; position and angle pick up the prior velocities.
            name: "push_sequence".into(),
            ops: vec![
                Op::SetState { state: cartpole_state(|_| {}) },
                Op::Step { action: cartpole::ACTION_RIGHT },
                Op::Step { action: cartpole::ACTION_RIGHT },
                Op::Step { action: cartpole::ACTION_LEFT },
            ],
            assertions: vec![
                Assertion::equals(1, "x_dot", 0.195_121_95f32),
                Assertion::equals(1, "theta_dot", -0.292_682_93f32),
                Assertion::equals(3, "x", 0.011_707_317f32),
                Assertion::equals(3, "x_dot", 0.195_204_43f32),
                Assertion::equals(3, "theta", -0.017_560_976f32),
                Assertion::equals(3, "theta_dot", -0.294_532_63f32),
            ],
            mode,
        },
    ]
}
