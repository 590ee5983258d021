//! Twin Pong: a scalar reference and a batched branchless backend that must
//! agree bit for bit.
//!
//! Event order inside one step is fixed: player paddle, opponent tracker,
//! ball advance, wall reflection, paddle collision, scoring, termination.

mod perf;
mod reference;

use serde::{Deserialize, Serialize};

use crate::env::{int_field, real_field, EnvError, Value};
use crate::rng::RngState;

pub use perf::{PongBatch, PongPerf};
pub use reference::{pong_observe, pong_reset, pong_step, PongFault, PongReference};

pub const BALL_VX: f32 = 0.025;
pub const VY0: f32 = 0.01;
pub const VY_MAX: f32 = 0.03;
pub const VY_GAIN: f32 = 0.03;
pub const PADDLE_HALF: f32 = 0.1;
pub const PADDLE_SPEED: f32 = 0.04;
pub const OPP_SPEED: f32 = 0.03;
pub const WIN_SCORE: u32 = 5;
pub const MAX_STEPS: u32 = 2000;

pub const PADDLE_MIN: f32 = PADDLE_HALF;
pub const PADDLE_MAX: f32 = 1.0 - PADDLE_HALF;
/// Denominator of the paddle normalization, so that `PADDLE_MAX` maps to exactly 1.
pub const PADDLE_RANGE: f32 = PADDLE_MAX - PADDLE_MIN;

pub const ACTION_COUNT: u32 = 3;
pub const ACTION_STAY: u32 = 0;
pub const ACTION_UP: u32 = 1;
pub const ACTION_DOWN: u32 = 2;

/// Paddle direction per action.
pub(crate) const ACTION_DIR: [f32; 3] = [0.0, 1.0, -1.0];

pub const OBS_LEN: usize = 8;
pub const OBS_NAMES: [&str; OBS_LEN] = [
    "ball_x",
    "ball_y",
    "ball_vx",
    "ball_vy",
    "player_y",
    "opponent_y",
    "player_points",
    "opponent_points",
];

pub const STATE_FIELDS: [&str; 10] = [
    "ball_x",
    "ball_y",
    "ball_vx",
    "ball_vy",
    "player_y",
    "opponent_y",
    "player_points",
    "opponent_points",
    "step_count",
    "rng.counter",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PongState {
    pub ball_x: f32,
    pub ball_y: f32,
    pub ball_vx: f32,
    pub ball_vy: f32,
    pub player_y: f32,
    pub opponent_y: f32,
    pub player_points: u32,
    pub opponent_points: u32,
    pub step_count: u32,
    pub rng: RngState,
}

impl PongState {
    /// Serve layout with the given vertical velocity; useful for building test states.
    pub fn centered(ball_vy: f32, rng: RngState) -> Self {
        Self {
            ball_x: 0.5,
            ball_y: 0.5,
            ball_vx: -BALL_VX,
            ball_vy,
            player_y: 0.5,
            opponent_y: 0.5,
            player_points: 0,
            opponent_points: 0,
            step_count: 0,
            rng,
        }
    }

    pub fn fields(&self) -> [(&'static str, Value); 10] {
        [
            ("ball_x", Value::Real(self.ball_x)),
            ("ball_y", Value::Real(self.ball_y)),
            ("ball_vx", Value::Real(self.ball_vx)),
            ("ball_vy", Value::Real(self.ball_vy)),
            ("player_y", Value::Real(self.player_y)),
            ("opponent_y", Value::Real(self.opponent_y)),
            ("player_points", Value::Int(self.player_points as i64)),
            ("opponent_points", Value::Int(self.opponent_points as i64)),
            ("step_count", Value::Int(self.step_count as i64)),
            // Bit pattern; only ever compared exactly.
            ("rng.counter", Value::Int(self.rng.counter as i64)),
        ]
    }

    pub fn set_field(&mut self, path: &str, value: Value) -> Result<(), EnvError> {
        match path {
            "ball_x" => self.ball_x = real_field(path, value)?,
            "ball_y" => self.ball_y = real_field(path, value)?,
            "ball_vx" => self.ball_vx = real_field(path, value)?,
            "ball_vy" => self.ball_vy = real_field(path, value)?,
            "player_y" => self.player_y = real_field(path, value)?,
            "opponent_y" => self.opponent_y = real_field(path, value)?,
            "player_points" => self.player_points = int_field(path, value)? as u32,
            "opponent_points" => self.opponent_points = int_field(path, value)? as u32,
            "step_count" => self.step_count = int_field(path, value)? as u32,
            "rng.counter" => match value {
                Value::Int(i) => self.rng.counter = i as u64,
                v => return Err(EnvError::FieldType { path: path.to_owned(), value: v }),
            },
            _ => return Err(EnvError::UnknownField(path.to_owned())),
        }
        Ok(())
    }
}

/// Draws a serve velocity uniformly in `[-VY0, VY0)`.
#[inline(always)]
pub(crate) fn serve_vy(rng: RngState) -> (RngState, f32) {
    let (rng, u) = rng.uniform();
    (rng, (2.0 * u - 1.0) * VY0)
}

#[inline(always)]
pub(crate) fn norm_paddle(y: f32) -> f32 {
    (y - PADDLE_MIN) / PADDLE_RANGE
}
