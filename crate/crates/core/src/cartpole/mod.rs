//! Twin CartPole (classic discrete two-action variant, explicit Euler).
//!
//! The batched backend may reassociate arithmetic, so the twins are compared
//! with an epsilon tolerance rather than bit for bit.

mod perf;
mod reference;

use serde::{Deserialize, Serialize};

use crate::env::{int_field, real_field, EnvError, Value};
use crate::rng::RngState;

pub use perf::{Arithmetic, CartPoleBatch, CartPolePerf};
pub use reference::{cartpole_reset, cartpole_step, CartPoleFault, CartPoleReference};

pub const GRAVITY: f32 = 9.8;
pub const CART_MASS: f32 = 1.0;
pub const POLE_MASS: f32 = 0.1;
pub const TOTAL_MASS: f32 = CART_MASS + POLE_MASS;
/// Half the pole length.
pub const POLE_HALF_LENGTH: f32 = 0.5;
pub const POLE_MASS_LENGTH: f32 = POLE_MASS * POLE_HALF_LENGTH;
pub const FORCE_MAG: f32 = 10.0;
pub const TAU: f32 = 0.02;
pub const X_LIMIT: f32 = 2.4;
/// Twelve degrees.
pub const THETA_LIMIT: f32 = 12.0 * 2.0 * std::f32::consts::PI / 360.0;
pub const MAX_EPISODE: u32 = 500;
/// Reset components are drawn uniformly from `[-RESET_RANGE, RESET_RANGE)`.
pub const RESET_RANGE: f32 = 0.05;

pub const ACTION_COUNT: u32 = 2;
pub const ACTION_LEFT: u32 = 0;
pub const ACTION_RIGHT: u32 = 1;

pub const OBS_LEN: usize = 4;
pub const OBS_NAMES: [&str; OBS_LEN] = ["x", "x_dot", "theta", "theta_dot"];
pub const STATE_FIELDS: [&str; 6] = ["x", "x_dot", "theta", "theta_dot", "step_count", "rng.counter"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f32,
    pub x_dot: f32,
    pub theta: f32,
    pub theta_dot: f32,
    pub step_count: u32,
    pub rng: RngState,
}

impl CartPoleState {
    pub fn at_rest(rng: RngState) -> Self {
        Self { x: 0.0, x_dot: 0.0, theta: 0.0, theta_dot: 0.0, step_count: 0, rng }
    }

    pub fn observation(&self) -> [f32; OBS_LEN] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    /// Negates the four dynamic components.
    pub fn mirrored(&self) -> Self {
        Self { x: -self.x, x_dot: -self.x_dot, theta: -self.theta, theta_dot: -self.theta_dot, ..self.clone() }
    }

    pub fn fields(&self) -> [(&'static str, Value); 6] {
        [
            ("x", Value::Real(self.x)),
            ("x_dot", Value::Real(self.x_dot)),
            ("theta", Value::Real(self.theta)),
            ("theta_dot", Value::Real(self.theta_dot)),
            ("step_count", Value::Int(self.step_count as i64)),
            ("rng.counter", Value::Int(self.rng.counter as i64)),
        ]
    }

    pub fn set_field(&mut self, path: &str, value: Value) -> Result<(), EnvError> {
        match path {
            "x" => self.x = real_field(path, value)?,
            "x_dot" => self.x_dot = real_field(path, value)?,
            "theta" => self.theta = real_field(path, value)?,
            "theta_dot" => self.theta_dot = real_field(path, value)?,
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

#[inline(always)]
pub(crate) fn reset_component(rng: RngState) -> (RngState, f32) {
    let (rng, u) = rng.uniform();
    (rng, (2.0 * u - 1.0) * RESET_RANGE)
}

#[inline(always)]
pub(crate) fn is_terminal(x: f32, theta: f32, step_count: u32) -> bool {
    (x < -X_LIMIT) | (x > X_LIMIT) | (theta < -THETA_LIMIT) | (theta > THETA_LIMIT) | (step_count >= MAX_EPISODE)
}
