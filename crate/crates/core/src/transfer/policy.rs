use serde::{Deserialize, Serialize};

use super::TransferError;
use crate::env::EnvKind;
use crate::pong;
use crate::rng::RngState;

/// Tracker stays put when the ball is within this distance of the paddle centre.
const TRACKER_DEAD_ZONE: f32 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Uniform actions from its own stream.
    Random { rng: RngState, action_count: u32 },
    /// Pong only: moves the paddle toward the ball.
    Tracker,
    /// One row per action: `obs_len` weights then a bias.
    Linear { obs_len: usize, action_count: u32, params: Vec<f32> },
}

impl Policy {
    pub fn random(seed: u64, action_count: u32) -> Self {
        Policy::Random { rng: RngState::new(seed), action_count }
    }

    pub fn linear(obs_len: usize, action_count: u32, params: Vec<f32>) -> Result<Self, TransferError> {
        let want = (obs_len + 1) * action_count as usize;
        if params.len() != want {
            return Err(TransferError::Contract(format!(
                "linear policy needs {want} parameters for {obs_len} inputs and {action_count} actions, got {}",
                params.len()
            )));
        }
        Ok(Policy::Linear { obs_len, action_count, params })
    }

    pub fn zeros(kind: EnvKind) -> Self {
        let n = (kind.obs_len() + 1) * kind.action_count() as usize;
        Policy::Linear { obs_len: kind.obs_len(), action_count: kind.action_count(), params: vec![0.0; n] }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Random { .. } => "random",
            Policy::Tracker => "tracker",
            Policy::Linear { .. } => "linear",
        }
    }

    /// Checks the policy can drive `kind`.
    pub fn check_env(&self, kind: EnvKind) -> Result<(), TransferError> {
        let ok = match self {
            Policy::Random { action_count, .. } => *action_count == kind.action_count(),
            Policy::Tracker => kind == EnvKind::Pong,
            Policy::Linear { obs_len, action_count, .. } => {
                *obs_len == kind.obs_len() && *action_count == kind.action_count()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(TransferError::Contract(format!("{} policy does not fit the {kind} schema", self.name())))
        }
    }

    /// Copy with an independent random stream keyed by `key`; deterministic
    /// kinds are returned unchanged.
    pub fn fork(&self, key: u64) -> Self {
        match self {
            Policy::Random { rng, action_count } => {
                Policy::Random { rng: RngState::derive(rng.counter ^ key, 0), action_count: *action_count }
            }
            other => other.clone(),
        }
    }

    /// Selects an action. Only the random policy mutates (its stream advances).
    pub fn act(&mut self, observation: &[f32]) -> Result<u32, TransferError> {
        match self {
            Policy::Random { rng, action_count } => {
                let (next, a) = rng.below(*action_count);
                *rng = next;
                Ok(a)
            }
            Policy::Tracker => {
                if observation.len() != pong::OBS_LEN {
                    return Err(length_error(pong::OBS_LEN, observation.len()));
                }
                let ball_y = observation[1];
                let player_y = observation[4] * pong::PADDLE_RANGE + pong::PADDLE_MIN;
                Ok(if ball_y > player_y + TRACKER_DEAD_ZONE {
                    pong::ACTION_UP
                } else if ball_y < player_y - TRACKER_DEAD_ZONE {
                    pong::ACTION_DOWN
                } else {
                    pong::ACTION_STAY
                })
            }
            Policy::Linear { obs_len, params, .. } => {
                if observation.len() != *obs_len {
                    return Err(length_error(*obs_len, observation.len()));
                }
                Ok(linear_argmax(params, observation))
            }
        }
    }
}

fn length_error(want: usize, got: usize) -> TransferError {
    TransferError::Contract(format!("observation has {got} components, policy expects {want}"))
}

/// Highest-scoring action; ties go to the lowest index.
pub(crate) fn linear_argmax(params: &[f32], observation: &[f32]) -> u32 {
    let row = observation.len() + 1;
    let mut best = 0;
    let mut best_score = f32::NEG_INFINITY;
    for (a, w) in params.chunks_exact(row).enumerate() {
        let score = w[..row - 1].iter().zip(observation).map(|(w, x)| w * x).sum::<f32>() + w[row - 1];
        if score > best_score {
            best = a as u32;
            best_score = score;
        }
    }
    best
}
