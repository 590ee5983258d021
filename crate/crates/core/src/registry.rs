//! Static registry of backends addressed by id: the twins plus every mutant.

use std::sync::Arc;

use crate::cartpole::{Arithmetic, CartPoleFault, CartPolePerf, CartPoleReference};
use crate::env::{Backend, ComparisonMode, EnvKind};
use crate::pong::{PongFault, PongPerf, PongReference};

pub const PONG_WALL_VELOCITY: &str = "pong-mut-wall-velocity";
pub const PONG_SCORE_BEFORE_PADDLE: &str = "pong-mut-score-before-paddle";
pub const PONG_OPPONENT_AFTER_BALL: &str = "pong-mut-opponent-after-ball";
pub const PONG_VX_DECAY: &str = "pong-mut-vx-decay";
pub const PONG_SERVE_STREAM: &str = "pong-mut-serve-stream";
pub const CARTPOLE_THETA_ACC_SIGN: &str = "cartpole-mut-theta-acc-sign";
pub const CARTPOLE_GRAVITY: &str = "cartpole-mut-gravity";
pub const CARTPOLE_RESET_ORDER: &str = "cartpole-mut-reset-order";

const PONG_MUTANTS: [(&str, PongFault); 5] = [
    (PONG_WALL_VELOCITY, PongFault::WallKeepsVelocity),
    (PONG_SCORE_BEFORE_PADDLE, PongFault::ScoreBeforePaddle),
    (PONG_OPPONENT_AFTER_BALL, PongFault::OpponentAfterBall),
    (PONG_VX_DECAY, PongFault::VxDecay),
    (PONG_SERVE_STREAM, PongFault::ServeReusesStream),
];

const CARTPOLE_MUTANTS: [(&str, CartPoleFault); 3] = [
    (CARTPOLE_THETA_ACC_SIGN, CartPoleFault::ThetaAccSign),
    (CARTPOLE_GRAVITY, CartPoleFault::Gravity981),
    (CARTPOLE_RESET_ORDER, CartPoleFault::ResetDrawOrder),
];

/// Every registered id, twins first.
pub fn backend_ids() -> Vec<&'static str> {
    let mut ids = vec![
        PongReference::ID,
        PongPerf::ID,
        CartPoleReference::ID,
        CartPolePerf::ID,
        CartPolePerf::EXACT_ID,
    ];
    ids.extend(PONG_MUTANTS.iter().map(|(id, _)| *id));
    ids.extend(CARTPOLE_MUTANTS.iter().map(|(id, _)| *id));
    ids
}

pub fn backend(id: &str) -> Option<Arc<dyn Backend>> {
    let b: Arc<dyn Backend> = match id {
        PongReference::ID => Arc::new(PongReference::new()),
        PongPerf::ID => Arc::new(PongPerf),
        CartPoleReference::ID => Arc::new(CartPoleReference::new()),
        CartPolePerf::ID => Arc::new(CartPolePerf::new(Arithmetic::Fast)),
        CartPolePerf::EXACT_ID => Arc::new(CartPolePerf::new(Arithmetic::Reference)),
        _ => {
            if let Some((id, fault)) = PONG_MUTANTS.iter().find(|(m, _)| *m == id) {
                Arc::new(PongReference::with_fault(id, *fault))
            } else if let Some((id, fault)) = CARTPOLE_MUTANTS.iter().find(|(m, _)| *m == id) {
                Arc::new(CartPoleReference::with_fault(id, *fault))
            } else {
                return None;
            }
        }
    };
    Some(b)
}

pub fn reference_id(kind: EnvKind) -> &'static str {
    match kind {
        EnvKind::Pong => PongReference::ID,
        EnvKind::CartPole => CartPoleReference::ID,
    }
}

pub fn perf_id(kind: EnvKind) -> &'static str {
    match kind {
        EnvKind::Pong => PongPerf::ID,
        EnvKind::CartPole => CartPolePerf::ID,
    }
}

/// Rollout tolerance each environment's twins are held to.
pub fn default_mode(kind: EnvKind) -> ComparisonMode {
    match kind {
        EnvKind::Pong => ComparisonMode::Exact,
        EnvKind::CartPole => ComparisonMode::epsilon(1e-5),
    }
}
