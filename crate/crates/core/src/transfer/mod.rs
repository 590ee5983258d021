//! Level-4 cross-backend policy transfer: policies, a cross-entropy-method
//! trainer, seed-matched evaluation and a Welch TOST equivalence test.

mod cem;
mod cross;
mod evaluate;
mod policy;
mod tost;

use thiserror::Error;

use crate::env::EnvError;
use crate::verify::VerifyError;

pub use cem::{train_cem, CemConfig, CemReport, GenerationStats};
pub use cross::{cross_backend_transfer, Gate, PolicySpec, TrainOn, TransferConfig, TransferReport};
pub use evaluate::{evaluate_policy, run_episode};
pub use policy::Policy;
pub use tost::{t_cdf, t_critical, tost_equivalence, TostConfig, TostResult};

/// Episodes averaged into one per-seed return.
pub const EVAL_EPISODES: u32 = 20;
/// Seeds per evaluation, matching a ten-seed results table.
pub const DEFAULT_SEEDS: u32 = 10;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite return {value} for candidate {candidate} in generation {generation}")]
    NonFiniteReturn { generation: u32, candidate: usize, value: f64 },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}
