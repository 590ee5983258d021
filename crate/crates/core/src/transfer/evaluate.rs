use rayon::prelude::*;

use super::{Policy, TransferError};
use crate::env::Backend;
use crate::rng::{derive_stream, RngState};

/// Runs one episode to termination and returns its total reward.
pub fn run_episode(backend: &dyn Backend, policy: &Policy, stream: RngState) -> Result<f64, TransferError> {
    let mut policy = policy.fork(stream.counter);
    let (mut state, mut obs) = backend.reset(stream);
    let mut total = 0.0f64;
    loop {
        let action = policy.act(&obs)?;
        let (next, outcome) = backend.step(&state, action)?;
        total += outcome.reward as f64;
        if outcome.done {
            return Ok(total);
        }
        state = next;
        obs = outcome.observation;
    }
}

/// Mean episode return for each of `n_seeds` seeds.
///
/// Seed `i` owns the stream `derive_stream(base_seed, i)`; its episode `j`
/// resets from `derive_stream(<that stream's counter>, j)`. Output is in seed
/// order and independent of thread count.
pub fn evaluate_policy(
    backend: &dyn Backend,
    policy: &Policy,
    n_seeds: u32,
    episodes_per_seed: u32,
    base_seed: u64,
) -> Result<Vec<f64>, TransferError> {
    if n_seeds < 2 {
        return Err(TransferError::Config(format!("need at least 2 seeds, got {n_seeds}")));
    }
    if episodes_per_seed == 0 {
        return Err(TransferError::Config("need at least 1 episode per seed".into()));
    }
    policy.check_env(backend.kind())?;
    (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let seed_stream = derive_stream(base_seed, i);
            let mut sum = 0.0;
            for j in 0..episodes_per_seed {
                sum += run_episode(backend, policy, derive_stream(seed_stream.counter, j))?;
            }
            Ok(sum / episodes_per_seed as f64)
        })
        .collect()
}
