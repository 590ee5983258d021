use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, Policy, TransferError, EVAL_EPISODES};
use crate::env::Backend;
use crate::rng::{derive_stream, RngState};

/// Keeps training episode streams apart from evaluation streams under the same seed.
const TRAIN_SALT: u64 = 0x7EA1_C0DE_0BAD_F00D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CemConfig {
    pub generations: u32,
    pub population: usize,
    pub elite_frac: f64,
    pub seed: u64,
    /// Episodes averaged per candidate.
    pub eval_episodes: u32,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self { generations: 30, population: 64, elite_frac: 0.125, seed: 0, eval_episodes: EVAL_EPISODES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_return: f64,
    pub elite_mean_return: f64,
    pub mean_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemReport {
    pub policy: Policy,
    pub history: Vec<GenerationStats>,
}

/// Standard normal draw by Box-Muller from two uniforms.
fn normal(rng: RngState) -> (RngState, f64) {
    let (rng, u1) = rng.uniform();
    let (rng, u2) = rng.uniform();
    let r = (-2.0 * (1.0 - u1 as f64).ln()).sqrt();
    (rng, r * (std::f64::consts::TAU * u2 as f64).cos())
}

/// Cross-entropy method over linear-policy parameters.
///
/// Each generation samples the population from a diagonal Gaussian, scores
/// every candidate on the same `eval_episodes` episodes, and refits mean and
/// standard deviation to the elite. Returns the final mean as a policy.
pub fn train_cem(backend: &dyn Backend, config: &CemConfig) -> Result<CemReport, TransferError> {
    if config.population < 4 {
        return Err(TransferError::Config(format!("population must be at least 4, got {}", config.population)));
    }
    if !(config.elite_frac > 0.0 && config.elite_frac <= 0.5) {
        return Err(TransferError::Config(format!("elite_frac must be in (0, 0.5], got {}", config.elite_frac)));
    }
    if config.eval_episodes == 0 {
        return Err(TransferError::Config("eval_episodes must be at least 1".into()));
    }
    let kind = backend.kind();
    let (obs_len, actions) = (kind.obs_len(), kind.action_count());
    let dim = (obs_len + 1) * actions as usize;
    let n_elite = ((config.population as f64 * config.elite_frac).round() as usize).max(1);

    let mut mean = vec![0.0f64; dim];
    let mut std = vec![1.0f64; dim];
    let mut history = Vec::with_capacity(config.generations as usize);

    for g in 0..config.generations {
        let gen_stream = derive_stream(config.seed, g);
        let episode_base = derive_stream(config.seed ^ TRAIN_SALT, g).counter;
        let candidates: Vec<Vec<f64>> = (0..config.population)
            .map(|k| {
                let mut rng = derive_stream(gen_stream.counter, k as u32);
                (0..dim)
                    .map(|d| {
                        let (next, z) = normal(rng);
                        rng = next;
                        mean[d] + std[d] * z
                    })
                    .collect()
            })
            .collect();

        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|params| {
                let policy = Policy::Linear {
                    obs_len,
                    action_count: actions,
                    params: params.iter().map(|&p| p as f32).collect(),
                };
                let mut total = 0.0;
                for j in 0..config.eval_episodes {
                    total += run_episode(backend, &policy, derive_stream(episode_base, j))?;
                }
                Ok(total / config.eval_episodes as f64)
            })
            .collect::<Result<_, TransferError>>()?;
        if let Some((k, &value)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(TransferError::NonFiniteReturn { generation: g, candidate: k, value });
        }

        let mut order: Vec<usize> = (0..config.population).collect();
        order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
        let elite = &order[..n_elite];
        for d in 0..dim {
            let m = elite.iter().map(|&i| candidates[i][d]).sum::<f64>() / n_elite as f64;
            let v = elite.iter().map(|&i| (candidates[i][d] - m).powi(2)).sum::<f64>() / n_elite as f64;
            mean[d] = m;
            std[d] = v.sqrt();
        }
        history.push(GenerationStats {
            generation: g,
            best_return: scores[order[0]],
            elite_mean_return: elite.iter().map(|&i| scores[i]).sum::<f64>() / n_elite as f64,
            mean_std: std.iter().sum::<f64>() / dim as f64,
        });
    }

    let policy = Policy::linear(obs_len, actions, mean.iter().map(|&m| m as f32).collect())?;
    Ok(CemReport { policy, history })
}
