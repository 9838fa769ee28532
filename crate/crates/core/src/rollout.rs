//! Seeded Monte Carlo rollouts and empirical CCDFs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributional::check_sorted;
use crate::error::{argument, Result};
use crate::mdp::{Mdp, Policy, StateId};

pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    pub episodes: usize,
    /// Bound on the discounted tail dropped by truncating each episode.
    pub truncation_eps: f64,
    pub seed: u64,
}

impl RolloutConfig {
    fn check(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(argument("episodes must be at least 1"));
        }
        if !(self.truncation_eps > 0.0) {
            return Err(argument(format!("truncation_eps must be positive, got {}", self.truncation_eps)));
        }
        Ok(())
    }
}

/// Smallest T with λ^T · max|r| / (1 − λ) < eps.
pub fn horizon(mdp: &Mdp, eps: f64) -> usize {
    let lambda = mdp.discount();
    let mut tail = mdp.gain_bound();
    let mut t = 0;
    while tail >= eps {
        tail *= lambda;
        t += 1;
    }
    t
}

/// Generator for episode `episode`: the seed picks the key, the episode
/// index picks the stream, so results do not depend on thread count.
fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

fn run_episode(mdp: &Mdp, policy: &Policy, start: StateId, steps: usize, rng: &mut ChaCha8Rng) -> f64 {
    let lambda = mdp.discount();
    let mut state = start;
    let mut gain = 0.0;
    let mut weight = 1.0;
    for _ in 0..steps {
        let outcomes = mdp.outcomes(state, policy.action(state));
        let u: f64 = rng.random();
        let mut acc = 0.0;
        // Falls back to the last outcome when rounding leaves u above the row sum.
        let mut chosen = outcomes[outcomes.len() - 1];
        for o in outcomes {
            acc += o.prob;
            if u < acc {
                chosen = *o;
                break;
            }
        }
        gain += weight * chosen.reward;
        weight *= lambda;
        state = chosen.next;
    }
    gain
}

/// Realized truncated gains Σ λ^i r_i of `cfg.episodes` episodes from `start`.
pub fn simulate_gains(mdp: &Mdp, policy: &Policy, start: StateId, cfg: &RolloutConfig) -> Result<Vec<f64>> {
    cfg.check()?;
    if start >= mdp.n_states() {
        return Err(argument(format!("unknown start state index {start}")));
    }
    let steps = horizon(mdp, cfg.truncation_eps);
    Ok((0..cfg.episodes)
        .into_par_iter()
        .map(|i| run_episode(mdp, policy, start, steps, &mut episode_rng(cfg.seed, i)))
        .collect())
}

/// Fraction of `gains` strictly above each sorted point of `xs`.
pub fn empirical_ccdf(gains: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(argument("empirical CCDF of an empty sample"));
    }
    check_sorted(xs)?;
    let mut sorted = gains.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(xs.iter().map(|&x| (sorted.len() - sorted.partition_point(|&g| g <= x)) as f64 / n).collect())
}
