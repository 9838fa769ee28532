//! Model-based temporal-difference updates on probability vectors and the
//! sampled-label mixture experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributional::{renormalize, BinningRule, GainGrid, StateDistribution};
use crate::error::{argument, Error, Result};
use crate::expected::sup_distance;
use crate::mdp::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// ½‖P_target − P‖²; the step direction is P_target − P.
    SquaredDifference,
    /// KL(P_target ‖ P) with P = softmax(z); the logits move along
    /// −∂KL/∂z = P_target − P. Bins with zero probability stay at zero.
    KlDivergence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdConfig {
    pub learning_rate: f64,
    pub loss: Loss,
    pub steps: usize,
    pub seed: u64,
}

impl TdConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(argument(format!("learning rate must be in (0, 1], got {}", self.learning_rate)));
        }
        if self.steps == 0 {
            return Err(argument("steps must be at least 1"));
        }
        Ok(())
    }
}

/// P ← P + γΔ, then clamp at zero and renormalize.
pub fn td_update(probs: &[f64], target: &[f64], learning_rate: f64, loss: Loss) -> Vec<f64> {
    debug_assert_eq!(probs.len(), target.len());
    let mut next: Vec<f64> = match loss {
        // Written as a convex combination so a full step lands on the target.
        Loss::SquaredDifference => {
            probs.iter().zip(target).map(|(&p, &t)| (1.0 - learning_rate) * p + learning_rate * t).collect()
        }
        Loss::KlDivergence => {
            // softmax(ln P + γ(T − P)), shifted by the largest exponent.
            let shift = probs
                .iter()
                .zip(target)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &t)| learning_rate * (t - p))
                .fold(f64::NEG_INFINITY, f64::max);
            probs
                .iter()
                .zip(target)
                .map(|(&p, &t)| if p > 0.0 { p * (learning_rate * (t - p) - shift).exp() } else { 0.0 })
                .collect()
        }
    };
    renormalize(&mut next);
    next
}

/// One update of `dist` toward `target`; both must share a grid.
pub fn td_step(dist: &StateDistribution, target: &StateDistribution, cfg: &TdConfig) -> Result<StateDistribution> {
    if dist.grid != target.grid {
        return Err(Error::GridMismatch("td_step needs distributions on the same grid".into()));
    }
    Ok(StateDistribution {
        grid: dist.grid.clone(),
        probs: td_update(&dist.probs, &target.probs, cfg.learning_rate, cfg.loss),
    })
}

/// One in-place TD pass over all states: each state's vector moves toward
/// its freshly propagated P_bin. Returns the sup-norm change.
pub fn td_sweep(rule: &BinningRule, policy: &Policy, probs: &mut [Vec<f64>], learning_rate: f64, loss: Loss) -> f64 {
    let mut change: f64 = 0.0;
    for s in 0..probs.len() {
        let r = rule.rule(s, policy.action(s)).expect("binning rule covers the policy");
        let mut target = vec![0.0; probs[s].len()];
        r.propagate(probs, &mut target);
        let next = td_update(&probs[s], &target, learning_rate, loss);
        change = change.max(sup_distance(&next, &probs[s]));
        probs[s] = next;
    }
    change
}

/// Gaussian density at the bin centers, normalized over the grid.
pub fn discrete_gaussian(grid: &GainGrid, mean: f64, std_dev: f64) -> StateDistribution {
    let mut probs: Vec<f64> = grid.centers().iter().map(|&c| (-0.5 * ((c - mean) / std_dev).powi(2)).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    StateDistribution { grid: grid.clone(), probs }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Standard deviation of the mixture components, in bin widths.
pub const MIXTURE_STD_BINS: f64 = 4.0;

/// The two label distributions and their p-weighted mixture.
#[derive(Debug, Clone)]
pub struct MixtureSetup {
    pub first: StateDistribution,
    pub second: StateDistribution,
    pub target: StateDistribution,
}

/// Labels are discretized Gaussians on a shared uniform grid spanning the
/// means with a margin of 3·max(1, |mean1 − mean2| / 2) on each side.
pub fn mixture_setup(p: f64, mean1: f64, mean2: f64, k_bins: usize) -> Result<MixtureSetup> {
    if !(0.0..=1.0).contains(&p) {
        return Err(argument(format!("mixture weight must be in [0, 1], got {p}")));
    }
    if !(mean1.is_finite() && mean2.is_finite()) {
        return Err(argument("means must be finite"));
    }
    let pad = 3.0 * (0.5 * (mean1 - mean2).abs()).max(1.0);
    let grid = GainGrid::uniform(mean1.min(mean2) - pad, mean1.max(mean2) + pad, k_bins)?;
    let std_dev = MIXTURE_STD_BINS * grid.bin_width();
    let first = discrete_gaussian(&grid, mean1, std_dev);
    let second = discrete_gaussian(&grid, mean2, std_dev);
    let mut mix: Vec<f64> = first.probs.iter().zip(&second.probs).map(|(a, b)| p * a + (1.0 - p) * b).collect();
    renormalize(&mut mix);
    let target = StateDistribution { grid, probs: mix };
    Ok(MixtureSetup { first, second, target })
}

#[derive(Debug, Clone)]
pub struct MixtureOutcome {
    pub learned: StateDistribution,
    pub target: StateDistribution,
    pub l1_error: f64,
    /// `(step, l1_error)` samples, ending with the final step.
    pub trace: Vec<(usize, f64)>,
}

/// Trains a free probability vector from a uniform start on labels drawn
/// per step: the first Gaussian with probability `p`, else the second.
pub fn mixture_experiment(p: f64, mean1: f64, mean2: f64, k_bins: usize, cfg: &TdConfig) -> Result<MixtureOutcome> {
    cfg.check()?;
    let setup = mixture_setup(p, mean1, mean2, k_bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = StateDistribution::uniform(setup.target.grid.clone());
    let every = (cfg.steps / 1000).max(1);
    let mut trace = vec![(0, l1_distance(&model.probs, &setup.target.probs))];
    for step in 1..=cfg.steps {
        let label = if rng.random::<f64>() < p { &setup.first } else { &setup.second };
        model.probs = td_update(&model.probs, &label.probs, cfg.learning_rate, cfg.loss);
        if step % every == 0 || step == cfg.steps {
            trace.push((step, l1_distance(&model.probs, &setup.target.probs)));
        }
    }
    let l1_error = trace.last().expect("trace is never empty").1;
    Ok(MixtureOutcome { learned: model, target: setup.target, l1_error, trace })
}

/// Model-based variant: one full step toward the mixture itself.
pub fn mixture_one_step(p: f64, mean1: f64, mean2: f64, k_bins: usize, loss: Loss) -> Result<MixtureOutcome> {
    let setup = mixture_setup(p, mean1, mean2, k_bins)?;
    let start = StateDistribution::uniform(setup.target.grid.clone());
    let cfg = TdConfig { learning_rate: 1.0, loss, steps: 1, seed: 0 };
    let learned = td_step(&start, &setup.target, &cfg)?;
    let l1_error = l1_distance(&learned.probs, &setup.target.probs);
    let trace = vec![(0, l1_distance(&start.probs, &setup.target.probs)), (1, l1_error)];
    Ok(MixtureOutcome { learned, target: setup.target, l1_error, trace })
}
