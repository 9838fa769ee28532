//! Per-state gain distributions on reference grids.
//!
//! A state's distribution is a probability vector over the bins of its
//! [`GainGrid`]. Both solvers repeatedly rebuild each state's vector from
//! its successors' vectors through a precomputed [`BinningRule`]:
//! [`evaluate_policy_distribution`] under a fixed policy, and
//! [`solve_outage`] greedily maximizing p(G > α) at every state.

mod binning;
mod grid;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use binning::{ActionRule, BinningRule, RuleScope, SuccessorBins};
pub use grid::{gain_span, make_grid, GainGrid, GridMode};

use crate::error::{argument, Error, Result};
use crate::expected::{argmax_first, sup_distance, ValueTable, DEFAULT_MAX_ITER};
use crate::mdp::{read_json, write_json, ActionId, Mdp, Policy, StateId};

/// Tolerance on Σ probs = 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_BINS: usize = 256;

/// Probability vector over the bins of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    pub grid: GainGrid,
    pub probs: Vec<f64>,
}

impl StateDistribution {
    pub fn new(grid: GainGrid, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != grid.len() {
            return Err(argument(format!("{} probabilities for {} bins", probs.len(), grid.len())));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(argument("probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(argument(format!("probabilities sum to {total}")));
        }
        Ok(StateDistribution { grid, probs })
    }

    pub fn uniform(grid: GainGrid) -> Self {
        let k = grid.len();
        StateDistribution { grid, probs: vec![1.0 / k as f64; k] }
    }

    /// All mass in the bin containing `gain`.
    pub fn point_mass(grid: GainGrid, gain: f64) -> Self {
        let mut probs = vec![0.0; grid.len()];
        probs[grid.bin_of(gain)] = 1.0;
        StateDistribution { grid, probs }
    }

    /// Σ_k P(k) · G_ref(k).
    pub fn mean(&self) -> f64 {
        self.probs.iter().zip(self.grid.centers()).map(|(p, c)| p * c).sum()
    }

    /// Σ_k P(k) · 1{G_ref(k) > α}.
    pub fn outage_value(&self, alpha: f64) -> f64 {
        outage_sum(&self.probs, self.grid.centers(), alpha)
    }

    /// p(G > x) at every `x`; `xs` must be sorted ascending.
    pub fn ccdf(&self, xs: &[f64]) -> Result<Vec<f64>> {
        ccdf_from_distribution(self, xs)
    }
}

/// Threshold of an outage query: values of p(G > alpha).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageQuery {
    pub alpha: f64,
}

fn outage_sum(probs: &[f64], centers: &[f64], alpha: f64) -> f64 {
    probs.iter().zip(centers).filter(|(_, &c)| c > alpha).map(|(p, _)| p).sum()
}

pub fn outage_value(dist: &StateDistribution, q: OutageQuery) -> f64 {
    dist.outage_value(q.alpha)
}

pub(crate) fn check_sorted(xs: &[f64]) -> Result<()> {
    if xs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(argument("evaluation points must be sorted ascending"));
    }
    Ok(())
}

/// Analytic CCDF of a distribution at sorted points `xs`.
pub fn ccdf_from_distribution(dist: &StateDistribution, xs: &[f64]) -> Result<Vec<f64>> {
    check_sorted(xs)?;
    // Suffix sums keep the curve nonincreasing regardless of rounding.
    let mut tail = vec![0.0; dist.probs.len() + 1];
    for k in (0..dist.probs.len()).rev() {
        tail[k] = tail[k + 1] + dist.probs[k];
    }
    let centers = dist.grid.centers();
    Ok(xs.iter().map(|&x| tail[centers.partition_point(|&c| c <= x)].min(1.0)).collect())
}

/// Starting vectors for the fixed-point iterations.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Uniform,
    /// All mass in the bin containing the state's value.
    PointMass(ValueTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// States updated in declared order, later states reading earlier
    /// states' fresh vectors.
    InPlace,
    /// Every state reads the previous sweep's vectors.
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub sweep: SweepMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, sweep: SweepMode::InPlace }
    }
}

impl SolverConfig {
    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(argument(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Initial probability vectors, one per state.
pub fn initial_probs(grids: &[GainGrid], init: &Init) -> Result<Vec<Vec<f64>>> {
    match init {
        Init::Uniform => Ok(grids.iter().map(|g| StateDistribution::uniform(g.clone()).probs).collect()),
        Init::PointMass(values) => {
            if values.values.len() != grids.len() {
                return Err(argument("initial value table does not cover every state"));
            }
            Ok(grids
                .iter()
                .zip(&values.values)
                .map(|(g, &v)| StateDistribution::point_mass(g.clone(), v).probs)
                .collect())
        }
    }
}

/// Clamps negative components to zero and rescales to unit sum. Vectors
/// already summing to 1 within a few ulps are left untouched.
pub fn renormalize(probs: &mut [f64]) {
    for p in probs.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    assert!(total > 0.0, "probability vector lost all mass");
    if (total - 1.0).abs() > 4.0 * f64::EPSILON {
        for p in probs.iter_mut() {
            *p /= total;
        }
    }
}

fn debug_check_normalized(probs: &[Vec<f64>]) {
    for p in probs {
        let total: f64 = p.iter().sum();
        debug_assert!((total - 1.0).abs() <= NORMALIZATION_TOLERANCE, "distribution sums to {total}");
    }
}

/// One sweep of the fixed-policy update. Returns the sup-norm change.
pub fn policy_sweep(rule: &BinningRule, policy: &Policy, probs: &mut Vec<Vec<f64>>, mode: SweepMode) -> f64 {
    let update = |s: StateId, current: &[Vec<f64>]| {
        let r = rule.rule(s, policy.action(s)).expect("binning rule covers the policy");
        let mut next = vec![0.0; current[s].len()];
        r.propagate(current, &mut next);
        renormalize(&mut next);
        next
    };
    let change = match mode {
        SweepMode::InPlace => {
            let mut change: f64 = 0.0;
            for s in 0..probs.len() {
                let next = update(s, probs);
                change = change.max(sup_distance(&next, &probs[s]));
                probs[s] = next;
            }
            change
        }
        SweepMode::Snapshot => {
            let next: Vec<Vec<f64>> = (0..probs.len()).into_par_iter().map(|s| update(s, probs)).collect();
            let change = next.iter().zip(probs.iter()).map(|(a, b)| sup_distance(a, b)).fold(0.0, f64::max);
            *probs = next;
            change
        }
    };
    debug_check_normalized(probs);
    change
}

#[derive(Debug, Clone)]
pub struct DistributionSolution {
    pub distributions: Vec<StateDistribution>,
    pub sweeps: usize,
    pub converged: bool,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
}

impl DistributionSolution {
    pub fn outage_values(&self, alpha: f64) -> Vec<f64> {
        self.distributions.iter().map(|d| d.outage_value(alpha)).collect()
    }
}

fn check_grids(mdp: &Mdp, grids: &[GainGrid]) -> Result<()> {
    if grids.len() != mdp.n_states() {
        return Err(Error::GridMismatch(format!("{} grids for {} states", grids.len(), mdp.n_states())));
    }
    Ok(())
}

fn wrap(grids: &[GainGrid], probs: Vec<Vec<f64>>) -> Vec<StateDistribution> {
    grids.iter().zip(probs).map(|(grid, probs)| StateDistribution { grid: grid.clone(), probs }).collect()
}

/// Gain distribution of every state under a fixed policy.
pub fn evaluate_policy_distribution(
    mdp: &Mdp,
    policy: &Policy,
    grids: &[GainGrid],
    init: &Init,
    cfg: &SolverConfig,
) -> Result<DistributionSolution> {
    cfg.check()?;
    check_grids(mdp, grids)?;
    let rule = BinningRule::build(mdp, grids, RuleScope::Policy(policy))?;
    let mut probs = initial_probs(grids, init)?;
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < cfg.max_iter {
        residual = policy_sweep(&rule, policy, &mut probs, cfg.sweep);
        sweeps += 1;
        if residual <= cfg.tol {
            break;
        }
    }
    Ok(DistributionSolution { distributions: wrap(grids, probs), sweeps, converged: residual <= cfg.tol, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Sweep cap reached without meeting the tolerance.
    MaxIterations,
    /// The policy alternates between two policies and the vectors repeat
    /// with period two.
    Oscillating,
}

#[derive(Debug, Clone)]
pub struct OutageSolution {
    pub distributions: Vec<StateDistribution>,
    pub policy: Policy,
    /// Q(s,a,α) per state, in ascending action order, at the final vectors.
    pub q: Vec<Vec<(ActionId, f64)>>,
    pub status: SolveStatus,
    pub sweeps: usize,
    pub residual: f64,
}

impl OutageSolution {
    pub fn q_value(&self, s: StateId, a: ActionId) -> Option<f64> {
        self.q[s].iter().find(|(x, _)| *x == a).map(|(_, q)| *q)
    }

    /// v(s, α) = Q(s, π(s), α).
    pub fn values(&self) -> Vec<f64> {
        (0..self.q.len()).map(|s| self.q_value(s, self.policy.action(s)).unwrap()).collect()
    }
}

/// Q(s,a,α) for every rule of `s` and the unnormalized P_bin of the best one.
fn greedy_update(
    rule: &BinningRule,
    grid: &GainGrid,
    alpha: f64,
    s: StateId,
    probs: &[Vec<f64>],
) -> (Vec<(ActionId, f64)>, usize, Vec<f64>) {
    let k = grid.len();
    let mut candidates = Vec::with_capacity(rule.actions(s).len());
    for r in rule.actions(s) {
        let mut out = vec![0.0; k];
        r.propagate(probs, &mut out);
        let q = outage_sum(&out, grid.centers(), alpha);
        candidates.push((r.action, q, out));
    }
    let best = argmax_first(candidates.iter().map(|c| c.1)).expect("every state has an allowed action");
    let q = candidates.iter().map(|c| (c.0, c.1)).collect();
    let chosen = candidates.swap_remove(best);
    (q, best, chosen.2)
}

/// Outage-optimal policy search: every sweep rebuilds each state's vector
/// from the action maximizing Q(s,a,α).
pub fn solve_outage(
    mdp: &Mdp,
    grids: &[GainGrid],
    q: OutageQuery,
    init: &Init,
    cfg: &SolverConfig,
) -> Result<OutageSolution> {
    cfg.check()?;
    check_grids(mdp, grids)?;
    let rule = BinningRule::build(mdp, grids, RuleScope::AllActions)?;
    let n = mdp.n_states();
    let mut probs = initial_probs(grids, init)?;
    let mut history: Vec<(Vec<usize>, Vec<Vec<f64>>)> = Vec::with_capacity(2);
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;

    while sweeps < cfg.max_iter {
        let before = probs.clone();
        let mut choice = vec![0; n];
        match cfg.sweep {
            SweepMode::InPlace => {
                for s in 0..n {
                    let (_, best, mut next) = greedy_update(&rule, &grids[s], q.alpha, s, &probs);
                    renormalize(&mut next);
                    choice[s] = best;
                    probs[s] = next;
                }
            }
            SweepMode::Snapshot => {
                let updates: Vec<_> =
                    (0..n).into_par_iter().map(|s| greedy_update(&rule, &grids[s], q.alpha, s, &before)).collect();
                for (s, (_, best, mut next)) in updates.into_iter().enumerate() {
                    renormalize(&mut next);
                    choice[s] = best;
                    probs[s] = next;
                }
            }
        }
        debug_check_normalized(&probs);
        sweeps += 1;
        residual = probs.iter().zip(&before).map(|(a, b)| sup_distance(a, b)).fold(0.0, f64::max);
        if residual <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
        if let [(two_back, probs_two_back), (one_back, _)] = history.as_slice() {
            let repeats = probs.iter().zip(probs_two_back).map(|(a, b)| sup_distance(a, b)).fold(0.0, f64::max);
            if choice != *one_back && choice == *two_back && repeats <= cfg.tol {
                status = SolveStatus::Oscillating;
                break;
            }
        }
        if history.len() == 2 {
            history.remove(0);
        }
        history.push((choice, probs.clone()));
    }

    // Q and the greedy choice at the final vectors.
    let mut q_table = Vec::with_capacity(n);
    let mut action_of = Vec::with_capacity(n);
    for s in 0..n {
        let (qs, best, _) = greedy_update(&rule, &grids[s], q.alpha, s, &probs);
        action_of.push(qs[best].0);
        q_table.push(qs);
    }
    Ok(OutageSolution {
        distributions: wrap(grids, probs),
        policy: Policy::new(mdp, action_of)?,
        q: q_table,
        status,
        sweeps,
        residual,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpEntry {
    centers: Vec<f64>,
    probs: Vec<f64>,
}

/// Writes a JSON object mapping each state name to its `centers` and `probs`.
pub fn save_distributions(mdp: &Mdp, dists: &[StateDistribution], path: impl AsRef<Path>) -> Result<()> {
    if dists.len() != mdp.n_states() {
        return Err(argument("one distribution per state is required"));
    }
    let map: serde_json::Map<String, serde_json::Value> = dists
        .iter()
        .enumerate()
        .map(|(s, d)| {
            let entry = DumpEntry { centers: d.grid.centers().to_vec(), probs: d.probs.clone() };
            (mdp.state_name(s).to_string(), serde_json::to_value(entry).expect("serializable"))
        })
        .collect();
    write_json(&map, path.as_ref())
}

/// Reads a distribution dump. Every state of `mdp` must be present.
pub fn load_distributions(mdp: &Mdp, path: impl AsRef<Path>) -> Result<Vec<StateDistribution>> {
    let path = path.as_ref();
    let mut map: serde_json::Map<String, serde_json::Value> = read_json(path)?;
    (0..mdp.n_states())
        .map(|s| {
            let name = mdp.state_name(s);
            let value = map
                .remove(name)
                .ok_or_else(|| argument(format!("{}: no distribution for state {name}", path.display())))?;
            let entry: DumpEntry = serde_json::from_value(value)
                .map_err(|e| argument(format!("{}: state {name}: {e}", path.display())))?;
            StateDistribution::new(GainGrid::new(entry.centers)?, entry.probs)
        })
        .collect()
}
