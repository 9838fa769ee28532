//! Classical expected-gain machinery: value iteration, Q-values, greedy
//! policies and exact policy evaluation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{argument, Result};
use crate::mdp::{ActionId, Mdp, Policy, StateId};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Relative slack under which two action scores count as tied. Ties go to
/// the lowest declared action index.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Expected discounted gain per state, indexed by [`StateId`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn get(&self, s: StateId) -> f64 {
        self.values[s]
    }
}

#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub values: ValueTable,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of each sweep.
    pub residuals: Vec<f64>,
}

/// Q(s,a) = R(s,a) + λ Σ p(s'|s,a) v(s'), summed per outcome.
fn q_value(mdp: &Mdp, values: &[f64], s: StateId, a: ActionId) -> f64 {
    let lambda = mdp.discount();
    mdp.outcomes(s, a).iter().map(|o| o.prob * (o.reward + lambda * values[o.next])).sum()
}

/// Index of the maximum, lowest index winning near-ties.
pub(crate) fn argmax_first(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let scores: Vec<f64> = scores.into_iter().collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOLERANCE * best.abs().max(1.0);
    scores.iter().position(|&q| q >= best - slack)
}

/// Synchronous value iteration. Each sweep reads only the previous
/// snapshot, so the result does not depend on state order.
pub fn value_iteration(mdp: &Mdp, tol: f64, max_iter: usize) -> Result<ValueIteration> {
    if !(tol > 0.0) {
        return Err(argument(format!("tolerance must be positive, got {tol}")));
    }
    let n = mdp.n_states();
    let mut values = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut converged = false;

    for _ in 0..max_iter {
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|s| mdp.allowed(s).iter().map(|&a| q_value(mdp, &values, s, a)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let change = sup_distance(&next, &values);
        values = next;
        residuals.push(change);
        if change <= tol {
            converged = true;
            break;
        }
    }

    Ok(ValueIteration { values: ValueTable { values }, iterations: residuals.len(), converged, residuals })
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Q-values of every allowed action of `s`, in allowed order.
pub fn q_values(mdp: &Mdp, values: &ValueTable, s: StateId) -> Result<Vec<(ActionId, f64)>> {
    if s >= mdp.n_states() {
        return Err(argument(format!("unknown state index {s}")));
    }
    Ok(mdp.allowed(s).iter().map(|&a| (a, q_value(mdp, &values.values, s, a))).collect())
}

/// argmax_a Q(s,a) per state; ties go to the lowest declared action index.
pub fn greedy_policy(mdp: &Mdp, values: &ValueTable) -> Policy {
    let action_of = (0..mdp.n_states())
        .map(|s| {
            let mut allowed = mdp.allowed(s).to_vec();
            allowed.sort_unstable();
            let best = argmax_first(allowed.iter().map(|&a| q_value(mdp, &values.values, s, a)))
                .expect("every state has an allowed action");
            allowed[best]
        })
        .collect();
    Policy::new(mdp, action_of).expect("greedy actions are allowed")
}

/// Solves v = R_π + λ P_π v directly, followed by one refinement step.
pub fn policy_evaluation_exact(mdp: &Mdp, policy: &Policy) -> ValueTable {
    let n = mdp.n_states();
    let lambda = mdp.discount();
    let mut system = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        let a = policy.action(s);
        rhs[s] = mdp.expected_reward(s, a);
        for o in mdp.outcomes(s, a) {
            system[(s, o.next)] -= lambda * o.prob;
        }
    }
    let lu = system.clone().lu();
    let mut v = lu.solve(&rhs).expect("I - λP is nonsingular for λ < 1");
    let residual = &rhs - &system * &v;
    if let Some(correction) = lu.solve(&residual) {
        v += correction;
    }
    ValueTable { values: v.iter().copied().collect() }
}

/// Iterates the policy's Bellman operator until the sup-norm change is at most `tol`.
pub fn policy_evaluation_iterative(mdp: &Mdp, policy: &Policy, tol: f64, max_iter: usize) -> ValueTable {
    let n = mdp.n_states();
    let mut values = vec![0.0; n];
    for _ in 0..max_iter {
        let next: Vec<f64> = (0..n).map(|s| q_value(mdp, &values, s, policy.action(s))).collect();
        let change = sup_distance(&next, &values);
        values = next;
        if change <= tol {
            break;
        }
    }
    ValueTable { values }
}
