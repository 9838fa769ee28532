//! Brute-force references used only by tests. Everything here reads the raw
//! `MdpModel` records directly instead of the solver's indexed view.

#![allow(dead_code)]

use outage_core::mdp::MdpModel;

/// `(to, prob, reward)` rows of `(from, action)` straight from the records.
fn row<'a>(model: &'a MdpModel, from: &'a str, action: &'a str) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
    model.transitions.iter().filter(move |t| t.from == from && t.action == action && t.prob > 0.0).map(move |t| {
        let to = model.states.iter().position(|s| *s == t.to).unwrap();
        (to, t.prob, t.reward)
    })
}

/// Every length-`horizon` path from `start` under the action names in
/// `policy` (indexed by state), as `(truncated gain, probability)`.
pub fn enumerate_paths(model: &MdpModel, policy: &[String], start: usize, horizon: usize) -> Vec<(f64, f64)> {
    let rows: Vec<Vec<(usize, f64, f64)>> =
        model.states.iter().zip(policy).map(|(s, a)| row(model, s, a).collect()).collect();
    let mut out = Vec::new();
    let mut stack = vec![(start, 0usize, 0.0f64, 1.0f64, 1.0f64)];
    while let Some((state, depth, gain, prob, weight)) = stack.pop() {
        if depth == horizon {
            out.push((gain, prob));
            continue;
        }
        for &(to, p, r) in &rows[state] {
            stack.push((to, depth + 1, gain + weight * r, prob * p, weight * model.discount));
        }
    }
    out
}

/// p(G_H > alpha) over enumerated paths.
pub fn path_outage(paths: &[(f64, f64)], alpha: f64) -> f64 {
    paths.iter().filter(|(g, _)| *g > alpha).map(|(_, p)| p).sum()
}

/// Enumerated paths sorted by gain with suffix sums, so each outage query
/// is a binary search instead of a scan.
pub struct PathCcdf {
    gains: Vec<f64>,
    tail: Vec<f64>,
}

impl PathCcdf {
    pub fn new(mut paths: Vec<(f64, f64)>) -> Self {
        paths.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let gains: Vec<f64> = paths.iter().map(|p| p.0).collect();
        let mut tail = vec![0.0; paths.len() + 1];
        for i in (0..paths.len()).rev() {
            tail[i] = tail[i + 1] + paths[i].1;
        }
        PathCcdf { gains, tail }
    }

    /// p(G_H > alpha).
    pub fn outage(&self, alpha: f64) -> f64 {
        self.tail[self.gains.partition_point(|&g| g <= alpha)]
    }

    pub fn outages(&self, alphas: &[f64]) -> Vec<f64> {
        alphas.iter().map(|&a| self.outage(a)).collect()
    }
}

/// p(G_H > alpha) for each of `alphas`, streaming every path of length
/// `horizon` into a histogram over the sorted thresholds instead of storing
/// the paths. Same gains and the same strict comparison as
/// [`enumerate_paths`] + [`path_outage`].
pub fn path_outages(model: &MdpModel, policy: &[String], start: usize, horizon: usize, alphas: &[f64]) -> Vec<f64> {
    let rows: Vec<Vec<(usize, f64, f64)>> =
        model.states.iter().zip(policy).map(|(s, a)| row(model, s, a).collect()).collect();
    let mut sorted = alphas.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    // mass[c] collects paths exceeding exactly the c smallest thresholds.
    let mut mass = vec![0.0; sorted.len() + 1];
    let mut stack = vec![(start, 0usize, 0.0f64, 1.0f64, 1.0f64)];
    while let Some((state, depth, gain, prob, weight)) = stack.pop() {
        if depth == horizon {
            mass[sorted.partition_point(|&t| t < gain)] += prob;
            continue;
        }
        for &(to, p, r) in &rows[state] {
            stack.push((to, depth + 1, gain + weight * r, prob * p, weight * model.discount));
        }
    }
    let mut above = vec![0.0; sorted.len() + 1];
    for c in (0..sorted.len()).rev() {
        above[c] = above[c + 1] + mass[c + 1];
    }
    alphas.iter().map(|a| above[sorted.partition_point(|t| t < a)]).collect()
}

/// Optimal values of the horizon-`horizon` problem by backward induction.
pub fn truncated_optimal_values(model: &MdpModel, horizon: usize) -> Vec<f64> {
    let mut v = vec![0.0; model.states.len()];
    for _ in 0..horizon {
        v = model
            .states
            .iter()
            .map(|s| {
                model.allowed[s]
                    .iter()
                    .map(|a| row(model, s, a).map(|(to, p, r)| p * (r + model.discount * v[to])).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    v
}

/// One-step lookahead Q(s, a) summed over the raw records.
pub fn lookahead_q(model: &MdpModel, values: &[f64], state: usize, action: &str) -> f64 {
    let s = &model.states[state];
    let expected_reward: f64 = row(model, s, action).map(|(_, p, r)| p * r).sum();
    let continuation: f64 = row(model, s, action).map(|(to, p, _)| p * values[to]).sum();
    expected_reward + model.discount * continuation
}

/// Value of a fixed policy by plain fixed-point iteration to `tol`.
pub fn iterate_policy_values(model: &MdpModel, policy: &[String], tol: f64) -> Vec<f64> {
    let mut v = vec![0.0; model.states.len()];
    loop {
        let next: Vec<f64> = (0..model.states.len()).map(|s| lookahead_q(model, &v, s, &policy[s])).collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= tol {
            return v;
        }
    }
}

/// Every deterministic policy as action names per state.
pub fn all_policies(model: &MdpModel) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for s in &model.states {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<String>| {
                model.allowed[s].iter().map(move |a| {
                    let mut p = prefix.clone();
                    p.push(a.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Checks p_Ω(G > α) against a reference CCDF with a horizontal tolerance
/// `shift` in gain units: ref(α + shift) ≤ Ω(α) ≤ ref(α − shift). Returns
/// the worst violation (≤ 0 when the sandwich holds everywhere).
pub fn sandwich_violation(
    omega: impl Fn(f64) -> f64,
    reference: impl Fn(&[f64]) -> Vec<f64>,
    alphas: &[f64],
    shift: f64,
) -> f64 {
    let shifted: Vec<f64> = alphas.iter().flat_map(|&a| [a + shift, a - shift]).collect();
    let bounds = reference(&shifted);
    alphas
        .iter()
        .zip(bounds.chunks(2))
        .map(|(&a, b)| {
            let value = omega(a);
            (b[0] - value).max(value - b[1])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
