use crate::distributional::GainGrid;
use crate::error::{argument, Result};
use crate::mdp::{ActionId, Mdp, Policy, StateId};

/// Which actions a [`BinningRule`] is materialized for.
#[derive(Debug, Clone, Copy)]
pub enum RuleScope<'a> {
    Policy(&'a Policy),
    AllActions,
}

/// Target bins for one successor of a `(state, action)` pair: source bin
/// `k` of the successor's grid maps to bin `targets[k]` of the state's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorBins {
    pub next: StateId,
    pub prob: f64,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRule {
    pub action: ActionId,
    pub successors: Vec<SuccessorBins>,
}

impl ActionRule {
    /// Unnormalized P_bin: `out[k'] = Σ p(s_j) P_{s_j}(k)` over all
    /// `(s_j, k)` mapped to `k'`. Successors are visited in state order,
    /// source bins in ascending order.
    pub fn propagate(&self, probs: &[Vec<f64>], out: &mut [f64]) {
        out.fill(0.0);
        for succ in &self.successors {
            let source = &probs[succ.next];
            for (&target, &p) in succ.targets.iter().zip(source) {
                out[target] += succ.prob * p;
            }
        }
    }

    /// Flattened `(successor, source bin, target bin, factor)` entries.
    pub fn entries(&self) -> impl Iterator<Item = (StateId, usize, usize, f64)> + '_ {
        self.successors
            .iter()
            .flat_map(|succ| succ.targets.iter().enumerate().map(move |(k, &t)| (succ.next, k, t, succ.prob)))
    }
}

/// Precomputed bin mapping of propagated gains r(s,s') + λ·G_ref_{s'}(k)
/// onto each state's own grid.
#[derive(Debug, Clone)]
pub struct BinningRule {
    // [state] -> rules ordered by action index
    rules: Vec<Vec<ActionRule>>,
}

impl BinningRule {
    pub fn build(mdp: &Mdp, grids: &[GainGrid], scope: RuleScope<'_>) -> Result<Self> {
        if grids.len() != mdp.n_states() {
            return Err(argument(format!("{} grids for {} states", grids.len(), mdp.n_states())));
        }
        let lambda = mdp.discount();
        let rules = (0..mdp.n_states())
            .map(|s| {
                let mut actions = match scope {
                    RuleScope::Policy(policy) => vec![policy.action(s)],
                    RuleScope::AllActions => mdp.allowed(s).to_vec(),
                };
                actions.sort_unstable();
                actions
                    .into_iter()
                    .map(|a| ActionRule {
                        action: a,
                        successors: mdp
                            .outcomes(s, a)
                            .iter()
                            .map(|o| SuccessorBins {
                                next: o.next,
                                prob: o.prob,
                                targets: grids[o.next]
                                    .centers()
                                    .iter()
                                    .map(|&c| grids[s].bin_of(o.reward + lambda * c))
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        Ok(BinningRule { rules })
    }

    pub fn n_states(&self) -> usize {
        self.rules.len()
    }

    /// Rules of `s` in ascending action order.
    pub fn actions(&self, s: StateId) -> &[ActionRule] {
        &self.rules[s]
    }

    pub fn rule(&self, s: StateId, a: ActionId) -> Option<&ActionRule> {
        self.rules[s].iter().find(|r| r.action == a)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::mdp::{MdpModel, Transition};

    /// One state s1 with two successors s'1 (prob p, reward 2) and s'2
    /// (reward 0); both successors absorb with reward 0.
    fn two_successor_model(p: f64, discount: f64) -> Mdp {
        let t = |from: &str, to: &str, prob: f64, reward: f64| Transition {
            from: from.into(),
            action: "a".into(),
            to: to.into(),
            prob,
            reward,
        };
        let states: Vec<String> = ["s1", "s1p", "s2p"].map(String::from).to_vec();
        Mdp::new(MdpModel {
            discount,
            allowed: states.iter().map(|s| (s.clone(), vec!["a".to_string()])).collect::<BTreeMap<_, _>>(),
            states,
            actions: vec!["a".into()],
            transitions: vec![
                t("s1", "s1p", p, 2.0),
                t("s1", "s2p", 1.0 - p, 0.0),
                t("s1p", "s1p", 1.0, 0.0),
                t("s2p", "s2p", 1.0, 0.0),
            ],
        })
        .unwrap()
    }

    #[test]
    fn worked_binning_example() {
        let mdp = two_successor_model(0.3, 0.8);
        let grid = GainGrid::new(vec![1.0, 3.0]).unwrap();
        let rule = BinningRule::build(&mdp, &vec![grid; 3], RuleScope::AllActions).unwrap();
        let r = &rule.actions(0)[0];
        // Gains [2.8, 4.4] from s'1 and [0.8, 2.4] from s'2.
        assert_eq!(r.successors[0].targets, vec![1, 1]);
        assert_eq!(r.successors[1].targets, vec![0, 1]);

        let probs = vec![vec![0.5, 0.5], vec![0.1, 0.9], vec![0.6, 0.4]];
        let mut out = [0.0; 2];
        r.propagate(&probs, &mut out);
        // Concatenated path vector P = [p·P_{s'1}, (1−p)·P_{s'2}].
        let path = [0.3 * 0.1, 0.3 * 0.9, 0.7 * 0.6, 0.7 * 0.4];
        assert!((out[0] - path[2]).abs() < 1e-15);
        assert!((out[1] - (path[0] + path[1] + path[3])).abs() < 1e-15);
    }

    #[test]
    fn factors_sum_to_one_and_pairs_are_unique() {
        let mdp = two_successor_model(0.3, 0.8);
        let grid = GainGrid::uniform(-1.0, 11.0, 7).unwrap();
        let rule = BinningRule::build(&mdp, &vec![grid; 3], RuleScope::AllActions).unwrap();
        for s in 0..3 {
            for r in rule.actions(s) {
                let total: f64 = r.successors.iter().map(|x| x.prob).sum();
                assert!((total - 1.0).abs() < 1e-12);
                let mut pairs: Vec<_> = r.entries().map(|(n, k, _, _)| (n, k)).collect();
                let before = pairs.len();
                pairs.sort_unstable();
                pairs.dedup();
                assert_eq!(pairs.len(), before);
                assert_eq!(before, r.successors.len() * 7);
            }
        }
    }

    #[test]
    fn grid_count_must_match() {
        let mdp = two_successor_model(0.3, 0.8);
        let grid = GainGrid::new(vec![1.0, 3.0]).unwrap();
        assert!(BinningRule::build(&mdp, &[grid], RuleScope::AllActions).is_err());
    }
}
