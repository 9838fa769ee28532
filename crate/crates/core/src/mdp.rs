//! MDP data model, validation, persistence and built-in example models.
//!
//! [`MdpModel`] is the plain, name-based description that maps one-to-one
//! onto the description file. Solvers work on [`Mdp`], an index-based view
//! that can only be built from a model passing [`validate_mdp`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// Index of a state in declared order.
pub type StateId = usize;
/// Index of an action in declared order.
pub type ActionId = usize;

/// Tolerance on the sum of a transition row.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    pub action: String,
    pub to: String,
    pub prob: f64,
    pub reward: f64,
}

/// Name-based MDP description. Transitions absent from the list have
/// probability zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpModel {
    pub discount: f64,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub allowed: BTreeMap<String, Vec<String>>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoStates,
    NoActions,
    DuplicateState(String),
    DuplicateAction(String),
    DiscountOutOfRange(f64),
    UnknownStateInAllowed(String),
    UnknownActionInAllowed { state: String, action: String },
    NoAllowedActions(String),
    UnknownState { row: usize, name: String },
    UnknownAction { row: usize, name: String },
    ActionNotAllowed { row: usize, state: String, action: String },
    ProbabilityOutOfRange { row: usize, prob: f64 },
    NonFiniteReward { row: usize },
    DuplicateTransition { row: usize, from: String, action: String, to: String },
    RowSum { state: String, action: String, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "model declares no states"),
            Violation::NoActions => write!(f, "model declares no actions"),
            Violation::DuplicateState(s) => write!(f, "state {s} declared twice"),
            Violation::DuplicateAction(a) => write!(f, "action {a} declared twice"),
            Violation::DiscountOutOfRange(d) if *d >= 1.0 => {
                write!(f, "discount must be < 1 (got {d})")
            }
            Violation::DiscountOutOfRange(d) => write!(f, "discount must be in [0, 1) (got {d})"),
            Violation::UnknownStateInAllowed(s) => write!(f, "allowed: unknown state {s}"),
            Violation::UnknownActionInAllowed { state, action } => {
                write!(f, "allowed: unknown action {action} for state {state}")
            }
            Violation::NoAllowedActions(s) => write!(f, "state {s} has no allowed action"),
            Violation::UnknownState { row, name } => {
                write!(f, "transition {row}: unknown state {name}")
            }
            Violation::UnknownAction { row, name } => {
                write!(f, "transition {row}: unknown action {name}")
            }
            Violation::ActionNotAllowed { row, state, action } => {
                write!(f, "transition {row}: action {action} is not allowed in state {state}")
            }
            Violation::ProbabilityOutOfRange { row, prob } => {
                write!(f, "transition {row}: probability {prob} outside [0, 1]")
            }
            Violation::NonFiniteReward { row } => write!(f, "transition {row}: reward is not finite"),
            Violation::DuplicateTransition { row, from, action, to } => {
                write!(f, "transition {row}: duplicate entry ({from}, {action}) -> {to}")
            }
            Violation::RowSum { state, action, sum } => {
                write!(f, "row ({state}, {action}) sums to {}", round_sig(*sum))
            }
        }
    }
}

fn round_sig(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Result of [`validate_mdp`]. Violations are data, not failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of `model` and lists all violations.
pub fn validate_mdp(model: &MdpModel) -> ValidationReport {
    let mut violations = Vec::new();

    if model.states.is_empty() {
        violations.push(Violation::NoStates);
    }
    if model.actions.is_empty() {
        violations.push(Violation::NoActions);
    }
    if !(0.0..1.0).contains(&model.discount) {
        violations.push(Violation::DiscountOutOfRange(model.discount));
    }

    let mut states = HashSet::new();
    for s in &model.states {
        if !states.insert(s.as_str()) {
            violations.push(Violation::DuplicateState(s.clone()));
        }
    }
    let mut actions = HashSet::new();
    for a in &model.actions {
        if !actions.insert(a.as_str()) {
            violations.push(Violation::DuplicateAction(a.clone()));
        }
    }

    for (s, acts) in &model.allowed {
        if !states.contains(s.as_str()) {
            violations.push(Violation::UnknownStateInAllowed(s.clone()));
        }
        for a in acts {
            if !actions.contains(a.as_str()) {
                violations.push(Violation::UnknownActionInAllowed { state: s.clone(), action: a.clone() });
            }
        }
    }
    for s in &model.states {
        if model.allowed.get(s).is_none_or(|a| a.is_empty()) {
            violations.push(Violation::NoAllowedActions(s.clone()));
        }
    }

    let mut seen = HashSet::new();
    let mut sums: HashMap<(&str, &str), f64> = HashMap::new();
    for (row, t) in model.transitions.iter().enumerate() {
        let mut known = true;
        for name in [&t.from, &t.to] {
            if !states.contains(name.as_str()) {
                violations.push(Violation::UnknownState { row, name: name.clone() });
                known = false;
            }
        }
        if !actions.contains(t.action.as_str()) {
            violations.push(Violation::UnknownAction { row, name: t.action.clone() });
            known = false;
        }
        if !(0.0..=1.0).contains(&t.prob) {
            violations.push(Violation::ProbabilityOutOfRange { row, prob: t.prob });
        }
        if !t.reward.is_finite() {
            violations.push(Violation::NonFiniteReward { row });
        }
        if !known {
            continue;
        }
        let allowed = model.allowed.get(&t.from).is_some_and(|a| a.contains(&t.action));
        if !allowed {
            violations.push(Violation::ActionNotAllowed { row, state: t.from.clone(), action: t.action.clone() });
        }
        if !seen.insert((t.from.as_str(), t.action.as_str(), t.to.as_str())) {
            violations.push(Violation::DuplicateTransition {
                row,
                from: t.from.clone(),
                action: t.action.clone(),
                to: t.to.clone(),
            });
        }
        *sums.entry((t.from.as_str(), t.action.as_str())).or_default() += t.prob;
    }

    // Row sums in declared (state, allowed action) order.
    for s in &model.states {
        let Some(acts) = model.allowed.get(s) else { continue };
        for a in acts {
            if !actions.contains(a.as_str()) {
                continue;
            }
            let sum = sums.get(&(s.as_str(), a.as_str())).copied().unwrap_or(0.0);
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSum { state: s.clone(), action: a.clone(), sum });
            }
        }
    }

    ValidationReport { violations }
}

/// One non-zero-probability outcome of taking an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: StateId,
    pub prob: f64,
    pub reward: f64,
}

/// Validated, index-based MDP. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Mdp {
    model: MdpModel,
    allowed: Vec<Vec<ActionId>>,
    // [state][action]; empty for actions not allowed in the state.
    outcomes: Vec<Vec<Vec<Outcome>>>,
}

impl Mdp {
    pub fn new(model: MdpModel) -> Result<Self> {
        let report = validate_mdp(&model);
        if !report.is_ok() {
            return Err(Error::Invalid(report));
        }
        let state_ix: HashMap<&str, StateId> = model.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let action_ix: HashMap<&str, ActionId> =
            model.actions.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();

        let allowed: Vec<Vec<ActionId>> =
            model.states.iter().map(|s| model.allowed[s].iter().map(|a| action_ix[a.as_str()]).collect()).collect();

        let mut outcomes = vec![vec![Vec::new(); model.actions.len()]; model.states.len()];
        for t in &model.transitions {
            if t.prob == 0.0 {
                continue;
            }
            let from = state_ix[t.from.as_str()];
            let action = action_ix[t.action.as_str()];
            outcomes[from][action].push(Outcome { next: state_ix[t.to.as_str()], prob: t.prob, reward: t.reward });
        }
        // Successors in declared state order.
        for row in outcomes.iter_mut().flatten() {
            row.sort_by_key(|o| o.next);
        }

        Ok(Mdp { model, allowed, outcomes })
    }

    pub fn model(&self) -> &MdpModel {
        &self.model
    }

    pub fn n_states(&self) -> usize {
        self.model.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.model.actions.len()
    }

    pub fn discount(&self) -> f64 {
        self.model.discount
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.model.states[s]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.model.actions[a]
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.model.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<ActionId> {
        self.model.actions.iter().position(|a| a == name)
    }

    /// Allowed actions of `s` in declared action order of the `allowed` entry.
    pub fn allowed(&self, s: StateId) -> &[ActionId] {
        &self.allowed[s]
    }

    pub fn is_allowed(&self, s: StateId, a: ActionId) -> bool {
        self.allowed[s].contains(&a)
    }

    /// Non-zero-probability outcomes of `(s, a)`, ordered by successor.
    pub fn outcomes(&self, s: StateId, a: ActionId) -> &[Outcome] {
        &self.outcomes[s][a]
    }

    /// R(s,a) = Σ p(s'|s,a) r(s,s').
    pub fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.outcomes(s, a).iter().map(|o| o.prob * o.reward).sum()
    }

    /// Smallest and largest reward over all reachable transitions.
    pub fn reward_range(&self) -> (f64, f64) {
        self.outcomes
            .iter()
            .flatten()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.reward), hi.max(o.reward)))
    }

    pub fn max_abs_reward(&self) -> f64 {
        let (lo, hi) = self.reward_range();
        lo.abs().max(hi.abs())
    }

    /// Bound on |G| for any policy: max|r| / (1 − λ).
    pub fn gain_bound(&self) -> f64 {
        self.max_abs_reward() / (1.0 - self.discount())
    }
}

/// Deterministic stationary policy, one allowed action per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    action_of: Vec<ActionId>,
}

impl Policy {
    pub fn new(mdp: &Mdp, action_of: Vec<ActionId>) -> Result<Self> {
        if action_of.len() != mdp.n_states() {
            return Err(argument(format!("policy covers {} states, model has {}", action_of.len(), mdp.n_states())));
        }
        for (s, &a) in action_of.iter().enumerate() {
            if a >= mdp.n_actions() || !mdp.is_allowed(s, a) {
                return Err(argument(format!("policy action index {a} is not allowed in state {}", mdp.state_name(s))));
            }
        }
        Ok(Policy { action_of })
    }

    /// Policy taking the first allowed action everywhere.
    pub fn first_allowed(mdp: &Mdp) -> Self {
        Policy { action_of: (0..mdp.n_states()).map(|s| mdp.allowed(s)[0]).collect() }
    }

    /// Builds a policy from `(state, action)` names. Every state must be covered.
    pub fn from_names<'a>(mdp: &Mdp, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut action_of = vec![None; mdp.n_states()];
        for (s, a) in pairs {
            let si = mdp.state_index(s).ok_or_else(|| argument(format!("unknown state {s}")))?;
            let ai = mdp.action_index(a).ok_or_else(|| argument(format!("unknown action {a}")))?;
            action_of[si] = Some(ai);
        }
        let action_of = action_of
            .into_iter()
            .enumerate()
            .map(|(s, a)| a.ok_or_else(|| argument(format!("policy has no action for state {}", mdp.state_name(s)))))
            .collect::<Result<Vec<_>>>()?;
        Policy::new(mdp, action_of)
    }

    pub fn action(&self, s: StateId) -> ActionId {
        self.action_of[s]
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.action_of
    }

    /// `(state, action)` names in declared state order.
    pub fn to_names<'m>(&self, mdp: &'m Mdp) -> Vec<(&'m str, &'m str)> {
        self.action_of.iter().enumerate().map(|(s, &a)| (mdp.state_name(s), mdp.action_name(a))).collect()
    }
}

/// Two-state, three-action recycling robot with β = 0.8, r_search = 0.9,
/// r_wait = 0.4, r_rescue = −1, recharge reward 0 and λ = 0.8.
pub fn recycling_robot() -> MdpModel {
    const BETA: f64 = 0.8;
    const R_SEARCH: f64 = 0.9;
    const R_WAIT: f64 = 0.4;
    const R_RESCUE: f64 = -1.0;

    let t = |from: &str, action: &str, to: &str, prob: f64, reward: f64| Transition {
        from: from.into(),
        action: action.into(),
        to: to.into(),
        prob,
        reward,
    };
    let all: Vec<String> = ["search", "wait", "recharge"].map(String::from).to_vec();
    MdpModel {
        discount: 0.8,
        states: vec!["low".into(), "high".into()],
        actions: all.clone(),
        allowed: BTreeMap::from([("low".into(), all.clone()), ("high".into(), all)]),
        transitions: vec![
            t("low", "search", "low", BETA, R_SEARCH),
            t("low", "search", "high", 1.0 - BETA, R_RESCUE),
            t("low", "wait", "low", 1.0, R_WAIT),
            t("low", "recharge", "high", 1.0, 0.0),
            t("high", "search", "high", BETA, R_SEARCH),
            t("high", "search", "low", 1.0 - BETA, R_SEARCH),
            t("high", "wait", "high", 1.0, R_WAIT),
            t("high", "recharge", "high", 1.0, 0.0),
        ],
    }
}

/// Seeded random MDP with dense normalized transition rows and rewards in
/// [−1, 1]. Every action is allowed in every state.
pub fn random_mdp(n_states: usize, n_actions: usize, discount: f64, seed: u64) -> Result<MdpModel> {
    if n_states == 0 || n_actions == 0 {
        return Err(argument("random_mdp needs at least one state and one action"));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(argument(format!("discount must be in [0, 1), got {discount}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<String> = (0..n_states).map(|i| format!("s{i}")).collect();
    let actions: Vec<String> = (0..n_actions).map(|i| format!("a{i}")).collect();
    let allowed = states.iter().map(|s| (s.clone(), actions.clone())).collect();

    let mut transitions = Vec::with_capacity(n_states * n_states * n_actions);
    for from in &states {
        for action in &actions {
            // Shifted away from zero so no outcome is negligible.
            let weights: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (to, w) in states.iter().zip(&weights) {
                transitions.push(Transition {
                    from: from.clone(),
                    action: action.clone(),
                    to: to.clone(),
                    prob: w / total,
                    reward: rng.random_range(-1.0..=1.0),
                });
            }
        }
    }
    Ok(MdpModel { discount, states, actions, allowed, transitions })
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io { path: path.into(), source })
}

/// Reads a description file. The result is not validated; see [`load_mdp_validated`].
pub fn load_mdp(path: impl AsRef<Path>) -> Result<MdpModel> {
    read_json(path.as_ref())
}

/// Reads a description file and builds the validated view.
pub fn load_mdp_validated(path: impl AsRef<Path>) -> Result<Mdp> {
    Mdp::new(load_mdp(path)?)
}

pub fn save_mdp(model: &MdpModel, path: impl AsRef<Path>) -> Result<()> {
    write_json(model, path.as_ref())
}

/// Reads a policy file: a JSON object mapping state name to action name.
pub fn load_policy(mdp: &Mdp, path: impl AsRef<Path>) -> Result<Policy> {
    let map: serde_json::Map<String, serde_json::Value> = read_json(path.as_ref())?;
    let mut pairs = Vec::with_capacity(map.len());
    for (s, a) in &map {
        let a = a.as_str().ok_or_else(|| argument(format!("policy entry for {s} is not a string")))?;
        pairs.push((s.as_str(), a));
    }
    Policy::from_names(mdp, pairs)
}

pub fn save_policy(mdp: &Mdp, policy: &Policy, path: impl AsRef<Path>) -> Result<()> {
    let map: serde_json::Map<String, serde_json::Value> =
        policy.to_names(mdp).into_iter().map(|(s, a)| (s.to_string(), serde_json::Value::from(a))).collect();
    write_json(&map, path.as_ref())
}
