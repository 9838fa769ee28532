//! Shared fixtures for the integration tests.

#![allow(dead_code)]

pub mod oracle;

use outage_core::mdp::{random_mdp, MdpModel};

/// Seeded random model with a fixed policy given as action names per state.
pub struct Case {
    pub model: MdpModel,
    pub policy: Vec<String>,
}

pub const CORPUS_DISCOUNTS: [f64; 4] = [0.5, 0.7, 0.8, 0.9];

/// Twenty models cycling through 2–4 states, 1–3 actions and the discounts
/// above; case `i` plays action `(s + i) mod n_actions` in state `s`.
pub fn corpus() -> Vec<Case> {
    (0..20usize)
        .map(|i| {
            let n_states = 2 + i % 3;
            let n_actions = 1 + (i / 3) % 3;
            let discount = CORPUS_DISCOUNTS[i % 4];
            let model = random_mdp(n_states, n_actions, discount, 1000 + i as u64).expect("corpus model");
            let policy = (0..n_states).map(|s| format!("a{}", (s + i) % n_actions)).collect();
            Case { model, policy }
        })
        .collect()
}

/// The outage tolerance of a K-bin grid of width Δ against a
/// horizon-`horizon` oracle: Δ/(1−λ) + λ^H·max|r|/(1−λ).
pub fn oracle_tolerance(bin_width: f64, discount: f64, max_abs_reward: f64, horizon: i32) -> f64 {
    (bin_width + discount.powi(horizon) * max_abs_reward) / (1.0 - discount)
}
