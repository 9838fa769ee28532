//! Solvers for finite discounted MDPs that go beyond the expected gain.
//!
//! Besides classical value iteration ([`expected`]), the crate computes the
//! whole per-state gain distribution on a binned grid and searches for
//! policies maximizing the probability that the gain exceeds a threshold
//! ([`distributional`]). Monte Carlo rollouts ([`rollout`]) validate the
//! analytic distributions, and [`td`] holds the temporal-difference variant
//! of the distributional update.

pub mod distributional;
pub mod error;
pub mod expected;
pub mod mdp;
pub mod rollout;
pub mod td;

pub use error::{Error, Result};
pub use mdp::{ActionId, Mdp, MdpModel, Policy, StateId};
