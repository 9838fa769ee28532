//! Monte Carlo rollouts: reproducibility and agreement with exact values.

use outage_core::expected::policy_evaluation_exact;
use outage_core::mdp::{random_mdp, recycling_robot, Mdp, Policy};
use outage_core::rollout::{empirical_ccdf, horizon, simulate_gains, RolloutConfig, DEFAULT_TRUNCATION_EPS};

fn config(episodes: usize, seed: u64) -> RolloutConfig {
    RolloutConfig { episodes, truncation_eps: DEFAULT_TRUNCATION_EPS, seed }
}

#[test]
fn gains_do_not_depend_on_the_worker_count() {
    let mdp = Mdp::new(random_mdp(4, 2, 0.9, 11).unwrap()).unwrap();
    let policy = Policy::first_allowed(&mdp);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_gains(&mdp, &policy, 2, &config(5_000, 42)).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn seeds_select_different_streams() {
    let mdp = Mdp::new(recycling_robot()).unwrap();
    let policy = Policy::first_allowed(&mdp);
    let a = simulate_gains(&mdp, &policy, 0, &config(1_000, 1)).unwrap();
    let b = simulate_gains(&mdp, &policy, 0, &config(1_000, 2)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn sample_mean_matches_the_exact_value() {
    let mdp = Mdp::new(random_mdp(3, 2, 0.8, 21).unwrap()).unwrap();
    let policy = Policy::new(&mdp, vec![1, 0, 1]).unwrap();
    let v = policy_evaluation_exact(&mdp, &policy);
    for start in 0..3 {
        let gains = simulate_gains(&mdp, &policy, start, &config(200_000, 7)).unwrap();
        let mean = gains.iter().sum::<f64>() / gains.len() as f64;
        // Truncation bias ≤ 1e-3; standard error ≤ 5/(1−λ)/√n ≈ 0.011 is a
        // loose ceiling, the realized spread is far smaller.
        assert!((mean - v.get(start)).abs() < 0.02, "state {start}: {mean} vs {}", v.get(start));
    }
}

#[test]
fn truncation_tail_is_below_epsilon() {
    let mdp = Mdp::new(recycling_robot()).unwrap();
    let t = horizon(&mdp, 1e-3);
    let tail = |t: usize| mdp.discount().powi(t as i32) * mdp.max_abs_reward() / (1.0 - mdp.discount());
    assert!(tail(t) < 1e-3);
    assert!(tail(t - 1) >= 1e-3);
}

#[test]
fn deterministic_chain_has_a_step_ccdf() {
    let mdp = Mdp::new(recycling_robot()).unwrap();
    let policy = Policy::from_names(&mdp, [("low", "wait"), ("high", "search")]).unwrap();
    let gains = simulate_gains(&mdp, &policy, 0, &config(100, 3)).unwrap();
    let ccdf = empirical_ccdf(&gains, &[1.99, 2.0]).unwrap();
    assert_eq!(ccdf, vec![1.0, 0.0]);
}
