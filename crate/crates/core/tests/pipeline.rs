//! End-to-end checks through the public API.

use drpg_core::analysis::{collect_on_policy_dataset, reward_net_reports, DatasetKind};
use drpg_core::harness::{final_decile_mean, first_decile_mean, run, RunConfig};
use drpg_core::learners::{difference_returns, returns, Algorithm, Trainer};
use drpg_core::rollout::run_episode;
use drpg_core::{EnvKind, GridWorld, JointPolicy, RewardNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn dr_reinforce_improves_on_multi_rover() {
    // 20,000 episodes at three agents; the final decile must beat the first.
    let config = RunConfig {
        seeds: vec![0],
        policy_rate: 5e-3,
        ..RunConfig::new(EnvKind::MultiRover, Algorithm::DrReinforce, 3)
    };
    let outcome = run(&config).unwrap();
    let series = &outcome.curve.rewards[0];
    assert_eq!(series.len(), 20_000);
    assert!(
        final_decile_mean(series) > first_decile_mean(series),
        "{} vs {}",
        final_decile_mean(series),
        first_decile_mean(series)
    );
}

#[test]
fn reward_net_learns_from_training_episodes() {
    let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut trainer = Trainer::new(Algorithm::DrReinforceR, env.clone(), 50, 0.95, 5e-4, 25e-3, &mut rng);
    let policy = trainer.policy.clone();
    let held_out = collect_on_policy_dataset(&policy, &env, 2_000, 50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let mse = |net: &RewardNet| net.mse(held_out.iter().map(|s| (&s.state, s.joint_action.as_slice(), s.reward)));
    let n = held_out.len() as f64;
    let mean = held_out.iter().map(|s| s.reward).sum::<f64>() / n;
    // MSE of the best constant predictor.
    let variance = held_out.iter().map(|s| (s.reward - mean).powi(2)).sum::<f64>() / n;
    let before = mse(trainer.reward_net().unwrap());
    for _ in 0..2_000 {
        trainer.train_episode(&mut rng).unwrap();
    }
    let after = mse(trainer.reward_net().unwrap());
    assert!(after < 0.25 * before, "held-out MSE {before} → {after}");
    assert!(
        after < variance,
        "held-out MSE {after} does not beat the constant predictor ({variance})"
    );

    let reports = reward_net_reports(trainer.reward_net().unwrap(), &trainer.policy, 1_000, 50, 5).unwrap();
    assert_eq!(reports[0].dataset_kind, DatasetKind::OnPolicy);
    assert!(reports.iter().all(|r| r.normalizer > 0.0 && r.sample_count == 1_000));
}

#[test]
fn difference_returns_differ_per_agent_but_share_the_return() {
    let env = GridWorld::new(EnvKind::PredatorPrey, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let policy = JointPolicy::new(&env, &mut rng);
    let start = env.reset(&mut rng);
    let traj = run_episode(&env, &policy, start, 50, &mut rng).unwrap();
    let g = returns(&traj.rewards(), 0.95).unwrap();
    let dg = difference_returns(&traj, &policy, &env, 0.95).unwrap();
    assert_eq!(dg.per_agent.len(), 3);
    for series in &dg.per_agent {
        assert_eq!(series.len(), g.values.len());
    }
}

#[test]
fn every_algorithm_runs_on_both_environments() {
    for env_kind in EnvKind::ALL {
        for algorithm in Algorithm::ALL {
            let config = RunConfig {
                n_episodes: 3,
                horizon: 12,
                seeds: vec![0, 1],
                ..RunConfig::new(env_kind, algorithm, 4)
            };
            let outcome = run(&config).unwrap();
            assert!(outcome.failures.is_empty(), "{env_kind} {algorithm}");
            assert_eq!(outcome.curve.rewards.len(), 2);
            let (lo, hi) = GridWorld::new(env_kind, 4).unwrap().reward_range();
            for r in outcome.curve.rewards.iter().flatten() {
                assert!(*r >= 12.0 * lo - 1e-9 && *r <= 12.0 * hi + 1e-9);
            }
        }
    }
}
