//! Diagnostics over trained models: prediction-error studies for reward
//! networks and critics, Monte Carlo ground-truth action values, and the
//! noise-robustness study of the aristocrat baseline.
//!
//! Batch operations take a `seed` rather than a generator: sample `k` draws
//! from its own ChaCha stream, so results do not depend on how rayon
//! schedules the work.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::env::{GridState, GridWorld, JointAction, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::learners::{aristocrat_difference, QCritic};
use crate::policy::JointPolicy;
use crate::reward_model::RewardNet;
use crate::rollout::{discounted_return_from, run_episode};

/// Samples in each prediction-error dataset.
pub const DEFAULT_DATASET_SIZE: usize = 5_000;
/// Rollouts averaged by [`ground_truth_q`].
pub const DEFAULT_ROLLOUTS: usize = 100;
/// Noise draws per sample in [`noise_study`].
pub const DEFAULT_NOISE_SAMPLES: usize = 1_000;
/// Noise scale relative to the reward range for additive profiles.
pub const RELATIVE_NOISE_SCALE: f64 = 0.1;
pub const DEFAULT_MASK_PROBABILITY: f64 = 0.5;

/// Independent generator for item `index` of a batch seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A state-action pair with the reward observed for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: GridState,
    pub joint_action: JointAction,
    pub reward: f64,
}

/// Step records of episodes run with `policy` until `n_samples` are gathered.
pub fn collect_on_policy_dataset<R: Rng + ?Sized>(
    policy: &JointPolicy,
    env: &GridWorld,
    n_samples: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(n_samples);
    while out.len() < n_samples {
        let start = env.reset(rng);
        let traj = run_episode(env, policy, start, horizon, rng)?;
        out.extend(traj.steps.into_iter().take(n_samples - out.len()).map(|s| Sample {
            state: s.state,
            joint_action: s.joint_action,
            reward: s.reward,
        }));
    }
    Ok(out)
}

/// Independent pairs: a freshly reset state and a uniformly random joint action.
pub fn collect_off_policy_dataset<R: Rng + ?Sized>(
    env: &GridWorld,
    n_samples: usize,
    rng: &mut R,
) -> Vec<(GridState, JointAction)> {
    (0..n_samples)
        .map(|_| {
            let state = env.reset(rng);
            let joint = (0..env.n_agents()).map(|_| rng.random_range(0..NUM_ACTIONS)).collect();
            (state, joint)
        })
        .collect()
}

/// Discounted returns of `n_rollouts` episodes that take `joint_action` in
/// `state` and follow `policy` afterwards, `horizon` steps each.
#[allow(clippy::too_many_arguments)]
pub fn rollout_returns<R: Rng + ?Sized>(
    env: &GridWorld,
    state: &GridState,
    joint_action: &JointAction,
    policy: &JointPolicy,
    n_rollouts: usize,
    horizon: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..n_rollouts)
        .map(|_| discounted_return_from(env, policy, state, joint_action, horizon, gamma, rng))
        .collect()
}

/// Monte Carlo estimate of `Q^π(state, joint_action)`.
#[allow(clippy::too_many_arguments)]
pub fn ground_truth_q<R: Rng + ?Sized>(
    env: &GridWorld,
    state: &GridState,
    joint_action: &JointAction,
    policy: &JointPolicy,
    n_rollouts: usize,
    horizon: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<f64> {
    if n_rollouts == 0 {
        return Err(Error::Config("ground truth needs at least one rollout".into()));
    }
    let returns = rollout_returns(env, state, joint_action, policy, n_rollouts, horizon, gamma, rng)?;
    Ok(returns.iter().sum::<f64>() / n_rollouts as f64)
}

/// [`ground_truth_q`] for every pair, in parallel.
pub fn ground_truth_q_batch(
    env: &GridWorld,
    pairs: &[(GridState, JointAction)],
    policy: &JointPolicy,
    n_rollouts: usize,
    horizon: usize,
    gamma: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(k, (s, a))| {
            let mut rng = stream_rng(seed, k as u64);
            ground_truth_q(env, s, a, policy, n_rollouts, horizon, gamma, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    OnPolicy,
    OffPolicy,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::OnPolicy => "on_policy",
            DatasetKind::OffPolicy => "off_policy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    RewardNet,
    QCritic,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::RewardNet => "reward_net",
            ModelKind::QCritic => "q_critic",
        }
    }
}

/// Prediction errors divided by the spread of the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionErrorReport {
    pub dataset_kind: DatasetKind,
    pub model_kind: ModelKind,
    /// Mean of `(prediction − truth) / normalizer`.
    pub mean: f64,
    /// Sample standard deviation of the normalized errors.
    pub std: f64,
    /// Mean of `|prediction − truth| / normalizer`.
    pub mean_abs: f64,
    pub normalizer: f64,
    pub sample_count: usize,
}

pub fn prediction_error_report(
    dataset_kind: DatasetKind,
    model_kind: ModelKind,
    predictions: &[f64],
    truths: &[f64],
) -> Result<PredictionErrorReport> {
    assert_eq!(predictions.len(), truths.len(), "one prediction per truth");
    if truths.is_empty() {
        return Err(Error::Empty("prediction-error dataset"));
    }
    let (lo, hi) = truths.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
        (lo.min(t), hi.max(t))
    });
    let normalizer = hi - lo;
    if normalizer <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    let errors: Vec<f64> = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) / normalizer)
        .collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std = if errors.len() > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(PredictionErrorReport {
        dataset_kind,
        model_kind,
        mean,
        std,
        mean_abs: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
        normalizer,
        sample_count: errors.len(),
    })
}

/// Appends reports to `errors.csv`-style output, writing the header when the
/// file is new.
pub fn write_error_reports(path: &Path, env: &GridWorld, reports: &[PredictionErrorReport]) -> Result<()> {
    let fresh = !path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record([
            "env",
            "n_agents",
            "model_kind",
            "dataset_kind",
            "mean",
            "std",
            "mean_abs",
            "normalizer",
            "n",
        ])?;
    }
    for r in reports {
        w.write_record([
            env.kind().as_str().to_string(),
            env.n_agents().to_string(),
            r.model_kind.as_str().to_string(),
            r.dataset_kind.as_str().to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.mean_abs.to_string(),
            r.normalizer.to_string(),
            r.sample_count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Normalized errors of `net` against the exact reward on an on-policy
/// dataset (gathered with `policy`) and an off-policy dataset.
pub fn reward_net_reports(
    net: &RewardNet,
    policy: &JointPolicy,
    n_samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<PredictionErrorReport>> {
    let env = net.env();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on = collect_on_policy_dataset(policy, env, n_samples, horizon, &mut rng)?;
    let off = collect_off_policy_dataset(env, n_samples, &mut rng);
    let mut reports = Vec::with_capacity(2);
    let (pred, truth): (Vec<f64>, Vec<f64>) = on
        .iter()
        .map(|s| (net.predict(&s.state, &s.joint_action), s.reward))
        .unzip();
    reports.push(prediction_error_report(
        DatasetKind::OnPolicy,
        ModelKind::RewardNet,
        &pred,
        &truth,
    )?);
    let (pred, truth): (Vec<f64>, Vec<f64>) = off
        .iter()
        .map(|(s, a)| (net.predict(s, a), env.exact_reward(s, a)))
        .unzip();
    reports.push(prediction_error_report(
        DatasetKind::OffPolicy,
        ModelKind::RewardNet,
        &pred,
        &truth,
    )?);
    Ok(reports)
}

/// Normalized errors of `critic` against Monte Carlo action values under
/// `policy`, on the requested datasets.
#[allow(clippy::too_many_arguments)]
pub fn critic_reports(
    critic: &QCritic,
    env: &GridWorld,
    policy: &JointPolicy,
    kinds: &[DatasetKind],
    n_samples: usize,
    n_rollouts: usize,
    horizon: usize,
    gamma: f64,
    seed: u64,
) -> Result<Vec<PredictionErrorReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let pairs: Vec<(GridState, JointAction)> = match kind {
            DatasetKind::OnPolicy => collect_on_policy_dataset(policy, env, n_samples, horizon, &mut rng)?
                .into_iter()
                .map(|s| (s.state, s.joint_action))
                .collect(),
            DatasetKind::OffPolicy => collect_off_policy_dataset(env, n_samples, &mut rng),
        };
        let truth = ground_truth_q_batch(env, &pairs, policy, n_rollouts, horizon, gamma, rng.random())?;
        let pred: Vec<f64> = pairs
            .iter()
            .map(|(s, a)| critic.value(&env.encode_state(s), a))
            .collect();
        reports.push(prediction_error_report(kind, ModelKind::QCritic, &pred, &truth)?);
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Additive `N(0, σ²)`.
    Normal,
    /// Additive `U(−w, w)`.
    Uniform,
    /// Value replaced by zero with probability `p`.
    Masking,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Normal, NoiseKind::Uniform, NoiseKind::Masking];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Normal => "normal",
            NoiseKind::Uniform => "uniform",
            NoiseKind::Masking => "masking",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown noise kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    pub kind: NoiseKind,
    /// σ, half-width or mask probability, depending on `kind`.
    pub scale: f64,
    pub rng_seed: u64,
}

impl NoiseProfile {
    pub fn new(kind: NoiseKind, scale: f64, rng_seed: u64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("noise scale must be positive, got {scale}")));
        }
        if kind == NoiseKind::Masking && scale >= 1.0 {
            return Err(Error::Config(format!("mask probability must be below 1, got {scale}")));
        }
        Ok(NoiseProfile { kind, scale, rng_seed })
    }

    /// Scale tied to the environment's reward range for additive noise, and
    /// an even coin for masking.
    pub fn default_for(kind: NoiseKind, env: &GridWorld, rng_seed: u64) -> Self {
        let (lo, hi) = env.reward_range();
        let scale = match kind {
            NoiseKind::Normal | NoiseKind::Uniform => RELATIVE_NOISE_SCALE * (hi - lo),
            NoiseKind::Masking => DEFAULT_MASK_PROBABILITY,
        };
        NoiseProfile { kind, scale, rng_seed }
    }

    fn perturb<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Normal => value + Normal::new(0.0, self.scale).expect("validated scale").sample(rng),
            NoiseKind::Uniform => {
                value
                    + Uniform::new_inclusive(-self.scale, self.scale)
                        .expect("validated scale")
                        .sample(rng)
            }
            NoiseKind::Masking => {
                if rng.random_bool(self.scale) {
                    0.0
                } else {
                    value
                }
            }
        }
    }
}

/// One sampled state-action pair of the noise study.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRow {
    pub sample_id: usize,
    pub true_difference: f64,
    pub mean_noisy_difference: f64,
    /// Sample variance of the noisy difference over the draws.
    pub variance: f64,
    pub n_draws: usize,
}

impl NoiseRow {
    pub fn bias(&self) -> f64 {
        self.mean_noisy_difference - self.true_difference
    }

    /// Standard error of the mean noisy difference.
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.n_draws as f64).sqrt()
    }
}

/// Agent whose difference reward the noise study examines.
pub const NOISE_STUDY_AGENT: usize = 0;

/// Effect of noisy counterfactual rewards on the aristocrat difference of
/// agent 0 under a uniform policy. Noise touches only the baseline's
/// counterfactual values, never the realized reward. States and joint actions
/// come from the generator seeded by `state_seed`; noise from the profile's
/// own seed.
pub fn noise_study(
    env: &GridWorld,
    profile: &NoiseProfile,
    n_noise_samples: usize,
    n_state_samples: usize,
    state_seed: u64,
) -> Result<Vec<NoiseRow>> {
    if n_noise_samples < 2 {
        return Err(Error::Config("noise study needs at least two draws per sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(state_seed);
    let pairs = collect_off_policy_dataset(env, n_state_samples, &mut rng);
    let uniform = [1.0 / NUM_ACTIONS as f64; NUM_ACTIONS];
    Ok(pairs
        .par_iter()
        .enumerate()
        .map(|(k, (state, joint))| {
            let agent = NOISE_STUDY_AGENT;
            let realized = env.exact_reward(state, joint);
            let mut alt = joint.clone();
            let values: Vec<f64> = (0..NUM_ACTIONS)
                .map(|b| {
                    alt[agent] = b;
                    env.exact_reward(state, &alt)
                })
                .collect();
            let truth = aristocrat_difference(realized, &uniform, &values);
            let mut noise_rng = stream_rng(profile.rng_seed, k as u64);
            let mut noisy = vec![0.0; NUM_ACTIONS];
            let draws: Vec<f64> = (0..n_noise_samples)
                .map(|_| {
                    for (n, &v) in noisy.iter_mut().zip(&values) {
                        *n = profile.perturb(v, &mut noise_rng);
                    }
                    aristocrat_difference(realized, &uniform, &noisy)
                })
                .collect();
            let n = n_noise_samples as f64;
            let mean = draws.iter().sum::<f64>() / n;
            let variance = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
            NoiseRow {
                sample_id: k,
                true_difference: truth,
                mean_noisy_difference: mean,
                variance,
                n_draws: n_noise_samples,
            }
        })
        .collect())
}

/// Writes `noise.csv`: one row per (profile, sample).
pub fn write_noise_csv(path: &Path, studies: &[(NoiseProfile, Vec<NoiseRow>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "profile",
        "scale",
        "sample_id",
        "true_difference",
        "mean_noisy_difference",
        "variance",
    ])?;
    for (profile, rows) in studies {
        for r in rows {
            w.write_record([
                profile.kind.as_str().to_string(),
                profile.scale.to_string(),
                r.sample_id.to_string(),
                r.true_difference.to_string(),
                r.mean_noisy_difference.to_string(),
                r.variance.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Human-readable one-line summary of a noise study.
pub fn describe_noise(profile: &NoiseProfile, rows: &[NoiseRow], out: &mut impl Write) -> std::io::Result<()> {
    let biased = rows
        .iter()
        .filter(|r| r.bias().abs() > 3.0 * r.standard_error())
        .count();
    writeln!(
        out,
        "{} (scale {:.4}): {biased}/{} samples biased beyond 3 standard errors",
        profile.kind,
        profile.scale,
        rows.len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, Cell, EnvKind};
    use crate::nn::Mlp;
    use crate::policy::AgentPolicy;

    fn uniform_policy(env: &GridWorld) -> JointPolicy {
        let w = env.observation_width();
        JointPolicy::from_policies(
            (0..env.n_agents())
                .map(|i| AgentPolicy::from_net(i, Mlp::zeros(w, 4, NUM_ACTIONS)))
                .collect(),
        )
        .unwrap()
    }

    /// Chooses `action` with probability 1 − O(e^-200).
    fn fixed_policy(env: &GridWorld, action: Action) -> JointPolicy {
        let w = env.observation_width();
        JointPolicy::from_policies(
            (0..env.n_agents())
                .map(|i| {
                    let mut net = Mlp::zeros(w, 4, NUM_ACTIONS);
                    net.b2[action.index()] = 200.0;
                    AgentPolicy::from_net(i, net)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_on_policy_dataset() {
        let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data = collect_on_policy_dataset(&uniform_policy(&env), &env, 0, 50, &mut rng).unwrap();
        assert!(data.is_empty());
    }

    #[test]
    fn on_policy_dataset_is_reproducible_and_sized() {
        let env = GridWorld::new(EnvKind::PredatorPrey, 3).unwrap();
        let policy = JointPolicy::new(&env, &mut ChaCha8Rng::seed_from_u64(1));
        let collect = || collect_on_policy_dataset(&policy, &env, 120, 50, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let a = collect();
        assert_eq!(a.len(), 120);
        assert_eq!(a, collect());
        for s in &a {
            assert_eq!(s.reward, env.exact_reward(&s.state, &s.joint_action));
        }
    }

    #[test]
    fn on_policy_action_frequencies_follow_the_policy() {
        // Every agent sees a different observation, so probabilities are
        // checked against a policy that ignores its input.
        let env = GridWorld::new(EnvKind::MultiRover, 2).unwrap();
        let w = env.observation_width();
        let mut net = Mlp::zeros(w, 4, NUM_ACTIONS);
        net.b2 = vec![0.5, -0.3, 0.0, 1.0, -1.0];
        let policy = JointPolicy::from_policies(vec![
            AgentPolicy::from_net(0, net.clone()),
            AgentPolicy::from_net(1, net.clone()),
        ])
        .unwrap();
        let probs = crate::policy::softmax(&net.b2);
        let n = 10_000;
        let data = collect_on_policy_dataset(&policy, &env, n, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for agent in 0..2 {
            let mut counts = [0usize; NUM_ACTIONS];
            for s in &data {
                counts[s.joint_action[agent]] += 1;
            }
            for (c, p) in counts.iter().zip(&probs) {
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se);
            }
        }
    }

    #[test]
    fn off_policy_action_marginals_are_uniform() {
        let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
        let n = 10_000;
        let data = collect_off_policy_dataset(&env, n, &mut ChaCha8Rng::seed_from_u64(4));
        let se = (0.2 * 0.8 / n as f64).sqrt();
        for agent in 0..3 {
            let mut counts = [0usize; NUM_ACTIONS];
            for (_, a) in &data {
                counts[a[agent]] += 1;
            }
            for c in counts {
                assert!((c as f64 / n as f64 - 0.2).abs() < 3.0 * se);
            }
        }
    }

    #[test]
    fn off_policy_cell_marginals_pass_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let env = GridWorld::new(EnvKind::PredatorPrey, 3).unwrap();
        let n = 10_000;
        let data = collect_off_policy_dataset(&env, n, &mut ChaCha8Rng::seed_from_u64(5));
        let mut counts = [0usize; 100];
        for (s, _) in &data {
            let c = s.agents[0];
            counts[(c.row * 10 + c.col) as usize] += 1;
        }
        let expected = n as f64 / 100.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let critical = ChiSquared::new(99.0).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "χ² = {stat} ≥ {critical}");
    }

    #[test]
    fn single_off_policy_sample_is_valid() {
        let env = GridWorld::new(EnvKind::MultiRover, 4).unwrap();
        let data = collect_off_policy_dataset(&env, 1, &mut ChaCha8Rng::seed_from_u64(6));
        assert_eq!(data.len(), 1);
        let (s, a) = &data[0];
        assert_eq!(s.agents.len(), 4);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|&x| x < NUM_ACTIONS));
        assert!(s.agents.iter().chain(&s.entities).all(|&c| env.in_bounds(c)));
    }

    #[test]
    fn one_step_ground_truth_is_the_exact_reward() {
        // A single-step horizon is the γ = 0 truncation.
        let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let policy = JointPolicy::new(&env, &mut rng);
        let state = env.reset(&mut rng);
        let joint = vec![0, 3, 4];
        for gamma in [0.0, 0.95] {
            let q = ground_truth_q(&env, &state, &joint, &policy, 10, 1, gamma, &mut rng).unwrap();
            assert!((q - env.exact_reward(&state, &joint)).abs() < 1e-12);
        }
        let q = ground_truth_q(&env, &state, &joint, &policy, 10, 50, 0.0, &mut rng).unwrap();
        assert!((q - env.exact_reward(&state, &joint)).abs() < 1e-12);
    }

    #[test]
    fn stay_policy_ground_truth_is_a_geometric_sum() {
        let env = GridWorld::new(EnvKind::MultiRover, 2).unwrap();
        let policy = fixed_policy(&env, Action::Stay);
        let state = GridState {
            agents: vec![Cell::new(0, 0), Cell::new(9, 9)],
            entities: vec![Cell::new(3, 4), Cell::new(6, 2)],
            step: 0,
        };
        let stay = vec![Action::Stay.index(); 2];
        let r = env.exact_reward(&state, &stay);
        let gamma: f64 = 0.95;
        let closed = r * (1.0 - gamma.powi(50)) / (1.0 - gamma);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let returns = rollout_returns(&env, &state, &stay, &policy, 20, 50, gamma, &mut rng).unwrap();
        assert!(
            returns.iter().all(|&g| g == returns[0]),
            "deterministic rollouts must agree"
        );
        assert!((returns[0] - closed).abs() < 1e-9);
    }

    #[test]
    fn ground_truth_is_consistent_in_the_rollout_count() {
        let env = GridWorld::new(EnvKind::PredatorPrey, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let policy = JointPolicy::new(&env, &mut rng);
        let state = env.reset(&mut rng);
        let joint = vec![1, 2, 3];
        let small = rollout_returns(&env, &state, &joint, &policy, 100, 50, 0.95, &mut rng).unwrap();
        let more = rollout_returns(&env, &state, &joint, &policy, 100, 50, 0.95, &mut rng).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let m100 = mean(&small);
        let all: Vec<f64> = small.iter().chain(&more).copied().collect();
        let m200 = mean(&all);
        let sd = (small.iter().map(|g| (g - m100).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!(sd > 0.0);
        assert!((m200 - m100).abs() < 3.0 * sd / 10.0);
    }

    #[test]
    fn ground_truth_batch_is_order_independent() {
        let env = GridWorld::new(EnvKind::PredatorPrey, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let policy = JointPolicy::new(&env, &mut rng);
        let pairs = collect_off_policy_dataset(&env, 6, &mut rng);
        let all = ground_truth_q_batch(&env, &pairs, &policy, 5, 20, 0.95, 11).unwrap();
        let tail = ground_truth_q_batch(&env, &pairs[3..], &policy, 5, 20, 0.95, 11).unwrap();
        // Item k always draws from stream k, whatever the batch composition.
        let single = ground_truth_q(
            &env,
            &pairs[0].0,
            &pairs[0].1,
            &policy,
            5,
            20,
            0.95,
            &mut stream_rng(11, 0),
        )
        .unwrap();
        assert_eq!(all[0], single);
        assert_eq!(all.len(), 6);
        assert_eq!(tail.len(), 3);
    }

    #[test]
    fn perfect_model_report() {
        let truth = [0.0, 1.0, 3.0];
        let r = prediction_error_report(DatasetKind::OffPolicy, ModelKind::RewardNet, &truth, &truth).unwrap();
        assert_eq!(
            (r.mean, r.std, r.mean_abs, r.normalizer, r.sample_count),
            (0.0, 0.0, 0.0, 3.0, 3)
        );
    }

    #[test]
    fn constant_bias_report() {
        let truth = [-2.0, 0.0, 2.0, 1.0];
        let pred: Vec<f64> = truth.iter().map(|t| t + 0.5).collect();
        let r = prediction_error_report(DatasetKind::OnPolicy, ModelKind::QCritic, &pred, &truth).unwrap();
        assert!((r.mean - 0.125).abs() < 1e-15);
        assert!(r.std < 1e-15);
    }

    #[test]
    fn hand_computed_report() {
        // Errors 1, −1, 4 over a truth spread of 2 → normalized 0.5, −0.5, 2.
        // Mean 2/3; deviations −1/6, −7/6, 4/3; squares sum 1/36+49/36+64/36 = 19/6;
        // sample variance 19/12.
        let truth = [0.0, 1.0, 2.0];
        let pred = [1.0, 0.0, 6.0];
        let r = prediction_error_report(DatasetKind::OffPolicy, ModelKind::RewardNet, &pred, &truth).unwrap();
        assert!((r.mean - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.std - (19.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!((r.mean_abs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_truth_is_flagged() {
        let r = prediction_error_report(DatasetKind::OffPolicy, ModelKind::RewardNet, &[1.0, 2.0], &[0.5, 0.5]);
        assert!(matches!(r, Err(Error::ZeroNormalizer)));
        let r = prediction_error_report(DatasetKind::OffPolicy, ModelKind::RewardNet, &[], &[]);
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    #[test]
    fn profile_validation() {
        assert!(NoiseProfile::new(NoiseKind::Normal, 0.0, 0).is_err());
        assert!(NoiseProfile::new(NoiseKind::Masking, 1.0, 0).is_err());
        assert!(NoiseProfile::new(NoiseKind::Masking, 0.5, 0).is_ok());
        let env = GridWorld::new(EnvKind::PredatorPrey, 3).unwrap();
        assert!((NoiseProfile::default_for(NoiseKind::Uniform, &env, 0).scale - 0.1).abs() < 1e-15);
    }

    #[test]
    fn vanishing_noise_leaves_the_difference_intact() {
        let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
        let profile = NoiseProfile::new(NoiseKind::Normal, 1e-12, 1).unwrap();
        for row in noise_study(&env, &profile, 100, 10, 2).unwrap() {
            assert!(row.bias().abs() < 1e-11);
            assert!(row.variance < 1e-22);
        }
    }

    #[test]
    fn normal_noise_bias_is_within_the_clt_bound() {
        let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
        let sigma = 0.5;
        let n = 1_000;
        let profile = NoiseProfile::new(NoiseKind::Normal, sigma, 3).unwrap();
        for row in noise_study(&env, &profile, n, 20, 4).unwrap() {
            let bound = 3.0 * sigma / (5f64.sqrt() * (n as f64).sqrt());
            assert!(row.bias().abs() < bound, "{row:?}");
            // Variance of the uniform average of five σ-noises is σ²/5.
            assert!((row.variance / (sigma * sigma / 5.0) - 1.0).abs() < 0.15);
        }
    }

    #[test]
    fn masking_a_negative_baseline_lowers_the_difference() {
        // Multi-rover rewards are never positive, so shrinking counterfactual
        // values toward zero raises the baseline and lowers the difference;
        // the sign argument for positive rewards is the mirror image.
        let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
        let profile = NoiseProfile::new(NoiseKind::Masking, 0.5, 5).unwrap();
        for row in noise_study(&env, &profile, 1_000, 10, 6).unwrap() {
            assert!(row.mean_noisy_difference < row.true_difference, "{row:?}");
        }
    }

    #[test]
    fn masking_a_positive_baseline_raises_the_difference() {
        // Predator-prey samples with every counterfactual reward positive.
        let env = GridWorld::new(EnvKind::PredatorPrey, 2).unwrap();
        let state = GridState {
            agents: vec![Cell::new(4, 4), Cell::new(5, 6)],
            entities: vec![Cell::new(5, 5)],
            step: 0,
        };
        let joint = vec![Action::Stay.index(), Action::Stay.index()];
        let mut alt = joint.clone();
        let values: Vec<f64> = (0..NUM_ACTIONS)
            .map(|b| {
                alt[0] = b;
                env.exact_reward(&state, &alt)
            })
            .collect();
        assert!(values.iter().all(|&v| v > 0.0));
        let profile = NoiseProfile::new(NoiseKind::Masking, 0.5, 7).unwrap();
        let uniform = [0.2; NUM_ACTIONS];
        let realized = env.exact_reward(&state, &joint);
        let truth = aristocrat_difference(realized, &uniform, &values);
        let mut rng = stream_rng(profile.rng_seed, 0);
        let draws = 1_000;
        let mean = (0..draws)
            .map(|_| {
                let noisy: Vec<f64> = values.iter().map(|&v| profile.perturb(v, &mut rng)).collect();
                aristocrat_difference(realized, &uniform, &noisy)
            })
            .sum::<f64>()
            / draws as f64;
        assert!(mean > truth);
    }

    #[test]
    fn csv_outputs_have_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let env = GridWorld::new(EnvKind::MultiRover, 3).unwrap();
        let report =
            prediction_error_report(DatasetKind::OffPolicy, ModelKind::RewardNet, &[0.0, 1.0], &[0.0, 2.0]).unwrap();
        let errors = dir.path().join("errors.csv");
        write_error_reports(&errors, &env, std::slice::from_ref(&report)).unwrap();
        write_error_reports(&errors, &env, &[report]).unwrap();
        let text = std::fs::read_to_string(&errors).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("env,n_agents,model_kind,dataset_kind,mean,std,mean_abs,normalizer,n"));

        let profile = NoiseProfile::default_for(NoiseKind::Uniform, &env, 1);
        let rows = noise_study(&env, &profile, 10, 4, 2).unwrap();
        let noise = dir.path().join("noise.csv");
        write_noise_csv(&noise, &[(profile, rows)]).unwrap();
        assert_eq!(std::fs::read_to_string(&noise).unwrap().lines().count(), 5);
    }
}
