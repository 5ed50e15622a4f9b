use rand::Rng;

use crate::env::{GridWorld, Trajectory, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::features::{encode_state_action, substitution_outputs};
use crate::nn::{Direction, Gradients, Mlp, VALUE_HIDDEN};
use crate::policy::JointPolicy;

use super::{apply_policy_gradients, policy_gradients};

/// Critic updates between refreshes of the bootstrap target copy.
pub const TARGET_REFRESH_INTERVAL: usize = 100;

/// One SARSA transition in feature space. `next` is `None` on the final step.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub features: &'a [f64],
    pub joint_action: &'a [usize],
    pub reward: f64,
    pub next: Option<(&'a [f64], &'a [usize])>,
}

/// Centralized action-value critic `Q(s, a)` over state features and the
/// one-hot joint action, with a periodically refreshed target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct QCritic {
    pub net: Mlp,
    target: Mlp,
    n_actions: usize,
    updates: usize,
}

impl QCritic {
    pub fn new<R: Rng + ?Sized>(env: &GridWorld, rng: &mut R) -> Self {
        let width = env.state_width() + NUM_ACTIONS * env.n_agents();
        Self::from_net(Mlp::init(width, VALUE_HIDDEN, 1, rng), NUM_ACTIONS)
    }

    pub fn from_net(net: Mlp, n_actions: usize) -> Self {
        assert_eq!(net.output_dim(), 1, "critic must be scalar");
        QCritic {
            target: net.clone(),
            net,
            n_actions,
            updates: 0,
        }
    }

    /// Restores a snapshot written by [`QCritic::to_bytes`] for `env`. The
    /// target copy restarts from the restored network.
    pub fn from_bytes(env: &GridWorld, bytes: &[u8]) -> Result<Self> {
        let (net, used) = Mlp::from_bytes(bytes)?;
        let width = env.state_width() + NUM_ACTIONS * env.n_agents();
        if used != bytes.len() || net.input_dim() != width || net.output_dim() != 1 {
            return Err(Error::Snapshot(format!(
                "critic snapshot does not fit {} with {} agents",
                env.kind(),
                env.n_agents()
            )));
        }
        Ok(Self::from_net(net, NUM_ACTIONS))
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn value(&self, features: &[f64], joint_action: &[usize]) -> f64 {
        self.net
            .forward(&encode_state_action(features, joint_action, self.n_actions))[0]
    }

    pub fn target_value(&self, features: &[f64], joint_action: &[usize]) -> f64 {
        self.target
            .forward(&encode_state_action(features, joint_action, self.n_actions))[0]
    }

    /// `Q(s, ⟨a^{-i}, b⟩)` for every local action `b` of `agent`.
    pub fn substitution_values(&self, features: &[f64], joint_action: &[usize], agent: usize) -> Vec<f64> {
        substitution_outputs(&self.net, features, joint_action, self.n_actions, agent)
    }

    /// Semi-gradient step on `½ δ²` with `δ = r + γ Q_target(s', a') − Q(s, a)`.
    /// Returns `δ`.
    pub fn td_update(&mut self, transition: &Transition<'_>, gamma: f64, learning_rate: f64) -> Result<f64> {
        let bootstrap = match transition.next {
            Some((features, joint)) => gamma * self.target_value(features, joint),
            None => 0.0,
        };
        let input = encode_state_action(transition.features, transition.joint_action, self.n_actions);
        let q = self.net.forward(&input)[0];
        let delta = transition.reward + bootstrap - q;
        if delta != 0.0 {
            let grads = self.net.backward(&input, &[delta]);
            self.net
                .sgd_step(&grads, learning_rate, Direction::Ascent)
                .map_err(|_| Error::Divergence {
                    context: "critic TD update".into(),
                })?;
        }
        self.updates += 1;
        if self.updates.is_multiple_of(TARGET_REFRESH_INTERVAL) {
            self.target = self.net.clone();
        }
        Ok(delta)
    }

    /// TD updates over an episode in time order; the last step bootstraps from zero.
    pub fn fit_episode(
        &mut self,
        features: &[Vec<f64>],
        trajectory: &Trajectory,
        gamma: f64,
        learning_rate: f64,
    ) -> Result<()> {
        let steps = &trajectory.steps;
        for t in 0..steps.len() {
            let next = steps
                .get(t + 1)
                .map(|s| (features[t + 1].as_slice(), s.joint_action.as_slice()));
            self.td_update(
                &Transition {
                    features: &features[t],
                    joint_action: &steps[t].joint_action,
                    reward: steps[t].reward,
                    next,
                },
                gamma,
                learning_rate,
            )?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.net.to_bytes()
    }
}

/// `Q(s, a) − Σ_b π(b) Q(s, ⟨a^{-i}, b⟩)`.
pub fn coma_advantage(critic: &QCritic, features: &[f64], joint_action: &[usize], agent: usize, probs: &[f64]) -> f64 {
    let values = critic.substitution_values(features, joint_action, agent);
    super::aristocrat_difference(values[joint_action[agent]], probs, &values)
}

fn encode_all(env: &GridWorld, trajectory: &Trajectory) -> Vec<Vec<f64>> {
    trajectory.steps.iter().map(|s| env.encode_state(&s.state)).collect()
}

/// Per-agent gradients weighted by the counterfactual advantage.
/// `features[t]` is the centralized encoding of step `t`'s state.
pub fn coma_gradients(
    policy: &JointPolicy,
    critic: &QCritic,
    features: &[Vec<f64>],
    trajectory: &Trajectory,
    gamma: f64,
) -> Result<Vec<Gradients>> {
    let n = policy.n_agents();
    let mut weights = vec![Vec::with_capacity(trajectory.len()); n];
    for (step, f) in trajectory.steps.iter().zip(features) {
        let dists = policy.distributions(&step.observations)?;
        for (i, probs) in dists.iter().enumerate() {
            weights[i].push(coma_advantage(critic, f, &step.joint_action, i, probs));
        }
    }
    Ok(policy_gradients(policy, trajectory, &weights, gamma))
}

/// Per-agent gradients weighted by the centralized `Q(s_t, a_t)`.
pub fn q_a2c_gradients(
    policy: &JointPolicy,
    critic: &QCritic,
    features: &[Vec<f64>],
    trajectory: &Trajectory,
    gamma: f64,
) -> Vec<Gradients> {
    let q: Vec<f64> = trajectory
        .steps
        .iter()
        .zip(features)
        .map(|(s, f)| critic.value(f, &s.joint_action))
        .collect();
    let weights = vec![q; policy.n_agents()];
    policy_gradients(policy, trajectory, &weights, gamma)
}

/// COMA: policies follow the counterfactual advantage of the critic as it was
/// before this episode; the critic then takes one TD step per transition.
#[allow(clippy::too_many_arguments)]
pub fn coma_update(
    policy: &mut JointPolicy,
    critic: &mut QCritic,
    env: &GridWorld,
    trajectory: &Trajectory,
    gamma: f64,
    policy_rate: f64,
    critic_rate: f64,
) -> Result<()> {
    let features = encode_all(env, trajectory);
    let grads = coma_gradients(policy, critic, &features, trajectory, gamma)?;
    critic.fit_episode(&features, trajectory, gamma, critic_rate)?;
    apply_policy_gradients(policy, &grads, policy_rate)
}

/// Q-A2C: every agent is weighted by the centralized critic, no baseline.
#[allow(clippy::too_many_arguments)]
pub fn q_a2c_update(
    policy: &mut JointPolicy,
    critic: &mut QCritic,
    env: &GridWorld,
    trajectory: &Trajectory,
    gamma: f64,
    policy_rate: f64,
    critic_rate: f64,
) -> Result<()> {
    let features = encode_all(env, trajectory);
    let grads = q_a2c_gradients(policy, critic, &features, trajectory, gamma);
    critic.fit_episode(&features, trajectory, gamma, critic_rate)?;
    apply_policy_gradients(policy, &grads, policy_rate)
}
