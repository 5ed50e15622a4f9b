use rand::Rng;

use crate::env::{Action, GridWorld, Trajectory, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::features::encode_state_action;
use crate::nn::{Direction, Mlp, VALUE_HIDDEN};
use crate::policy::JointPolicy;

use super::{apply_policy_gradients, discounted_suffix_sums, policy_gradients};

/// Default action substituted for an agent's own action.
pub const DEFAULT_ACTION: Action = Action::Stay;

/// One local reward approximation `R_ψi(s, a^i)` per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRewardNets {
    pub nets: Vec<Mlp>,
}

impl LocalRewardNets {
    pub fn new<R: Rng + ?Sized>(env: &GridWorld, rng: &mut R) -> Self {
        let width = env.state_width() + NUM_ACTIONS;
        LocalRewardNets {
            nets: (0..env.n_agents())
                .map(|_| Mlp::init(width, VALUE_HIDDEN, 1, rng))
                .collect(),
        }
    }

    pub fn predict(&self, agent: usize, features: &[f64], action: usize) -> f64 {
        self.nets[agent].forward(&encode_state_action(features, &[action], NUM_ACTIONS))[0]
    }

    /// One squared-loss descent step; returns the loss before the step.
    pub fn regress_step(
        &mut self,
        agent: usize,
        features: &[f64],
        action: usize,
        observed_reward: f64,
        learning_rate: f64,
    ) -> Result<f64> {
        let input = encode_state_action(features, &[action], NUM_ACTIONS);
        let net = &mut self.nets[agent];
        let predicted = net.forward(&input)[0];
        let residual = predicted - observed_reward;
        if residual != 0.0 {
            let grads = net.backward(&input, &[residual]);
            net.sgd_step(&grads, learning_rate, Direction::Descent)
                .map_err(|_| Error::Divergence {
                    context: format!("local reward net of agent {agent}"),
                })?;
        }
        Ok(0.5 * residual * residual)
    }
}

/// `r_t − R_ψi(s_t, c^i)` for every agent and step.
pub fn colby_differences(nets: &LocalRewardNets, env: &GridWorld, trajectory: &Trajectory) -> Vec<Vec<f64>> {
    let features: Vec<Vec<f64>> = trajectory.steps.iter().map(|s| env.encode_state(&s.state)).collect();
    (0..nets.nets.len())
        .map(|i| {
            trajectory
                .steps
                .iter()
                .zip(&features)
                .map(|(s, f)| s.reward - nets.predict(i, f, DEFAULT_ACTION.index()))
                .collect()
        })
        .collect()
}

/// Colby-style local difference rewards driving policy gradients. Policy weights
/// use the local nets as they were before this episode; each net then regresses
/// the team reward on the agent's own action.
#[allow(clippy::too_many_arguments)]
pub fn colby_update(
    policy: &mut JointPolicy,
    nets: &mut LocalRewardNets,
    env: &GridWorld,
    trajectory: &Trajectory,
    gamma: f64,
    policy_rate: f64,
    model_rate: f64,
) -> Result<()> {
    let weights: Vec<Vec<f64>> = colby_differences(nets, env, trajectory)
        .iter()
        .map(|d| discounted_suffix_sums(d, gamma))
        .collect();
    let grads = policy_gradients(policy, trajectory, &weights, gamma);
    for step in &trajectory.steps {
        let f = env.encode_state(&step.state);
        for (i, &a) in step.joint_action.iter().enumerate() {
            nets.regress_step(i, &f, a, step.reward, model_rate)?;
        }
    }
    apply_policy_gradients(policy, &grads, policy_rate)
}
