//! Centralized reward network trained by online regression and queried
//! counterfactually to estimate difference rewards.

use rand::Rng;

use crate::env::{GridState, GridWorld, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::features::{encode_state_action, substitution_outputs};
use crate::learners::{aristocrat_difference, RewardFunction};
use crate::nn::{Direction, Mlp, VALUE_HIDDEN};

/// `½ (observed − predicted)²`.
pub fn squared_loss(observed: f64, predicted: f64) -> f64 {
    0.5 * (observed - predicted).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardNet {
    pub net: Mlp,
    env: GridWorld,
}

impl RewardNet {
    pub fn new<R: Rng + ?Sized>(env: &GridWorld, rng: &mut R) -> Self {
        let width = env.state_width() + NUM_ACTIONS * env.n_agents();
        RewardNet {
            net: Mlp::init(width, VALUE_HIDDEN, 1, rng),
            env: env.clone(),
        }
    }

    pub fn from_net(env: &GridWorld, net: Mlp) -> Self {
        assert_eq!(
            net.input_dim(),
            env.state_width() + NUM_ACTIONS * env.n_agents(),
            "reward net input width mismatch"
        );
        assert_eq!(net.output_dim(), 1, "reward net must be scalar");
        RewardNet { net, env: env.clone() }
    }

    /// Restores a snapshot written by [`RewardNet::to_bytes`] for `env`.
    pub fn from_bytes(env: &GridWorld, bytes: &[u8]) -> Result<Self> {
        let (net, used) = Mlp::from_bytes(bytes)?;
        let width = env.state_width() + NUM_ACTIONS * env.n_agents();
        if used != bytes.len() || net.input_dim() != width || net.output_dim() != 1 {
            return Err(Error::Snapshot(format!(
                "reward net snapshot does not fit {} with {} agents",
                env.kind(),
                env.n_agents()
            )));
        }
        Ok(RewardNet::from_net(env, net))
    }

    pub fn env(&self) -> &GridWorld {
        &self.env
    }

    pub fn input(&self, state: &GridState, joint_action: &[usize]) -> Vec<f64> {
        encode_state_action(&self.env.encode_state(state), joint_action, NUM_ACTIONS)
    }

    pub fn predict(&self, state: &GridState, joint_action: &[usize]) -> f64 {
        self.net.forward(&self.input(state, joint_action))[0]
    }

    /// One descent step on the squared loss of a single sample. Returns the
    /// loss measured before the step.
    pub fn regress_step(
        &mut self,
        state: &GridState,
        joint_action: &[usize],
        observed_reward: f64,
        learning_rate: f64,
    ) -> Result<f64> {
        let input = self.input(state, joint_action);
        let predicted = self.net.forward(&input)[0];
        let residual = predicted - observed_reward;
        if residual != 0.0 {
            let grads = self.net.backward(&input, &[residual]);
            self.net.sgd_step(&grads, learning_rate, Direction::Descent)?;
        }
        Ok(squared_loss(observed_reward, predicted))
    }

    /// Difference reward of `agent` with the observed reward as minuend and
    /// the network's policy-weighted counterfactual predictions as baseline.
    pub fn estimated_difference_reward(
        &self,
        state: &GridState,
        joint_action: &[usize],
        observed_reward: f64,
        agent: usize,
        probs: &[f64],
    ) -> f64 {
        let values = self.substitution_rewards(state, joint_action, agent);
        aristocrat_difference(observed_reward, probs, &values)
    }

    /// Mean squared error `mean((r - R_ψ)²)` over a dataset.
    pub fn mse<'a>(&self, data: impl IntoIterator<Item = (&'a GridState, &'a [usize], f64)>) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for (s, a, r) in data {
            total += (self.predict(s, a) - r).powi(2);
            n += 1;
        }
        total / n.max(1) as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.net.to_bytes()
    }
}

impl RewardFunction for RewardNet {
    fn reward(&self, state: &GridState, joint_action: &[usize]) -> f64 {
        self.predict(state, joint_action)
    }

    fn substitution_rewards(&self, state: &GridState, joint_action: &[usize], agent: usize) -> Vec<f64> {
        substitution_outputs(
            &self.net,
            &self.env.encode_state(state),
            joint_action,
            NUM_ACTIONS,
            agent,
        )
    }
}
