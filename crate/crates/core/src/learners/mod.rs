//! Episode-level training procedures and the return calculus they share.
//!
//! Every learner updates the decentralized policies once per episode with the
//! summed per-step targets `Σ_t γ^t w^i_t ∇ log π^i(a^i_t | o^i_t)`; they differ
//! only in the weight `w^i_t`:
//!
//! | learner        | weight                                            |
//! |----------------|---------------------------------------------------|
//! | REINFORCE      | shared return `G_t`                               |
//! | Dr.Reinforce   | difference return from the exact reward           |
//! | Dr.ReinforceR  | difference return from the learned reward network |
//! | Q-A2C          | centralized critic `Q(s_t, a_t)`                  |
//! | COMA           | counterfactual advantage                          |
//! | Colby          | suffix sum of `r_t − R_ψi(s_t, stay)`             |

mod colby;
mod critic;
mod trainer;

pub use colby::{colby_differences, colby_update, LocalRewardNets, DEFAULT_ACTION};
pub use critic::{
    coma_advantage, coma_gradients, coma_update, q_a2c_gradients, q_a2c_update, QCritic, Transition,
    TARGET_REFRESH_INTERVAL,
};
pub use trainer::{Algorithm, Model, Trainer};

use crate::env::{GridState, GridWorld, Trajectory, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::nn::{Direction, Gradients};
use crate::policy::JointPolicy;

/// Anything that can score a joint action in a state: the exact environment
/// reward or a learned model of it.
pub trait RewardFunction {
    fn reward(&self, state: &GridState, joint_action: &[usize]) -> f64;

    /// Rewards of every substitution of `agent`'s action, indexed by action.
    fn substitution_rewards(&self, state: &GridState, joint_action: &[usize], agent: usize) -> Vec<f64> {
        let mut alt = joint_action.to_vec();
        (0..NUM_ACTIONS)
            .map(|b| {
                alt[agent] = b;
                self.reward(state, &alt)
            })
            .collect()
    }
}

impl RewardFunction for GridWorld {
    fn reward(&self, state: &GridState, joint_action: &[usize]) -> f64 {
        self.exact_reward(state, joint_action)
    }
}

/// Discounted returns of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub discount: f64,
}

/// Per-agent difference returns of one episode, `per_agent[i][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceReturnSeries {
    pub per_agent: Vec<Vec<f64>>,
}

/// `out[t] = values[t] + γ · out[t+1]`, with `out[T] = values[T]`.
pub fn discounted_suffix_sums(values: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let mut acc = 0.0;
    for (o, &v) in out.iter_mut().zip(values).rev() {
        acc = v + gamma * acc;
        *o = acc;
    }
    out
}

pub fn returns(rewards: &[f64], gamma: f64) -> Result<ReturnSeries> {
    if rewards.is_empty() {
        return Err(Error::Empty("reward sequence"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("discount {gamma} outside (0, 1]")));
    }
    Ok(ReturnSeries {
        values: discounted_suffix_sums(rewards, gamma),
        discount: gamma,
    })
}

/// Expected counterfactual reward `Σ_b π(b) · values[b]`.
pub fn expected_counterfactual(probs: &[f64], values: &[f64]) -> f64 {
    assert_eq!(probs.len(), values.len(), "one value per local action expected");
    probs.iter().zip(values).map(|(p, v)| p * v).sum()
}

/// Aristocrat difference `r − Σ_b π(b) · values[b]`, where `values[b]` is the
/// reward with the agent's action replaced by `b`.
pub fn aristocrat_difference(realized_reward: f64, probs: &[f64], values: &[f64]) -> f64 {
    assert_eq!(probs.len(), values.len(), "one value per local action expected");
    // Written as `Σ_b π(b) (r − values[b])` so that an action-independent
    // reward yields exactly zero even when `Σ π` rounds away from one.
    probs.iter().zip(values).map(|(p, v)| p * (realized_reward - v)).sum()
}

/// [`aristocrat_difference`] with one call of `reward_of` per local action.
pub fn aristocrat_difference_with(
    realized_reward: f64,
    joint_action: &[usize],
    agent: usize,
    probs: &[f64],
    mut reward_of: impl FnMut(&[usize]) -> f64,
) -> f64 {
    let mut alt = joint_action.to_vec();
    let values: Vec<f64> = (0..probs.len())
        .map(|b| {
            alt[agent] = b;
            reward_of(&alt)
        })
        .collect();
    aristocrat_difference(realized_reward, probs, &values)
}

/// Per-step aristocrat differences `ΔR^i_t` for every agent. The minuend is the
/// recorded reward; the counterfactual baseline comes from `reward_fn`.
pub fn difference_rewards<F: RewardFunction + ?Sized>(
    trajectory: &Trajectory,
    policy: &JointPolicy,
    reward_fn: &F,
) -> Result<Vec<Vec<f64>>> {
    let n = policy.n_agents();
    let mut per_agent = vec![Vec::with_capacity(trajectory.len()); n];
    for step in &trajectory.steps {
        let dists = policy.distributions(&step.observations)?;
        for (i, probs) in dists.iter().enumerate() {
            let values = reward_fn.substitution_rewards(&step.state, &step.joint_action, i);
            per_agent[i].push(aristocrat_difference(step.reward, probs, &values));
        }
    }
    Ok(per_agent)
}

pub fn difference_returns<F: RewardFunction + ?Sized>(
    trajectory: &Trajectory,
    policy: &JointPolicy,
    reward_fn: &F,
    gamma: f64,
) -> Result<DifferenceReturnSeries> {
    let per_step = difference_rewards(trajectory, policy, reward_fn)?;
    Ok(DifferenceReturnSeries {
        per_agent: per_step.iter().map(|d| discounted_suffix_sums(d, gamma)).collect(),
    })
}

/// Per-agent `Σ_t γ^t · weights[i][t] · ∇ log π^i(a^i_t | o^i_t)`.
pub fn policy_gradients(
    policy: &JointPolicy,
    trajectory: &Trajectory,
    weights: &[Vec<f64>],
    gamma: f64,
) -> Vec<Gradients> {
    assert_eq!(weights.len(), policy.n_agents(), "one weight series per agent");
    policy
        .policies
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            assert_eq!(w.len(), trajectory.len(), "one weight per step");
            let mut grads = p.net.zeros_like();
            let mut discount = 1.0;
            for (step, &weight) in trajectory.steps.iter().zip(w) {
                p.accumulate_grad_log_prob(
                    &step.observations[p.agent_index],
                    step.joint_action[p.agent_index],
                    discount * weight,
                    &mut grads,
                );
                discount *= gamma;
            }
            grads
        })
        .collect()
}

/// One ascent step per agent.
pub fn apply_policy_gradients(policy: &mut JointPolicy, grads: &[Gradients], learning_rate: f64) -> Result<()> {
    for (p, g) in policy.policies.iter_mut().zip(grads) {
        p.net
            .sgd_step(g, learning_rate, Direction::Ascent)
            .map_err(|e| match e {
                Error::Divergence { context } => Error::Divergence {
                    context: format!("policy of agent {}: {context}", p.agent_index),
                },
                other => other,
            })?;
    }
    Ok(())
}

/// Per-agent REINFORCE gradients, every agent weighted by the shared return.
pub fn reinforce_gradients(policy: &JointPolicy, trajectory: &Trajectory, gamma: f64) -> Result<Vec<Gradients>> {
    let g = returns(&trajectory.rewards(), gamma)?.values;
    let weights = vec![g; policy.n_agents()];
    Ok(policy_gradients(policy, trajectory, &weights, gamma))
}

/// Distributed REINFORCE.
pub fn reinforce_update(
    policy: &mut JointPolicy,
    trajectory: &Trajectory,
    gamma: f64,
    learning_rate: f64,
) -> Result<()> {
    let grads = reinforce_gradients(policy, trajectory, gamma)?;
    apply_policy_gradients(policy, &grads, learning_rate)
}

/// Per-agent gradients weighted by each agent's own difference return.
pub fn dr_reinforce_gradients<F: RewardFunction + ?Sized>(
    policy: &JointPolicy,
    trajectory: &Trajectory,
    gamma: f64,
    reward_fn: &F,
) -> Result<Vec<Gradients>> {
    if trajectory.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let dg = difference_returns(trajectory, policy, reward_fn, gamma)?;
    Ok(policy_gradients(policy, trajectory, &dg.per_agent, gamma))
}

/// Dr.Reinforce (exact `reward_fn`) or Dr.ReinforceR (learned `reward_fn`).
pub fn dr_reinforce_update<F: RewardFunction + ?Sized>(
    policy: &mut JointPolicy,
    trajectory: &Trajectory,
    gamma: f64,
    learning_rate: f64,
    reward_fn: &F,
) -> Result<()> {
    let grads = dr_reinforce_gradients(policy, trajectory, gamma, reward_fn)?;
    apply_policy_gradients(policy, &grads, learning_rate)
}
