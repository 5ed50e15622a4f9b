//! Decentralized categorical policies.

use rand::Rng;

use crate::env::{GridWorld, JointAction, Observation, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::nn::{Gradients, Mlp, POLICY_HIDDEN};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Policy of a single agent over its local actions.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicy {
    pub agent_index: usize,
    pub net: Mlp,
}

impl AgentPolicy {
    /// A gridworld policy: observation in, one logit per local action out.
    pub fn new<R: Rng + ?Sized>(agent_index: usize, observation_width: usize, rng: &mut R) -> Self {
        Self::with_shape(agent_index, observation_width, POLICY_HIDDEN, NUM_ACTIONS, rng)
    }

    pub fn with_shape<R: Rng + ?Sized>(
        agent_index: usize,
        input: usize,
        hidden: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Self {
        AgentPolicy {
            agent_index,
            net: Mlp::init(input, hidden, n_actions, rng),
        }
    }

    pub fn from_net(agent_index: usize, net: Mlp) -> Self {
        AgentPolicy { agent_index, net }
    }

    pub fn n_actions(&self) -> usize {
        self.net.output_dim()
    }

    pub fn action_distribution(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let logits = self.net.forward(observation);
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Divergence {
                context: format!("policy logits of agent {}", self.agent_index),
            });
        }
        Ok(softmax(&logits))
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, observation: &[f64], rng: &mut R) -> Result<usize> {
        Ok(sample_categorical(&self.action_distribution(observation)?, rng))
    }

    /// ∇ log π(action | observation).
    pub fn grad_log_prob(&self, observation: &[f64], action: usize) -> Gradients {
        let mut grads = self.net.zeros_like();
        self.accumulate_grad_log_prob(observation, action, 1.0, &mut grads);
        grads
    }

    /// Adds `scale · ∇ log π(action | observation)` into `grads`.
    pub fn accumulate_grad_log_prob(&self, observation: &[f64], action: usize, scale: f64, grads: &mut Gradients) {
        assert!(action < self.n_actions(), "action {action} out of range");
        if scale == 0.0 {
            return;
        }
        let pre = self.net.pre_activations(observation);
        let probs = softmax(&self.net.head(&pre));
        // d log softmax(l)[a] / dl = onehot(a) - p
        let cotangent: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, &p)| if k == action { 1.0 - p } else { -p })
            .collect();
        self.net
            .accumulate_backward_from_pre(observation, &pre, &cotangent, scale, grads);
    }
}

/// One policy per agent, in agent order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    pub policies: Vec<AgentPolicy>,
}

impl JointPolicy {
    pub fn new<R: Rng + ?Sized>(env: &GridWorld, rng: &mut R) -> Self {
        let width = env.observation_width();
        JointPolicy {
            policies: (0..env.n_agents()).map(|i| AgentPolicy::new(i, width, rng)).collect(),
        }
    }

    pub fn from_policies(policies: Vec<AgentPolicy>) -> Result<Self> {
        for (i, p) in policies.iter().enumerate() {
            if p.agent_index != i {
                return Err(Error::Config(format!(
                    "policy at position {i} has agent index {}",
                    p.agent_index
                )));
            }
        }
        Ok(JointPolicy { policies })
    }

    pub fn n_agents(&self) -> usize {
        self.policies.len()
    }

    pub fn distributions(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>> {
        self.policies
            .iter()
            .zip(observations)
            .map(|(p, o)| p.action_distribution(o))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, observations: &[Observation], rng: &mut R) -> Result<JointAction> {
        self.policies
            .iter()
            .zip(observations)
            .map(|(p, o)| p.sample_action(o, rng))
            .collect()
    }

    /// `u64` agent count, one `u64` byte offset per record (relative to the
    /// end of the header), then the concatenated network snapshots.
    pub fn to_bytes(&self) -> Vec<u8> {
        let records: Vec<Vec<u8>> = self.policies.iter().map(|p| p.net.to_bytes()).collect();
        let mut out = Vec::new();
        out.extend_from_slice(&(records.len() as u64).to_le_bytes());
        let mut offset = 0u64;
        for r in &records {
            out.extend_from_slice(&offset.to_le_bytes());
            offset += r.len() as u64;
        }
        for r in records {
            out.extend_from_slice(&r);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let read_u64 = |at: usize| -> Result<u64> {
            bytes
                .get(at..at + 8)
                .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
                .ok_or_else(|| Error::Snapshot("truncated policy header".into()))
        };
        let n = read_u64(0)? as usize;
        let body = 8 + 8 * n;
        if bytes.len() < body {
            return Err(Error::Snapshot("truncated policy header".into()));
        }
        let mut policies = Vec::with_capacity(n);
        for i in 0..n {
            let start = body + read_u64(8 + 8 * i)? as usize;
            let record = bytes
                .get(start..)
                .ok_or_else(|| Error::Snapshot(format!("offset of agent {i} out of range")))?;
            let (net, _) = Mlp::from_bytes(record)?;
            policies.push(AgentPolicy::from_net(i, net));
        }
        Ok(JointPolicy { policies })
    }
}
