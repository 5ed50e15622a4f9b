//! One-shot two-agent matrix games whose expectations can be enumerated
//! exactly. Used to check the bias and equivalence properties of the
//! difference-return updates without sampling.

use rand::Rng;

use crate::env::{GridState, StepRecord, Trajectory};
use crate::learners::{QCritic, RewardFunction};
use crate::nn::Mlp;
use crate::policy::{AgentPolicy, JointPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    pub n_actions: usize,
    /// `table[a0 * n_actions + a1]`
    pub table: Vec<f64>,
    /// Fixed observation fed to both policies.
    pub observation: Vec<f64>,
}

impl MatrixGame {
    pub fn new(n_actions: usize, table: Vec<f64>) -> Self {
        assert_eq!(table.len(), n_actions * n_actions, "square reward table expected");
        MatrixGame {
            n_actions,
            table,
            observation: vec![1.0, -0.5, 0.25],
        }
    }

    pub fn random<R: Rng + ?Sized>(n_actions: usize, rng: &mut R) -> Self {
        let table = (0..n_actions * n_actions)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Self::new(n_actions, table)
    }

    pub fn payoff(&self, joint_action: &[usize]) -> f64 {
        self.table[joint_action[0] * self.n_actions + joint_action[1]]
    }

    /// Two small softmax policies over the game's actions, with random biases
    /// so that neither starts uniform.
    pub fn joint_policy<R: Rng + ?Sized>(&self, rng: &mut R) -> JointPolicy {
        let policies = (0..2)
            .map(|i| {
                let mut p = AgentPolicy::with_shape(i, self.observation.len(), 6, self.n_actions, rng);
                for b in p.net.b1.iter_mut().chain(p.net.b2.iter_mut()) {
                    *b = rng.random_range(-0.8..0.8);
                }
                p
            })
            .collect();
        JointPolicy::from_policies(policies).expect("agent indices are in order")
    }

    pub fn joint_actions(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let n = self.n_actions;
        (0..n * n).map(move |k| [k / n, k % n])
    }

    /// The single-step episode in which `joint_action` was played.
    pub fn trajectory(&self, joint_action: [usize; 2]) -> Trajectory {
        Trajectory {
            steps: vec![StepRecord {
                state: GridState {
                    agents: Vec::new(),
                    entities: Vec::new(),
                    step: 0,
                },
                observations: vec![self.observation.clone(); 2],
                joint_action: joint_action.to_vec(),
                reward: self.payoff(&joint_action),
            }],
        }
    }

    /// A critic that reproduces the payoff table exactly: one hidden unit per
    /// joint action fires (with value 1) only when both one-hot entries match.
    pub fn exact_critic(&self) -> QCritic {
        let n = self.n_actions;
        let width = 2 * n;
        let hidden = n * n;
        let mut w1 = vec![0.0; hidden * width];
        for (k, [a0, a1]) in self.joint_actions().enumerate() {
            w1[k * width + a0] = 1.0;
            w1[k * width + n + a1] = 1.0;
        }
        let net = Mlp::from_parts(width, hidden, 1, w1, vec![-1.0; hidden], self.table.clone(), vec![0.0])
            .expect("consistent shapes");
        QCritic::from_net(net, n)
    }
}

impl RewardFunction for MatrixGame {
    fn reward(&self, _state: &GridState, joint_action: &[usize]) -> f64 {
        self.payoff(joint_action)
    }

    fn substitution_rewards(&self, _state: &GridState, joint_action: &[usize], agent: usize) -> Vec<f64> {
        let mut alt = joint_action.to_vec();
        (0..self.n_actions)
            .map(|b| {
                alt[agent] = b;
                self.payoff(&alt)
            })
            .collect()
    }
}
