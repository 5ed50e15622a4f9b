use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::env::{GridWorld, Trajectory};
use crate::error::{Error, Result};
use crate::policy::JointPolicy;
use crate::reward_model::RewardNet;
use crate::rollout::run_episode;

use super::{colby_update, coma_update, dr_reinforce_update, q_a2c_update, reinforce_update, LocalRewardNets, QCritic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Reinforce,
    DrReinforce,
    DrReinforceR,
    Coma,
    QA2c,
    Colby,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Reinforce,
        Algorithm::DrReinforce,
        Algorithm::DrReinforceR,
        Algorithm::Coma,
        Algorithm::QA2c,
        Algorithm::Colby,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Reinforce => "reinforce",
            Algorithm::DrReinforce => "dr_reinforce",
            Algorithm::DrReinforceR => "dr_reinforce_r",
            Algorithm::Coma => "coma",
            Algorithm::QA2c => "q_a2c",
            Algorithm::Colby => "colby",
        }
    }

    /// Whether the algorithm trains a second model (critic or reward net).
    pub fn has_model(self) -> bool {
        !matches!(self, Algorithm::Reinforce | Algorithm::DrReinforce)
    }

    /// Whether that model is a bootstrapped action-value critic.
    pub fn has_critic(self) -> bool {
        matches!(self, Algorithm::Coma | Algorithm::QA2c)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '.'], "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == key)
            .or(match key.as_str() {
                "drreinforce" => Some(Algorithm::DrReinforce),
                "drreinforcer" => Some(Algorithm::DrReinforceR),
                "qa2c" => Some(Algorithm::QA2c),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Learned model carried alongside the policies.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    None,
    Critic(QCritic),
    RewardNet(RewardNet),
    Local(LocalRewardNets),
}

/// Policies plus whatever the chosen algorithm learns next to them.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub algorithm: Algorithm,
    pub env: GridWorld,
    pub policy: JointPolicy,
    pub model: Model,
    pub horizon: usize,
    pub gamma: f64,
    pub policy_rate: f64,
    pub model_rate: f64,
}

impl Trainer {
    /// Fresh parameters drawn from `rng`. `model_rate` is ignored by
    /// algorithms without a second model.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        algorithm: Algorithm,
        env: GridWorld,
        horizon: usize,
        gamma: f64,
        policy_rate: f64,
        model_rate: f64,
        rng: &mut R,
    ) -> Self {
        let policy = JointPolicy::new(&env, rng);
        let model = match algorithm {
            Algorithm::Reinforce | Algorithm::DrReinforce => Model::None,
            Algorithm::DrReinforceR => Model::RewardNet(RewardNet::new(&env, rng)),
            Algorithm::Coma | Algorithm::QA2c => Model::Critic(QCritic::new(&env, rng)),
            Algorithm::Colby => Model::Local(LocalRewardNets::new(&env, rng)),
        };
        Trainer {
            algorithm,
            env,
            policy,
            model,
            horizon,
            gamma,
            policy_rate,
            model_rate,
        }
    }

    pub fn critic(&self) -> Option<&QCritic> {
        match &self.model {
            Model::Critic(c) => Some(c),
            _ => None,
        }
    }

    pub fn reward_net(&self) -> Option<&RewardNet> {
        match &self.model {
            Model::RewardNet(r) => Some(r),
            _ => None,
        }
    }

    /// Applies this algorithm's update for one finished episode.
    pub fn update(&mut self, trajectory: &Trajectory) -> Result<()> {
        let (gamma, lr, lr_model) = (self.gamma, self.policy_rate, self.model_rate);
        match (&self.algorithm, &mut self.model) {
            (Algorithm::Reinforce, _) => reinforce_update(&mut self.policy, trajectory, gamma, lr),
            (Algorithm::DrReinforce, _) => dr_reinforce_update(&mut self.policy, trajectory, gamma, lr, &self.env),
            (Algorithm::DrReinforceR, Model::RewardNet(net)) => {
                // Difference returns come from the network as it was before
                // seeing this episode.
                dr_reinforce_update(&mut self.policy, trajectory, gamma, lr, &*net)?;
                for step in &trajectory.steps {
                    net.regress_step(&step.state, &step.joint_action, step.reward, lr_model)?;
                }
                Ok(())
            }
            (Algorithm::Coma, Model::Critic(critic)) => {
                coma_update(&mut self.policy, critic, &self.env, trajectory, gamma, lr, lr_model)
            }
            (Algorithm::QA2c, Model::Critic(critic)) => {
                q_a2c_update(&mut self.policy, critic, &self.env, trajectory, gamma, lr, lr_model)
            }
            (Algorithm::Colby, Model::Local(nets)) => {
                colby_update(&mut self.policy, nets, &self.env, trajectory, gamma, lr, lr_model)
            }
            (algorithm, _) => unreachable!("{algorithm} constructed without its model"),
        }
    }

    /// Resets the environment, runs one episode, learns from it and returns the
    /// undiscounted team reward collected.
    pub fn train_episode<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let start = self.env.reset(rng);
        let trajectory = run_episode(&self.env, &self.policy, start, self.horizon, rng)?;
        self.update(&trajectory)?;
        Ok(trajectory.total_reward())
    }
}
