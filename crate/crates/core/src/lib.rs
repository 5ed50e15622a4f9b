//! Difference-rewards policy gradients for cooperative multi-agent gridworlds.
//!
//! The crate contains the two benchmark environments ([`env`]), a small
//! hand-differentiated network ([`nn`]), decentralized softmax policies
//! ([`policy`]), six episode-level learners ([`learners`]), the learned reward
//! model ([`reward_model`]), prediction-error and noise diagnostics
//! ([`analysis`]) and the seeded experiment harness ([`harness`]).

pub mod analysis;
pub mod env;
pub mod error;
pub mod features;
pub mod harness;
pub mod learners;
pub mod nn;
pub mod policy;
pub mod reward_model;
pub mod rollout;
pub mod tabular;

pub use env::{Action, Cell, EnvKind, GridState, GridWorld, JointAction, Trajectory};
pub use error::{Error, Result};
pub use learners::{Algorithm, Trainer};
pub use nn::Mlp;
pub use policy::{AgentPolicy, JointPolicy};
pub use reward_model::RewardNet;
