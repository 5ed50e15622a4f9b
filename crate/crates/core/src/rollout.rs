use rand::Rng;

use crate::env::{GridState, GridWorld, JointAction, StepRecord, Trajectory};
use crate::error::Result;
use crate::policy::JointPolicy;

/// Runs `policy` from `start` for `horizon` steps.
pub fn run_episode<R: Rng + ?Sized>(
    env: &GridWorld,
    policy: &JointPolicy,
    start: GridState,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(horizon);
    let mut state = start;
    for _ in 0..horizon {
        let observations = env.observe_all(&state);
        let joint_action = policy.sample(&observations, rng)?;
        let (next, reward) = env.step(&state, &joint_action, rng);
        steps.push(StepRecord {
            state,
            observations,
            joint_action,
            reward,
        });
        state = next;
    }
    Ok(Trajectory { steps })
}

/// Discounted return of executing `first_action` in `start` and then
/// following `policy`, over `horizon` steps in total.
pub fn discounted_return_from<R: Rng + ?Sized>(
    env: &GridWorld,
    policy: &JointPolicy,
    start: &GridState,
    first_action: &JointAction,
    horizon: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    let mut discount = 1.0;
    let mut state = start.clone();
    for t in 0..horizon {
        let joint_action = if t == 0 {
            first_action.clone()
        } else {
            policy.sample(&env.observe_all(&state), rng)?
        };
        let (next, reward) = env.step(&state, &joint_action, rng);
        total += discount * reward;
        discount *= gamma;
        state = next;
    }
    Ok(total)
}
