//! Centralized state-action inputs for critics and reward networks.

use crate::nn::Mlp;

/// `features ⊕ onehot(a¹) ⊕ … ⊕ onehot(aᴺ)`.
pub fn encode_state_action(features: &[f64], joint_action: &[usize], n_actions: usize) -> Vec<f64> {
    let mut input = Vec::with_capacity(features.len() + joint_action.len() * n_actions);
    input.extend_from_slice(features);
    for &a in joint_action {
        assert!(a < n_actions, "action {a} out of range");
        input.extend((0..n_actions).map(|k| if k == a { 1.0 } else { 0.0 }));
    }
    input
}

/// Outputs of a scalar network on `encode_state_action(features, a')` for every
/// `a'` that differs from `joint_action` only in `agent`'s entry.
///
/// The one-hot blocks contribute single columns of `W1`, so the shared part of
/// the hidden pre-activation is computed once and each substitution only swaps
/// one column.
pub fn substitution_outputs(
    net: &Mlp,
    features: &[f64],
    joint_action: &[usize],
    n_actions: usize,
    agent: usize,
) -> Vec<f64> {
    let width = net.input_dim();
    assert_eq!(
        width,
        features.len() + joint_action.len() * n_actions,
        "input width mismatch"
    );
    assert_eq!(net.output_dim(), 1, "expected a scalar network");
    let own_col = |a: usize| features.len() + agent * n_actions + a;
    let mut base = net.b1.clone();
    for (j, row) in net.w1.chunks_exact(width).enumerate() {
        let mut acc = crate::nn::dot(&row[..features.len()], features);
        for (i, &a) in joint_action.iter().enumerate() {
            if i != agent {
                acc += row[features.len() + i * n_actions + a];
            }
        }
        base[j] += acc;
    }
    let mut pre = vec![0.0; base.len()];
    let mut out = [0.0];
    (0..n_actions)
        .map(|b| {
            let col = own_col(b);
            for (j, p) in pre.iter_mut().enumerate() {
                *p = base[j] + net.w1[j * width + col];
            }
            net.head_into(&pre, &mut out);
            out[0]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn joint_actions_differ_only_in_one_hot_block() {
        let f = [0.1, 0.2, 0.3];
        let a = encode_state_action(&f, &[0, 4, 2], 5);
        let b = encode_state_action(&f, &[0, 1, 2], 5);
        assert_eq!(a.len(), 3 + 15);
        let differing: Vec<usize> = (0..a.len()).filter(|&k| a[k] != b[k]).collect();
        assert_eq!(differing, vec![3 + 5 + 1, 3 + 5 + 4]);
    }

    #[test]
    fn substitution_matches_full_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n_agents in 2..5 {
            let feats: Vec<f64> = (0..2 * n_agents).map(|_| rng.random_range(0.0..1.0)).collect();
            let width = feats.len() + 5 * n_agents;
            let mut net = Mlp::init(width, 32, 1, &mut rng);
            net.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
            let joint: Vec<usize> = (0..n_agents).map(|_| rng.random_range(0..5)).collect();
            for agent in 0..n_agents {
                let fast = substitution_outputs(&net, &feats, &joint, 5, agent);
                for (b, v) in fast.iter().enumerate() {
                    let mut alt = joint.clone();
                    alt[agent] = b;
                    let slow = net.forward(&encode_state_action(&feats, &alt, 5))[0];
                    assert!((v - slow).abs() < 1e-12);
                }
            }
        }
    }
}
