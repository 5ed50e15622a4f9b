//! One-hidden-layer ReLU network with hand-written reverse mode.
//!
//! `y = W2 · relu(W1 · x + b1) + b2`. Weight matrices are stored row-major.
//! The same type backs policies, critics and reward networks.

use rand::Rng;

use crate::error::{Error, Result};

/// Hidden width of critics and reward networks.
pub const VALUE_HIDDEN: usize = 256;
/// Hidden width of decentralized policy networks.
pub const POLICY_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascent,
    Descent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        }
    }
}

/// Parameters of the network. Also used, with identical shapes, to hold
/// gradients (see [`Gradients`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    output: usize,
    /// hidden × input
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// output × hidden
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients share the parameter layout and are additive.
pub type Gradients = Mlp;

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input, hidden, output);
        let bound1 = 1.0 / (input.max(1) as f64).sqrt();
        let bound2 = 1.0 / (hidden.max(1) as f64).sqrt();
        for w in &mut net.w1 {
            *w = rng.random_range(-bound1..=bound1);
        }
        for w in &mut net.w2 {
            *w = rng.random_range(-bound2..=bound2);
        }
        net
    }

    pub fn from_parts(
        input: usize,
        hidden: usize,
        output: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        if w1.len() != hidden * input || b1.len() != hidden || w2.len() != output * hidden || b2.len() != output {
            return Err(Error::Snapshot(format!(
                "parameter lengths do not match shape {input}x{hidden}x{output}"
            )));
        }
        Ok(Mlp {
            input,
            hidden,
            output,
            w1,
            b1,
            w2,
            b2,
        })
    }

    /// An all-zero record with the same shapes as `self`.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input, self.hidden, self.output)
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// All parameter tensors in serialization order.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.tensors().into_iter().flat_map(|t| t.iter().copied())
    }

    fn same_shape(&self, other: &Mlp) -> bool {
        self.input == other.input && self.hidden == other.hidden && self.output == other.output
    }

    /// Hidden pre-activations `W1 · x + b1`.
    pub fn pre_activations(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input, "input width mismatch");
        let mut pre = self.b1.clone();
        for (j, row) in self.w1.chunks_exact(self.input).enumerate() {
            pre[j] += dot(row, input);
        }
        pre
    }

    /// Output layer applied to hidden pre-activations (the rectifier is applied here).
    pub fn head(&self, pre: &[f64]) -> Vec<f64> {
        let mut out = self.b2.clone();
        self.head_into(pre, &mut out);
        out
    }

    pub(crate) fn head_into(&self, pre: &[f64], out: &mut [f64]) {
        debug_assert_eq!(pre.len(), self.hidden);
        for (o, row) in self.w2.chunks_exact(self.hidden).enumerate() {
            let mut acc = self.b2[o];
            for (w, &p) in row.iter().zip(pre) {
                if p > 0.0 {
                    acc += w * p;
                }
            }
            out[o] = acc;
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let pre = self.pre_activations(input);
        self.head(&pre)
    }

    /// Gradient of `<cotangent, forward(input)>` with respect to every parameter.
    pub fn backward(&self, input: &[f64], cotangent: &[f64]) -> Gradients {
        let mut grads = self.zeros_like();
        self.accumulate_backward(input, cotangent, 1.0, &mut grads);
        grads
    }

    /// Adds `scale ·` [`Mlp::backward`] into `grads` without allocating a new record.
    pub fn accumulate_backward(&self, input: &[f64], cotangent: &[f64], scale: f64, grads: &mut Gradients) {
        let pre = self.pre_activations(input);
        self.accumulate_backward_from_pre(input, &pre, cotangent, scale, grads);
    }

    pub(crate) fn accumulate_backward_from_pre(
        &self,
        input: &[f64],
        pre: &[f64],
        cotangent: &[f64],
        scale: f64,
        grads: &mut Gradients,
    ) {
        assert_eq!(cotangent.len(), self.output, "cotangent width mismatch");
        assert!(self.same_shape(grads), "gradient shape mismatch");
        if scale == 0.0 || cotangent.iter().all(|&c| c == 0.0) {
            return;
        }
        let mut hidden_cot = vec![0.0; self.hidden];
        for (o, &c) in cotangent.iter().enumerate() {
            let c = c * scale;
            grads.b2[o] += c;
            if c == 0.0 {
                continue;
            }
            let w_row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            let g_row = &mut grads.w2[o * self.hidden..(o + 1) * self.hidden];
            for j in 0..self.hidden {
                let p = pre[j];
                if p > 0.0 {
                    g_row[j] += c * p;
                    hidden_cot[j] += c * w_row[j];
                }
            }
        }
        for (j, &d) in hidden_cot.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grads.b1[j] += d;
            let g_row = &mut grads.w1[j * self.input..(j + 1) * self.input];
            for (g, &x) in g_row.iter_mut().zip(input) {
                *g += d * x;
            }
        }
    }

    /// `self += scale · other`, elementwise.
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) {
        assert!(self.same_shape(other), "shape mismatch");
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// One plain gradient step. On a non-finite result the parameters are
    /// left untouched and a divergence error is returned.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64, direction: Direction) -> Result<()> {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        let step = direction.sign() * learning_rate;
        let mut next = self.clone();
        next.add_scaled(grads, step);
        if !next.is_finite() {
            return Err(Error::Divergence {
                context: format!("sgd step (lr={learning_rate})"),
            });
        }
        *self = next;
        Ok(())
    }

    /// Flat little-endian snapshot: four `u64` shape entries (w1 rows, w1
    /// cols, w2 rows, w2 cols), then `w1, b1, w2, b2` as row-major `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.param_count());
        for dim in [self.hidden, self.input, self.output, self.hidden] {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in self.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses one snapshot from the front of `bytes`, returning the network
    /// and the number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|b| b.try_into().expect("slice of length 8"))
                .ok_or_else(|| Error::Snapshot("truncated header".into()))
        };
        let dims: Vec<usize> = (0..4)
            .map(|i| word(i).map(|w| u64::from_le_bytes(w) as usize))
            .collect::<Result<_>>()?;
        let (hidden, input, output, hidden2) = (dims[0], dims[1], dims[2], dims[3]);
        if hidden != hidden2 {
            return Err(Error::Snapshot(format!(
                "inconsistent hidden width {hidden} vs {hidden2}"
            )));
        }
        let mut net = Mlp::zeros(input, hidden, output);
        let needed = 32 + 8 * net.param_count();
        if bytes.len() < needed {
            return Err(Error::Snapshot(format!(
                "expected {needed} bytes, found {}",
                bytes.len()
            )));
        }
        let mut offset = 32;
        for t in net.tensors_mut() {
            for v in t.iter_mut() {
                *v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"));
                offset += 8;
            }
        }
        Ok((net, offset))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight-line re-evaluation used as an independent oracle.
    fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let (i, h, o) = (net.input_dim(), net.hidden_dim(), net.output_dim());
        let mut hidden = vec![0.0; h];
        for (j, hj) in hidden.iter_mut().enumerate() {
            let mut s = net.b1[j];
            for (k, xk) in x.iter().enumerate().take(i) {
                s += net.w1[j * i + k] * xk;
            }
            *hj = if s > 0.0 { s } else { 0.0 };
        }
        (0..o)
            .map(|m| net.b2[m] + (0..h).map(|j| net.w2[m * h + j] * hidden[j]).sum::<f64>())
            .collect()
    }

    fn random_net(rng: &mut ChaCha8Rng, i: usize, h: usize, o: usize) -> Mlp {
        let mut net = Mlp::init(i, h, o, rng);
        for b in net.b1.iter_mut().chain(net.b2.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        net
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(4, 8, 3);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]), vec![0.0; 3]);
    }

    #[test]
    fn unit_net_rectifies() {
        let net = Mlp::from_parts(1, 1, 1, vec![1.0], vec![0.0], vec![1.0], vec![0.0]).unwrap();
        assert_eq!(net.forward(&[2.0]), vec![2.0]);
        assert_eq!(net.forward(&[-2.0]), vec![0.0]);
    }

    #[test]
    fn forward_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let net = random_net(&mut rng, 7, 13, 4);
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = net.forward(&x);
            let want = reference_forward(&net, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_layer_scale_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = random_net(&mut rng, 5, 9, 3);
        let mut doubled = net.clone();
        doubled
            .w2
            .iter_mut()
            .chain(doubled.b2.iter_mut())
            .for_each(|v| *v *= 2.0);
        let x = [0.3, -0.2, 0.9, 0.0, -0.7];
        for (a, b) in net.forward(&x).iter().zip(doubled.forward(&x)) {
            assert_eq!(2.0 * a, b);
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = random_net(&mut rng, 3, 6, 2);
        let g = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn dead_unit_has_no_incoming_gradient() {
        let mut net = Mlp::zeros(2, 2, 1);
        net.w1 = vec![1.0, 1.0, -1.0, -1.0];
        net.w2 = vec![1.0, 1.0];
        let g = net.backward(&[0.5, 0.5], &[1.0]);
        // unit 1 has pre-activation -1
        assert_eq!(&g.w1[2..4], &[0.0, 0.0]);
        assert_eq!(g.b1[1], 0.0);
        assert_eq!(&g.w1[0..2], &[0.5, 0.5]);
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        for _ in 0..100 {
            let net = random_net(&mut rng, 4, 6, 3);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let objective = |n: &Mlp| dot(&n.forward(&x), &c);
            let analytic: Vec<f64> = net.backward(&x, &c).iter().collect();
            let mut probe = net.clone();
            let mut k = 0;
            for t in 0..4 {
                for e in 0..net.tensors()[t].len() {
                    let orig = probe.tensors()[t][e];
                    probe.tensors_mut()[t][e] = orig + h;
                    let up = objective(&probe);
                    probe.tensors_mut()[t][e] = orig - h;
                    let down = objective(&probe);
                    probe.tensors_mut()[t][e] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let a = analytic[k];
                    let err = (a - numeric).abs();
                    assert!(
                        err < 1e-7 || err / a.abs().max(numeric.abs()) < 1e-4,
                        "param {k}: analytic {a} numeric {numeric}"
                    );
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn sgd_step_arithmetic() {
        let mut net = Mlp::from_parts(1, 1, 1, vec![1.0], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        let mut g = net.zeros_like();
        g.w1[0] = 0.5;
        net.sgd_step(&g, 0.1, Direction::Ascent).unwrap();
        assert!((net.w1[0] - 1.05).abs() < 1e-15);

        let before = net.clone();
        net.sgd_step(&net.zeros_like(), 0.1, Direction::Descent).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn descent_then_ascent_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = random_net(&mut rng, 3, 5, 2);
        let original = net.clone();
        let g = random_net(&mut rng, 3, 5, 2);
        net.sgd_step(&g, 0.01, Direction::Descent).unwrap();
        net.sgd_step(&g, 0.01, Direction::Ascent).unwrap();
        for (a, b) in net.iter().zip(original.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_update_is_rejected() {
        let mut net = Mlp::zeros(1, 1, 1);
        let mut g = net.zeros_like();
        g.b2[0] = f64::INFINITY;
        let err = net.sgd_step(&g, 1.0, Direction::Ascent).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        assert!(net.is_finite());
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let net = Mlp::zeros(3, 4, 2);
        let bytes = net.to_bytes();
        assert!(Mlp::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Mlp::from_bytes(&bytes[..10]).is_err());
    }

    proptest! {
        #[test]
        fn snapshot_round_trip(seed in any::<u64>(), i in 1usize..6, h in 1usize..10, o in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_net(&mut rng, i, h, o);
            let bytes = net.to_bytes();
            prop_assert_eq!(bytes.len(), 32 + 8 * net.param_count());
            let (back, used) = Mlp::from_bytes(&bytes).unwrap();
            prop_assert_eq!(used, bytes.len());
            prop_assert_eq!(back, net);
        }
    }
}
