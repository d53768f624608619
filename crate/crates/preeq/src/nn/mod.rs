//! Minimal differentiable-computation engine for the residual
//! pre-equalizer: dense layers, ReLU, the fixed linear receiver tail
//! (CP removal, DFT, MMSE scale), MSE loss, reverse-mode gradients and
//! Adam updates.
//!
//! The computation graph is exactly the receiver chain; there is no
//! general-purpose autodiff. Double precision throughout.

mod adam;
mod checkpoint;
mod gradcheck;
mod loss;
mod receiver;
mod tape;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::grad_check;
pub use loss::{mse_loss, mse_loss_grad};
pub(crate) use loss::mse_loss_slices;
pub use receiver::{receiver_backward, receiver_forward, receiver_forward_recorded};
pub use tape::{backward, replay_forward, ComputationRecord, ParamGrads, TapeOp};

use num_complex::Complex64;
use rand::Rng;

use crate::tensor::RealTensor;
use crate::{Error, Result};

/// Real width of one reshaped OFDM frame (72 complex samples).
pub const FRAME_REALS: usize = 2 * crate::ofdm::FRAME_LEN;

/// Layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &RealTensor) -> Result<RealTensor> {
    x.check_finite("relu input")?;
    RealTensor::new(
        x.shape().to_vec(),
        x.data().iter().map(|&v| v.max(0.0)).collect(),
    )
}

/// Fully connected layer: `activation(W v + b)`. Weights are stored
/// row-major, one row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::shape(
                format!("{out_dim}x{in_dim} weights"),
                format!("{} values", weights.len()),
            ));
        }
        if biases.len() != out_dim {
            return Err(Error::shape(
                format!("{out_dim} biases"),
                format!("{} values", biases.len()),
            ));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    /// Writes the pre-activation `W v + b` into `pre`.
    pub fn preactivation(&self, input: &[f64], pre: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        pre.clear();
        pre.reserve(self.out_dim);
        for (row, b) in self
            .weights
            .chunks_exact(self.in_dim)
            .zip(self.biases.iter())
        {
            let acc: f64 = row.iter().zip(input).map(|(w, v)| w * v).sum();
            pre.push(acc + b);
        }
    }

    pub fn forward(&self, input: &RealTensor) -> Result<RealTensor> {
        if input.len() != self.in_dim {
            return Err(Error::shape(
                format!("{} inputs", self.in_dim),
                format!("{}", input.len()),
            ));
        }
        let mut pre = Vec::new();
        self.preactivation(input.data(), &mut pre);
        for v in &mut pre {
            *v = self.activation.apply(*v);
        }
        RealTensor::new(vec![self.out_dim], pre)
    }
}

/// Convention for reshaping 72 complex samples to 144 reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reshape {
    /// `[Re0, Im0, Re1, Im1, ...]` (default).
    Interleaved,
    /// `[Re0..Re71, Im0..Im71]`.
    Blocked,
}

impl Reshape {
    pub fn to_real(self, x: &[Complex64]) -> Vec<f64> {
        match self {
            Reshape::Interleaved => x.iter().flat_map(|v| [v.re, v.im]).collect(),
            Reshape::Blocked => x
                .iter()
                .map(|v| v.re)
                .chain(x.iter().map(|v| v.im))
                .collect(),
        }
    }

    pub fn to_complex(self, x: &[f64]) -> Vec<Complex64> {
        let n = x.len() / 2;
        match self {
            Reshape::Interleaved => x
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
            Reshape::Blocked => (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect(),
        }
    }
}

/// The residual pre-equalizer: `y_eq = y + alpha * f_nn(y)`.
///
/// The dense stack maps 144 reals to 144 reals through ReLU hidden layers
/// of width 256 and an identity output layer. `alpha = 0` bypasses the
/// network exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PreEqNet {
    pub layers: Vec<DenseLayer>,
    pub alpha: f64,
    pub alpha_trainable: bool,
    pub reshape: Reshape,
}

/// Hidden width from the pre-equalizer hyperparameters.
pub const HIDDEN_WIDTH: usize = 256;
/// Default number of ReLU hidden layers.
pub const DEFAULT_HIDDEN_LAYERS: usize = 3;

impl PreEqNet {
    /// Fresh untrained net: `hidden` ReLU layers of width 256 plus the
    /// width-144 identity output layer, `alpha = 0`.
    pub fn init(hidden: usize, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden + 1);
        let mut in_dim = FRAME_REALS;
        for _ in 0..hidden {
            layers.push(DenseLayer::glorot(in_dim, HIDDEN_WIDTH, Activation::Relu, rng));
            in_dim = HIDDEN_WIDTH;
        }
        layers.push(DenseLayer::glorot(in_dim, FRAME_REALS, Activation::Identity, rng));
        Self {
            layers,
            alpha: 0.0,
            alpha_trainable: true,
            reshape: Reshape::Interleaved,
        }
    }

    pub fn with_default_shape(rng: &mut impl Rng) -> Self {
        Self::init(DEFAULT_HIDDEN_LAYERS, rng)
    }

    /// Dense stack only (no residual path): 144 reals in, 144 reals out.
    pub fn stack_forward(&self, input: &[f64]) -> Vec<f64> {
        let mut cur = input.to_vec();
        let mut pre = Vec::new();
        for layer in &self.layers {
            layer.preactivation(&cur, &mut pre);
            cur.clear();
            cur.extend(pre.iter().map(|&v| layer.activation.apply(v)));
        }
        cur
    }

    /// `y + alpha * f_nn(y)` on a time-domain frame. With `alpha == 0`
    /// the input is returned bit-identically.
    pub fn preeq_forward(&self, frame: &crate::ofdm::OfdmFrame) -> Result<crate::ofdm::OfdmFrame> {
        let reals = self.reshape.to_real(frame.samples());
        let out = if self.alpha == 0.0 {
            reals
        } else {
            let branch = self.stack_forward(&reals);
            reals
                .iter()
                .zip(&branch)
                .map(|(y, b)| y + self.alpha * b)
                .collect()
        };
        crate::ofdm::OfdmFrame::new(self.reshape.to_complex(&out))
    }

    /// Total number of trainable scalars (alpha included when trainable).
    pub fn num_params(&self) -> usize {
        let n: usize = self
            .layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum();
        n + usize::from(self.alpha_trainable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{OfdmFrame, FRAME_LEN};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_cases() {
        let x = RealTensor::vector(vec![-1.0, 0.0, 2.5]);
        assert_eq!(relu(&x).unwrap().data(), &[0.0, 0.0, 2.5]);
        let z = RealTensor::zeros(vec![144]);
        assert_eq!(relu(&z).unwrap(), z);
        let p = RealTensor::vector(vec![0.1, 3.0, 7.5]);
        assert_eq!(relu(&p).unwrap(), p);
        let bad = RealTensor::vector(vec![f64::NAN]);
        assert!(relu(&bad).is_err());
    }

    #[test]
    fn dense_identity_and_bias() {
        let id = DenseLayer::new(
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0],
            Activation::Identity,
        )
        .unwrap();
        let v = RealTensor::vector(vec![3.0, -4.0]);
        assert_eq!(id.forward(&v).unwrap().data(), &[3.0, -4.0]);

        let bias_only = DenseLayer::new(
            2,
            2,
            vec![0.0; 4],
            vec![1.0, 2.0],
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(bias_only.forward(&v).unwrap().data(), &[1.0, 2.0]);

        let relu_layer = DenseLayer::new(
            2,
            2,
            vec![1.0, 1.0, 1.0, -1.0],
            vec![0.0, 0.0],
            Activation::Relu,
        )
        .unwrap();
        let v = RealTensor::vector(vec![1.0, 2.0]);
        assert_eq!(relu_layer.forward(&v).unwrap().data(), &[3.0, 0.0]);
    }

    #[test]
    fn dense_dimension_mismatch() {
        let l = DenseLayer::new(3, 2, vec![0.0; 6], vec![0.0; 2], Activation::Identity).unwrap();
        assert!(l.forward(&RealTensor::vector(vec![1.0, 2.0])).is_err());
        assert!(DenseLayer::new(3, 2, vec![0.0; 5], vec![0.0; 2], Activation::Identity).is_err());
    }

    #[test]
    fn reshape_roundtrip_both_conventions() {
        let x: Vec<Complex64> = (0..FRAME_LEN)
            .map(|i| Complex64::new(i as f64, -(i as f64) - 0.5))
            .collect();
        for conv in [Reshape::Interleaved, Reshape::Blocked] {
            let r = conv.to_real(&x);
            assert_eq!(r.len(), FRAME_REALS);
            assert_eq!(conv.to_complex(&r), x);
        }
        let r = Reshape::Interleaved.to_real(&x[..2]);
        assert_eq!(r, vec![0.0, -0.5, 1.0, -1.5]);
    }

    fn random_frame(rng: &mut impl Rng) -> OfdmFrame {
        OfdmFrame::new(
            (0..FRAME_LEN)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn residual_bypass_alpha_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let net = PreEqNet::with_default_shape(&mut rng);
        assert_eq!(net.alpha, 0.0);
        for _ in 0..50 {
            let frame = random_frame(&mut rng);
            let out = net.preeq_forward(&frame).unwrap();
            assert_eq!(out, frame);
        }
    }

    #[test]
    fn zero_frame_through_zero_bias_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut net = PreEqNet::with_default_shape(&mut rng);
        net.alpha = 0.7;
        let zero = OfdmFrame::new(vec![Complex64::new(0.0, 0.0); FRAME_LEN]).unwrap();
        let out = net.preeq_forward(&zero).unwrap();
        for s in out.samples() {
            assert_eq!(*s, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn output_bias_passthrough_stack() {
        // Zero hidden weights, output layer with bias b: frame + reshape(b).
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut net = PreEqNet::init(1, &mut rng);
        for l in &mut net.layers {
            for w in &mut l.weights {
                *w = 0.0;
            }
        }
        let bias: Vec<f64> = (0..FRAME_REALS).map(|i| 0.01 * i as f64).collect();
        net.layers.last_mut().unwrap().biases = bias.clone();
        net.alpha = 1.0;
        let frame = random_frame(&mut rng);
        let out = net.preeq_forward(&frame).unwrap();
        let expect: Vec<Complex64> = frame
            .samples()
            .iter()
            .zip(net.reshape.to_complex(&bias))
            .map(|(y, b)| y + b)
            .collect();
        for (a, b) in out.samples().iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
