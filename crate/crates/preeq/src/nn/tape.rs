//! Recorded forward pass through the receiver chain and its reverse-mode
//! gradient.
//!
//! The record is an ordered list of executed primitive ops with cached
//! intermediates; replaying it forward reproduces the recorded loss
//! bit-identically, and walking it backwards yields the gradient of the
//! loss with respect to every trainable parameter.

use num_complex::Complex64;

use super::{DenseLayer, PreEqNet};
use crate::ofdm::{CP_LEN, FRAME_LEN};
use crate::{Error, Result};

/// One executed primitive operation with the values needed to replay and
/// differentiate it.
#[derive(Debug, Clone)]
pub enum TapeOp {
    /// `output = activation(W input + b)` for `net.layers[layer]`.
    Dense {
        layer: usize,
        input: Vec<f64>,
        pre: Vec<f64>,
    },
    /// `output = skip + alpha * branch` elementwise over 144 reals.
    ResidualScaleAdd {
        skip: Vec<f64>,
        branch: Vec<f64>,
        alpha: f64,
    },
    /// Real 144-vector to 72 complex samples per the net's reshape.
    ToComplex,
    /// Drop the cyclic prefix (72 -> 64 complex).
    RemoveCp,
    /// Unitary 64-point DFT.
    Dft,
    /// Uniform real MMSE scaling.
    MmseScale { factor: f64 },
    /// Scalar MSE against `label`, mean over real components.
    Mse {
        estimated: Vec<Complex64>,
        label: Vec<Complex64>,
    },
}

/// A recorded forward pass ending in a scalar loss.
#[derive(Debug, Clone)]
pub struct ComputationRecord {
    /// Reshaped 144-real network input.
    pub input: Vec<f64>,
    pub ops: Vec<TapeOp>,
    /// Recorded scalar loss.
    pub loss: f64,
}

/// Gradients mirroring the trainable parameters of a [`PreEqNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl ParamGrads {
    pub fn zeros_like(net: &PreEqNet) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            alpha: 0.0,
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.alpha += other.alpha;
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.weights {
            for x in a.iter_mut() {
                *x *= factor;
            }
        }
        for a in &mut self.biases {
            for x in a.iter_mut() {
                *x *= factor;
            }
        }
        self.alpha *= factor;
    }
}

enum Value {
    Real(Vec<f64>),
    Cplx(Vec<Complex64>),
    Scalar(f64),
}

/// Re-executes the record from its stored input. Returns the loss, which
/// must equal the recorded one bit-identically.
pub fn replay_forward(net: &PreEqNet, record: &ComputationRecord) -> Result<f64> {
    let mut cur = Value::Real(record.input.clone());
    for op in &record.ops {
        cur = match (op, cur) {
            (TapeOp::Dense { layer, .. }, Value::Real(v)) => {
                let l: &DenseLayer = &net.layers[*layer];
                let mut pre = Vec::new();
                l.preactivation(&v, &mut pre);
                Value::Real(pre.iter().map(|&p| l.activation.apply(p)).collect())
            }
            (TapeOp::ResidualScaleAdd { skip, alpha, .. }, Value::Real(branch)) => Value::Real(
                skip.iter()
                    .zip(&branch)
                    .map(|(s, b)| s + alpha * b)
                    .collect(),
            ),
            (TapeOp::ToComplex, Value::Real(v)) => Value::Cplx(net.reshape.to_complex(&v)),
            (TapeOp::RemoveCp, Value::Cplx(v)) => Value::Cplx(v[CP_LEN..].to_vec()),
            (TapeOp::Dft, Value::Cplx(v)) => Value::Cplx(crate::ofdm::dft(&v)?),
            (TapeOp::MmseScale { factor }, Value::Cplx(v)) => {
                Value::Cplx(v.iter().map(|x| x * *factor).collect())
            }
            (TapeOp::Mse { label, .. }, Value::Cplx(v)) => {
                Value::Scalar(super::mse_loss_slices(&v, label)?)
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "record op sequence does not type-check".into(),
                ))
            }
        };
    }
    match cur {
        Value::Scalar(l) => Ok(l),
        _ => Err(Error::InvalidArgument(
            "record does not end in a scalar loss".into(),
        )),
    }
}

/// Reverse-mode gradient of the recorded loss with respect to all
/// trainable parameters. Input gradients are not produced.
pub fn backward(net: &PreEqNet, record: &ComputationRecord) -> Result<ParamGrads> {
    match record.ops.last() {
        Some(TapeOp::Mse { .. }) => {}
        _ => {
            return Err(Error::InvalidArgument(
                "record must end in a scalar loss".into(),
            ))
        }
    }

    let mut grads = ParamGrads::zeros_like(net);
    // Upstream gradient, in whichever domain the op below produced.
    let mut g_real: Vec<f64> = Vec::new();
    let mut g_cplx: Vec<Complex64> = Vec::new();

    for op in record.ops.iter().rev() {
        match op {
            TapeOp::Mse { estimated, label } => {
                // d/d est of mean over 2n reals of (est - label)^2.
                let n = estimated.len() as f64;
                g_cplx = estimated
                    .iter()
                    .zip(label)
                    .map(|(e, l)| (e - l) / n)
                    .collect();
            }
            TapeOp::MmseScale { factor } => {
                for g in &mut g_cplx {
                    *g *= *factor;
                }
            }
            TapeOp::Dft => {
                // Adjoint of the unitary DFT is its inverse.
                g_cplx = crate::ofdm::idft(&g_cplx)?;
            }
            TapeOp::RemoveCp => {
                let mut padded = vec![Complex64::new(0.0, 0.0); FRAME_LEN];
                padded[CP_LEN..].copy_from_slice(&g_cplx);
                g_cplx = padded;
            }
            TapeOp::ToComplex => {
                g_real = net.reshape.to_real(&g_cplx);
            }
            TapeOp::ResidualScaleAdd { branch, alpha, .. } => {
                if net.alpha_trainable {
                    grads.alpha += g_real.iter().zip(branch).map(|(g, b)| g * b).sum::<f64>();
                }
                for (g, _) in g_real.iter_mut().zip(branch) {
                    *g *= *alpha;
                }
            }
            TapeOp::Dense { layer, input, pre } => {
                let l = &net.layers[*layer];
                let g_pre: Vec<f64> = g_real
                    .iter()
                    .zip(pre)
                    .map(|(g, p)| g * l.activation.derivative(*p))
                    .collect();
                let dw = &mut grads.weights[*layer];
                for (i, gp) in g_pre.iter().enumerate() {
                    if *gp == 0.0 {
                        continue;
                    }
                    let row = &mut dw[i * l.in_dim..(i + 1) * l.in_dim];
                    for (w, v) in row.iter_mut().zip(input) {
                        *w += gp * v;
                    }
                }
                for (b, gp) in grads.biases[*layer].iter_mut().zip(&g_pre) {
                    *b += gp;
                }
                // g_in = W^T g_pre
                let mut g_in = vec![0.0; l.in_dim];
                for (i, gp) in g_pre.iter().enumerate() {
                    if *gp == 0.0 {
                        continue;
                    }
                    let row = &l.weights[i * l.in_dim..(i + 1) * l.in_dim];
                    for (gi, w) in g_in.iter_mut().zip(row) {
                        *gi += gp * w;
                    }
                }
                g_real = g_in;
            }
        }
    }
    Ok(grads)
}
