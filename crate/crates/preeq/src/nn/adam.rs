//! Adam optimizer over the pre-equalizer parameters.

use super::{ParamGrads, PreEqNet};
use crate::{Error, Result};

/// Adam accumulators and hyperparameters. Moment shapes mirror the
/// parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Step counter, incremented before each update.
    pub t: u64,
    pub m: ParamGrads,
    pub v: ParamGrads,
}

impl AdamState {
    /// Fresh state with the pre-equalizer hyperparameters
    /// (lr 0.001, beta1 0.9, beta2 0.999, eps 1e-8).
    pub fn new(net: &PreEqNet) -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: ParamGrads::zeros_like(net),
            v: ParamGrads::zeros_like(net),
        }
    }

    fn shapes_match(&self, net: &PreEqNet) -> bool {
        self.m.weights.len() == net.layers.len()
            && self
                .m
                .weights
                .iter()
                .zip(&net.layers)
                .all(|(m, l)| m.len() == l.weights.len())
    }
}

/// One bias-corrected Adam step, updating `net` in place.
pub fn adam_step(net: &mut PreEqNet, grads: &ParamGrads, state: &mut AdamState) -> Result<()> {
    if !state.shapes_match(net) || grads.weights.len() != net.layers.len() {
        return Err(Error::shape(
            "optimizer state matching network",
            "mismatched shapes",
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let lr = state.learning_rate;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mhat = *m / bc1;
        let vhat = *v / bc2;
        *param -= lr * mhat / (vhat.sqrt() + eps);
    };

    for (li, layer) in net.layers.iter_mut().enumerate() {
        for (i, w) in layer.weights.iter_mut().enumerate() {
            update(
                w,
                grads.weights[li][i],
                &mut state.m.weights[li][i],
                &mut state.v.weights[li][i],
            );
        }
        for (i, b) in layer.biases.iter_mut().enumerate() {
            update(
                b,
                grads.biases[li][i],
                &mut state.m.biases[li][i],
                &mut state.v.biases[li][i],
            );
        }
    }
    if net.alpha_trainable {
        let mut a = net.alpha;
        update(&mut a, grads.alpha, &mut state.m.alpha, &mut state.v.alpha);
        net.alpha = a;
    }
    Ok(())
}
