//! Central finite-difference validation of the analytic gradients.

use rand::Rng;

use super::receiver::{receiver_backward, receiver_forward_recorded};
use super::PreEqNet;
use crate::ofdm::{OfdmFrame, QpskSymbolVec};
use crate::{Error, Result};

/// Address of a single scalar parameter.
#[derive(Debug, Clone, Copy)]
enum ParamRef {
    Weight { layer: usize, index: usize },
    Bias { layer: usize, index: usize },
    Alpha,
}

fn sample_param(net: &PreEqNet, rng: &mut impl Rng) -> ParamRef {
    // Alpha is sampled with small fixed probability; everything else
    // proportionally to layer sizes.
    if net.alpha_trainable && rng.gen_bool(0.02) {
        return ParamRef::Alpha;
    }
    let layer = rng.gen_range(0..net.layers.len());
    let l = &net.layers[layer];
    let idx = rng.gen_range(0..l.weights.len() + l.biases.len());
    if idx < l.weights.len() {
        ParamRef::Weight { layer, index: idx }
    } else {
        ParamRef::Bias {
            layer,
            index: idx - l.weights.len(),
        }
    }
}

fn get(net: &PreEqNet, p: ParamRef) -> f64 {
    match p {
        ParamRef::Weight { layer, index } => net.layers[layer].weights[index],
        ParamRef::Bias { layer, index } => net.layers[layer].biases[index],
        ParamRef::Alpha => net.alpha,
    }
}

fn set(net: &mut PreEqNet, p: ParamRef, v: f64) {
    match p {
        ParamRef::Weight { layer, index } => net.layers[layer].weights[index] = v,
        ParamRef::Bias { layer, index } => net.layers[layer].biases[index] = v,
        ParamRef::Alpha => net.alpha = v,
    }
}

fn analytic(grads: &super::ParamGrads, p: ParamRef) -> f64 {
    match p {
        ParamRef::Weight { layer, index } => grads.weights[layer][index],
        ParamRef::Bias { layer, index } => grads.biases[layer][index],
        ParamRef::Alpha => grads.alpha,
    }
}

/// Compares analytic gradients of the full receiver loss against central
/// finite differences on `num_samples` randomly chosen parameters.
/// Returns the maximum relative error
/// `|analytic - cd| / max(|analytic|, |cd|, 1e-12)`.
pub fn grad_check(
    net: &PreEqNet,
    frame: &OfdmFrame,
    label: &QpskSymbolVec,
    h: f64,
    noise_var: f64,
    eps: f64,
    num_samples: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "grad_check eps must lie in [1e-6, 1e-3], got {eps}"
        )));
    }
    let (_, record) = receiver_forward_recorded(net, frame, h, noise_var, label)?;
    let grads = receiver_backward(net, &record)?;

    let mut work = net.clone();
    let mut max_rel = 0.0f64;
    for _ in 0..num_samples {
        let p = sample_param(net, rng);
        let orig = get(net, p);
        set(&mut work, p, orig + eps);
        let (_, rec_p) = receiver_forward_recorded(&work, frame, h, noise_var, label)?;
        set(&mut work, p, orig - eps);
        let (_, rec_m) = receiver_forward_recorded(&work, frame, h, noise_var, label)?;
        set(&mut work, p, orig);
        let cd = (rec_p.loss - rec_m.loss) / (2.0 * eps);
        let a = analytic(&grads, p);
        let rel = (a - cd).abs() / a.abs().max(cd.abs()).max(1e-12);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (PreEqNet, OfdmFrame, QpskSymbolVec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = PreEqNet::init(2, &mut rng);
        net.alpha = 0.5;
        let frame = OfdmFrame::new(
            (0..crate::ofdm::FRAME_LEN)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let label = QpskSymbolVec(
            (0..crate::ofdm::FFT_LEN)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        );
        (net, frame, label)
    }

    #[test]
    fn correct_gradients_pass() {
        let (net, frame, label) = setup(50);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let err = grad_check(&net, &frame, &label, 0.5, 0.1, 1e-4, 50, &mut rng).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn corrupted_gradient_detected() {
        // Negating one analytic gradient must blow the relative error up.
        let (net, frame, label) = setup(52);
        let (_, record) = receiver_forward_recorded(&net, &frame, 0.5, 0.1, &label).unwrap();
        let grads = receiver_backward(&net, &record).unwrap();
        // Find a weight with a clearly nonzero gradient.
        let (li, wi, g) = grads
            .weights
            .iter()
            .enumerate()
            .flat_map(|(li, ws)| ws.iter().enumerate().map(move |(wi, &g)| (li, wi, g)))
            .max_by(|a, b| a.2.abs().partial_cmp(&b.2.abs()).unwrap())
            .unwrap();
        assert!(g.abs() > 1e-9);
        let eps = 1e-4;
        let mut work = net.clone();
        work.layers[li].weights[wi] += eps;
        let (_, rp) = receiver_forward_recorded(&work, &frame, 0.5, 0.1, &label).unwrap();
        work.layers[li].weights[wi] -= 2.0 * eps;
        let (_, rm) = receiver_forward_recorded(&work, &frame, 0.5, 0.1, &label).unwrap();
        let cd = (rp.loss - rm.loss) / (2.0 * eps);
        let corrupted = -g;
        let rel = (corrupted - cd).abs() / corrupted.abs().max(cd.abs()).max(1e-12);
        assert!(rel >= 1e-1, "corruption not detected, rel {rel}");
    }

    #[test]
    fn eps_out_of_range_rejected() {
        let (net, frame, label) = setup(53);
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        assert!(grad_check(&net, &frame, &label, 0.5, 0.1, 1e-2, 5, &mut rng).is_err());
        assert!(grad_check(&net, &frame, &label, 0.5, 0.1, 1e-8, 5, &mut rng).is_err());
    }
}
