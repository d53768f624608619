//! The differentiable receiver chain: pre-equalizer, CP removal, unitary
//! DFT and per-subcarrier MMSE scaling. The DFT and MMSE stages are fixed
//! linear maps, so the whole chain is differentiable end to end.

use super::tape::{backward, ComputationRecord, ParamGrads, TapeOp};
use super::PreEqNet;
use crate::ofdm::{self, OfdmFrame, QpskSymbolVec};
use crate::Result;

/// Full receiver forward pass with flat channel gain `h`:
/// `mmse(dft(remove_cp(preeq(y))))`. With `alpha == 0` the output is
/// bit-identical to [`ofdm::ofdm_demodulate_gain`].
pub fn receiver_forward(
    net: &PreEqNet,
    frame: &OfdmFrame,
    h: f64,
    noise_var: f64,
) -> Result<QpskSymbolVec> {
    let equalized = net.preeq_forward(frame)?;
    ofdm::ofdm_demodulate_gain(&equalized, h, noise_var)
}

/// Forward pass that additionally records the computation against `label`
/// for reverse-mode differentiation. Returns the equalized symbols and
/// the finished record (ending in the scalar MSE loss).
pub fn receiver_forward_recorded(
    net: &PreEqNet,
    frame: &OfdmFrame,
    h: f64,
    noise_var: f64,
    label: &QpskSymbolVec,
) -> Result<(QpskSymbolVec, ComputationRecord)> {
    let input = net.reshape.to_real(frame.samples());
    let mut ops = Vec::with_capacity(net.layers.len() + 5);

    let mut cur = input.clone();
    let mut pre = Vec::new();
    for (li, layer) in net.layers.iter().enumerate() {
        layer.preactivation(&cur, &mut pre);
        ops.push(TapeOp::Dense {
            layer: li,
            input: std::mem::take(&mut cur),
            pre: pre.clone(),
        });
        cur = pre.iter().map(|&p| layer.activation.apply(p)).collect();
    }
    let branch = cur;
    let combined: Vec<f64> = input
        .iter()
        .zip(&branch)
        .map(|(y, b)| y + net.alpha * b)
        .collect();
    ops.push(TapeOp::ResidualScaleAdd {
        skip: input.clone(),
        branch,
        alpha: net.alpha,
    });

    let time = net.reshape.to_complex(&combined);
    ops.push(TapeOp::ToComplex);
    let body = time[ofdm::CP_LEN..].to_vec();
    ops.push(TapeOp::RemoveCp);
    let freq = ofdm::dft(&body)?;
    ops.push(TapeOp::Dft);
    let c = ofdm::mmse_gain(h, noise_var);
    let symbols: Vec<_> = freq.iter().map(|v| v * c).collect();
    ops.push(TapeOp::MmseScale { factor: c });

    let loss = super::loss::mse_loss_slices(&symbols, label.symbols())?;
    ops.push(TapeOp::Mse {
        estimated: symbols.clone(),
        label: label.symbols().to_vec(),
    });

    Ok((
        QpskSymbolVec(symbols),
        ComputationRecord { input, ops, loss },
    ))
}

/// Gradient of the recorded loss for every trainable parameter.
pub fn receiver_backward(net: &PreEqNet, record: &ComputationRecord) -> Result<ParamGrads> {
    backward(net, record)
}
