//! Conventional OFDM baseline: QPSK mapping, unitary 64-point DFT/IDFT,
//! cyclic prefix handling and per-subcarrier MMSE equalization.
//!
//! All 64 subcarriers carry data. The channel frequency response is flat,
//! so the equalizer takes a single real gain `h` for all subcarriers.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Number of subcarriers / DFT length.
pub const FFT_LEN: usize = 64;
/// Cyclic prefix length in samples.
pub const CP_LEN: usize = 8;
/// Time-domain frame length (CP + body).
pub const FRAME_LEN: usize = FFT_LEN + CP_LEN;

/// Binary sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock(Vec<u8>);

impl BitBlock {
    /// Builds a bit block, rejecting non-binary values.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hamming distance to another block of the same length.
    pub fn hamming(&self, other: &BitBlock) -> usize {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Sequence of complex constellation symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct QpskSymbolVec(pub Vec<Complex64>);

impl QpskSymbolVec {
    pub fn symbols(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One OFDM symbol in the time domain: 8 CP samples followed by the
/// 64-sample body.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame(pub Vec<Complex64>);

impl OfdmFrame {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != FRAME_LEN {
            return Err(Error::shape(
                format!("{FRAME_LEN} samples"),
                format!("{}", samples.len()),
            ));
        }
        Ok(Self(samples))
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.0
    }
}

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Maps bit pairs onto the Gray-labeled QPSK grid:
/// `(b0, b1) -> ((1-2*b0) + j(1-2*b1)) / sqrt(2)`.
pub fn qpsk_map(bits: &BitBlock) -> Result<QpskSymbolVec> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "QPSK mapping needs an even number of bits, got {}",
            bits.len()
        )));
    }
    let symbols = bits
        .bits()
        .chunks_exact(2)
        .map(|pair| {
            Complex64::new(
                (1.0 - 2.0 * pair[0] as f64) * INV_SQRT2,
                (1.0 - 2.0 * pair[1] as f64) * INV_SQRT2,
            )
        })
        .collect();
    Ok(QpskSymbolVec(symbols))
}

/// Hard sign decisions inverting [`qpsk_map`]. A component that is exactly
/// zero decides bit 0.
pub fn qpsk_demap_hard(symbols: &QpskSymbolVec) -> BitBlock {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for s in symbols.symbols() {
        bits.push(if s.re < 0.0 { 1 } else { 0 });
        bits.push(if s.im < 0.0 { 1 } else { 0 });
    }
    BitBlock(bits)
}

/// Unitary 64-point DFT: `X_k = (1/8) * sum_n x_n e^{-j 2 pi n k / 64}`.
pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    transform(x, -1.0)
}

/// Inverse of [`dft`], also unitary.
pub fn idft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    transform(x, 1.0)
}

/// Radix-2 decimation-in-time FFT with unitary 1/sqrt(N) scaling.
fn transform(x: &[Complex64], sign: f64) -> Result<Vec<Complex64>> {
    if x.len() != FFT_LEN {
        return Err(Error::shape(
            format!("{FFT_LEN} samples"),
            format!("{}", x.len()),
        ));
    }
    let n = FFT_LEN;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    // Bit-reversal permutation (n = 64, 6 bits).
    for (i, v) in x.iter().enumerate() {
        let j = (i as u32).reverse_bits() >> (32 - 6);
        out[j as usize] = *v;
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = out[start + k];
                let b = out[start + k + len / 2] * w;
                out[start + k] = a + b;
                out[start + k + len / 2] = a - b;
                w *= wlen;
            }
        }
        len <<= 1;
    }
    let scale = 1.0 / (n as f64).sqrt();
    for v in &mut out {
        *v *= scale;
    }
    Ok(out)
}

/// Prepends the last 8 body samples as cyclic prefix.
pub fn add_cp(body: &[Complex64]) -> Result<OfdmFrame> {
    if body.len() != FFT_LEN {
        return Err(Error::shape(
            format!("{FFT_LEN} samples"),
            format!("{}", body.len()),
        ));
    }
    let mut samples = Vec::with_capacity(FRAME_LEN);
    samples.extend_from_slice(&body[FFT_LEN - CP_LEN..]);
    samples.extend_from_slice(body);
    Ok(OfdmFrame(samples))
}

/// Drops the cyclic prefix, returning the 64-sample body.
pub fn remove_cp(frame: &OfdmFrame) -> Vec<Complex64> {
    frame.samples()[CP_LEN..].to_vec()
}

/// Per-subcarrier MMSE scaling for a flat real channel gain `h`:
/// `S_k = Y_k * h / (h^2 + noise_var)`.
pub fn mmse_equalize(freq: &[Complex64], h: f64, noise_var: f64) -> Vec<Complex64> {
    let c = mmse_gain(h, noise_var);
    freq.iter().map(|y| y * c).collect()
}

/// The (real) MMSE scaling factor for flat gain `h`.
pub fn mmse_gain(h: f64, noise_var: f64) -> f64 {
    h / (h * h + noise_var)
}

/// IDFT followed by cyclic-prefix insertion.
pub fn ofdm_modulate(grid: &QpskSymbolVec) -> Result<OfdmFrame> {
    add_cp(&idft(grid.symbols())?)
}

/// CP removal, DFT and MMSE equalization with flat gain `h`.
pub fn ofdm_demodulate_gain(frame: &OfdmFrame, h: f64, noise_var: f64) -> Result<QpskSymbolVec> {
    let freq = dft(&remove_cp(frame))?;
    Ok(QpskSymbolVec(mmse_equalize(&freq, h, noise_var)))
}

/// CP removal, DFT and MMSE equalization with unit channel gain.
pub fn ofdm_demodulate(frame: &OfdmFrame, noise_var: f64) -> Result<QpskSymbolVec> {
    ofdm_demodulate_gain(frame, 1.0, noise_var)
}
