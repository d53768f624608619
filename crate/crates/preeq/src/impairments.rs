//! Hardware impairment and channel models: IQ-imbalance, third-order
//! non-linearity with clipping, AWGN, parameter trajectories and the EVM
//! metric.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Which end of the link an impairment is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
    Both,
}

impl Side {
    pub fn applies_tx(self) -> bool {
        matches!(self, Side::Tx | Side::Both)
    }

    pub fn applies_rx(self) -> bool {
        matches!(self, Side::Rx | Side::Both)
    }
}

/// Current impairment parameters. `beta_iq = 0.5`, `gamma_nl = 0` is the
/// nominal design point (pure scaling by 0.5, no distortion).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentState {
    pub beta_iq: f64,
    pub gamma_nl: f64,
    pub side: Side,
}

impl ImpairmentState {
    pub fn nominal(side: Side) -> Self {
        Self {
            beta_iq: 0.5,
            gamma_nl: 0.0,
            side,
        }
    }
}

/// IQ-imbalance: `y = beta * Re(x) + (1 - beta) * j * Im(x)` elementwise.
pub fn iq_imbalance(x: &[Complex64], beta: f64) -> Vec<Complex64> {
    x.iter()
        .map(|v| Complex64::new(beta * v.re, (1.0 - beta) * v.im))
        .collect()
}

/// How the input of the non-linearity is normalized to the unit disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NlNormalization {
    /// Scale by the reciprocal of the sequence peak magnitude; the clip is
    /// then only a guard.
    Peak,
    /// Scale by a fixed factor (a backoff relative to unit average power);
    /// samples exceeding unit magnitude are clipped, phase preserved.
    Fixed(f64),
}

/// AM-AM distortion `g(x) = x - gamma * |x|^2 * x` after clipping the
/// normalized input to `|x| <= 1` with unchanged phase. The sequence is
/// scaled into the unit disc per `norm` and scaled back afterwards.
pub fn nonlinearity_with(x: &[Complex64], gamma: f64, norm: NlNormalization) -> Vec<Complex64> {
    let scale = match norm {
        NlNormalization::Peak => {
            let peak = x.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            if peak > 0.0 {
                1.0 / peak
            } else {
                1.0
            }
        }
        NlNormalization::Fixed(s) => s,
    };
    let inv = 1.0 / scale;
    x.iter()
        .map(|v| {
            let mut z = v * scale;
            let m = z.norm();
            if m > 1.0 {
                z /= m; // clip magnitude, keep phase
            }
            let g = z * (1.0 - gamma * z.norm_sqr());
            g * inv
        })
        .collect()
}

/// [`nonlinearity_with`] using peak normalization.
pub fn nonlinearity(x: &[Complex64], gamma: f64) -> Vec<Complex64> {
    nonlinearity_with(x, gamma, NlNormalization::Peak)
}

/// Adds circularly symmetric complex Gaussian noise of total variance
/// `sigma2` (half per real dimension).
pub fn awgn(x: &[Complex64], sigma2: f64, rng: &mut impl Rng) -> Result<Vec<Complex64>> {
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be non-negative, got {sigma2}"
        )));
    }
    let std = (sigma2 / 2.0).sqrt();
    Ok(x.iter()
        .map(|v| {
            let nr: f64 = StandardNormal.sample(rng);
            let ni: f64 = StandardNormal.sample(rng);
            v + Complex64::new(std * nr, std * ni)
        })
        .collect())
}

/// AWGN operating point. `sigma2 = 1 / (r * m * Eb/N0)` with code rate
/// `r = 0.5` and 2 bits per QPSK symbol, i.e. `sigma2 = 10^(-EbN0_dB/10)`
/// for unit symbol energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub eb_n0_db: f64,
}

impl NoiseSpec {
    pub fn from_db(eb_n0_db: f64) -> Self {
        Self { eb_n0_db }
    }

    /// Complex noise variance per sample, referenced to unit symbol energy.
    pub fn sigma2(&self) -> f64 {
        10f64.powf(-self.eb_n0_db / 10.0)
    }
}

/// Time evolution of a single impairment parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Piecewise-constant: holds the value of the latest breakpoint whose
    /// time is <= the current step. Breakpoints strictly increasing.
    Scripted(Vec<(usize, f64)>),
    /// Gaussian random walk, reflected into `[lo, hi]`.
    RandomWalk { step_std: f64, lo: f64, hi: f64 },
}

impl Trajectory {
    pub fn scripted(points: Vec<(usize, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty trajectory".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument(
                "trajectory breakpoints must be strictly increasing in time".into(),
            ));
        }
        Ok(Trajectory::Scripted(points))
    }

    /// Parses the line-oriented "t value" trajectory file format.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let t = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("trajectory line {}: bad time", lineno + 1))
                })?;
            let v = it
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("trajectory line {}: bad value", lineno + 1))
                })?;
            points.push((t, v));
        }
        Trajectory::scripted(points)
    }

    /// Value for time step `t` (scripted mode) or one random-walk step
    /// from `value`.
    pub fn step(&self, value: f64, t: usize, rng: &mut impl Rng) -> f64 {
        match self {
            Trajectory::Scripted(points) => {
                let mut v = points[0].1;
                for &(bt, bv) in points {
                    if bt <= t {
                        v = bv;
                    } else {
                        break;
                    }
                }
                v
            }
            Trajectory::RandomWalk { step_std, lo, hi } => {
                let n: f64 = StandardNormal.sample(rng);
                reflect(value + step_std * n, *lo, *hi)
            }
        }
    }
}

fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(hi > lo);
    let span = hi - lo;
    while v < lo || v > hi {
        if v < lo {
            v = lo + (lo - v);
        }
        if v > hi {
            v = hi - (v - hi);
        }
        let _ = span;
    }
    v
}

/// Error vector magnitude: `sqrt(mean|distorted - ideal|^2 / mean|ideal|^2)`,
/// as a ratio.
pub fn evm(ideal: &[Complex64], distorted: &[Complex64]) -> Result<f64> {
    if ideal.len() != distorted.len() {
        return Err(Error::shape(
            format!("{} samples", ideal.len()),
            format!("{}", distorted.len()),
        ));
    }
    let p_ref: f64 = ideal.iter().map(|v| v.norm_sqr()).sum();
    if p_ref == 0.0 {
        return Err(Error::InvalidArgument("EVM reference power is zero".into()));
    }
    let p_err: f64 = ideal
        .iter()
        .zip(distorted)
        .map(|(a, b)| (b - a).norm_sqr())
        .sum();
    Ok((p_err / p_ref).sqrt())
}
