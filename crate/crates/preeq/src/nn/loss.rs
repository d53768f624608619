//! Regression loss on equalized symbols, computed before demapping so a
//! gradient exists everywhere.

use num_complex::Complex64;

use crate::ofdm::QpskSymbolVec;
use crate::{Error, Result};

/// Mean squared error over real components: for `n` complex symbols the
/// mean runs over `2n` real residuals.
pub fn mse_loss(estimated: &QpskSymbolVec, label: &QpskSymbolVec) -> Result<f64> {
    mse_loss_slices(estimated.symbols(), label.symbols())
}

pub(crate) fn mse_loss_slices(estimated: &[Complex64], label: &[Complex64]) -> Result<f64> {
    if estimated.len() != label.len() {
        return Err(Error::shape(
            format!("{} symbols", label.len()),
            format!("{}", estimated.len()),
        ));
    }
    if estimated.is_empty() {
        return Err(Error::InvalidArgument("empty loss input".into()));
    }
    let sum: f64 = estimated
        .iter()
        .zip(label)
        .map(|(e, l)| (e - l).norm_sqr())
        .sum();
    Ok(sum / (2.0 * estimated.len() as f64))
}

/// Gradient of [`mse_loss`] with respect to the estimate, one complex
/// value per symbol holding the two real partials.
pub fn mse_loss_grad(estimated: &QpskSymbolVec, label: &QpskSymbolVec) -> Result<Vec<Complex64>> {
    if estimated.len() != label.len() {
        return Err(Error::shape(
            format!("{} symbols", label.len()),
            format!("{}", estimated.len()),
        ));
    }
    let n = estimated.len() as f64;
    Ok(estimated
        .symbols()
        .iter()
        .zip(label.symbols())
        .map(|(e, l)| (e - l) / n)
        .collect())
}
