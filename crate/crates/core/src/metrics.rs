//! Image quality metrics.

use crate::error::Result;
use crate::image::GrayImage;

/// Peak intensity for 8-bit data.
pub const DEFAULT_PEAK: f64 = 255.0;

/// Mean squared error `(1/N) * sum (a_p - b_p)^2`.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(sum_sq_diff(a.pixels(), b.pixels()) / a.len() as f64)
}

pub(crate) fn sum_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// PSNR in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &GrayImage, b: &GrayImage, peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Noise level whose expected PSNR against the clean image is `psnr_db`.
pub fn sigma_for_psnr(psnr_db: f64, peak: f64) -> f64 {
    peak * 10f64.powf(-psnr_db / 20.0)
}

/// Formats a PSNR value, printing `inf` for the identical-image sentinel.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}
