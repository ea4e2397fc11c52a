//! Seeded additive white Gaussian noise.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Generator name recorded in reports.
pub const PRNG_NAME: &str = "ChaCha8Rng(seed_from_u64)";
/// Gaussian sampler recorded in reports.
pub const GAUSSIAN_SAMPLER: &str = "rand_distr::StandardNormal (ziggurat)";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        let spec = Self { sigma, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_finite() && self.sigma > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "noise sigma must be positive and finite, got {}",
                self.sigma
            )))
        }
    }
}

/// `img + n` with i.i.d. `N(0, sigma^2)` samples drawn in raster order.
/// The result is left unclamped.
pub fn add_awgn(img: &GrayImage, noise: NoiseSpec) -> Result<GrayImage> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let pixels = img
        .pixels()
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + noise.sigma * z
        })
        .collect();
    GrayImage::new(img.width(), img.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_noise() {
        let img = GrayImage::filled(16, 16, 100.0);
        let spec = NoiseSpec::new(15.0, 42).unwrap();
        assert_eq!(add_awgn(&img, spec).unwrap(), add_awgn(&img, spec).unwrap());
        let other = add_awgn(&img, NoiseSpec::new(15.0, 43).unwrap()).unwrap();
        assert_ne!(add_awgn(&img, spec).unwrap(), other);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        assert!(NoiseSpec::new(0.0, 1).is_err());
        assert!(NoiseSpec::new(-2.0, 1).is_err());
        assert!(NoiseSpec::new(f64::NAN, 1).is_err());
        let img = GrayImage::filled(2, 2, 0.0);
        assert!(add_awgn(&img, NoiseSpec { sigma: 0.0, seed: 0 }).is_err());
    }

    #[test]
    fn sample_moments_match_sigma() {
        // std of the sample std is about sigma / sqrt(2N) = 0.028 here.
        let img = GrayImage::filled(512, 512, 128.0);
        let out = add_awgn(&img, NoiseSpec::new(20.0, 7).unwrap()).unwrap();
        let n = out.len() as f64;
        let mean = out.mean();
        let var = out.pixels().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 20.0).abs() < 0.5, "std {}", var.sqrt());
        assert!((mean - 128.0).abs() < 0.2, "mean {mean}");
    }

    #[test]
    fn output_is_not_clamped() {
        let img = GrayImage::filled(64, 64, 0.0);
        let out = add_awgn(&img, NoiseSpec::new(30.0, 3).unwrap()).unwrap();
        assert!(out.pixels().iter().any(|&v| v < 0.0));
    }
}
