//! Structure-tensor analysis: derivative-of-Gaussian gradients, the smoothed
//! second-moment field, its closed-form eigen-analysis, and the per-pixel
//! steering parameters `(theta, gamma1, gamma2)` of the oriented kernel.
//!
//! Angles are measured from the +x axis (columns) towards +y (rows, pointing
//! down) and are reported modulo pi.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conv::{gaussian_derivative_kernel, gaussian_kernel, separable};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Gradient scale used when none is given.
pub const DEFAULT_SIGMA_G: f64 = 1.0;
/// Tensor smoothing scale used when none is given.
pub const DEFAULT_RHO: f64 = 2.0;
/// Relative flat-region threshold, a fraction of the mean tensor trace.
pub const DEFAULT_FLAT_FRACTION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl Gradient {
    pub fn negated(&self) -> Gradient {
        Gradient {
            width: self.width,
            height: self.height,
            gx: self.gx.iter().map(|v| -v).collect(),
            gy: self.gy.iter().map(|v| -v).collect(),
        }
    }
}

/// Smoothed second-moment matrix `[[j11, j12], [j12, j22]]` per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub width: usize,
    pub height: usize,
    pub j11: Vec<f64>,
    pub j12: Vec<f64>,
    pub j22: Vec<f64>,
}

/// Per-pixel kernel steering: long-axis angle and axis scalings with
/// `gamma1 * gamma2 == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationField {
    pub width: usize,
    pub height: usize,
    pub theta: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub coherence: Vec<f64>,
}

impl OrientationField {
    /// `theta = 0`, `gamma1 = gamma2 = 1` everywhere.
    pub fn isotropic(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            theta: vec![0.0; n],
            gamma1: vec![1.0; n],
            gamma2: vec![1.0; n],
            coherence: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn matches(&self, img: &GrayImage) -> bool {
        self.width == img.width() && self.height == img.height()
    }

    /// θ mapped from [0, π) onto 0..255.
    pub fn theta_map(&self) -> GrayImage {
        let px = self.theta.iter().map(|t| t / PI * 255.0).collect();
        GrayImage::new(self.width, self.height, px).expect("finite theta")
    }

    /// C mapped from [0, 1] onto 0..255.
    pub fn coherence_map(&self) -> GrayImage {
        let px = self.coherence.iter().map(|c| c * 255.0).collect();
        GrayImage::new(self.width, self.height, px).expect("finite coherence")
    }
}

/// How the orientation angle is derived from the tensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaFormula {
    /// `pi/2 + atan2(2 j12, j11 - j22) / 2`: perpendicular to the dominant
    /// eigenvector.
    #[default]
    Eigen,
    /// `pi/2 + atan(2 j12 / (j22 - j11))`, without the half angle or
    /// quadrant handling.
    Paper,
}

impl FromStr for ThetaFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigen" => Ok(ThetaFormula::Eigen),
            "paper" => Ok(ThetaFormula::Paper),
            other => Err(Error::invalid(format!("unknown theta formula '{other}'"))),
        }
    }
}

/// Below this trace a neighbourhood counts as flat (C = 0, θ = 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatThreshold {
    /// Fraction of the image's mean trace.
    Relative(f64),
    Absolute(f64),
}

impl Default for FlatThreshold {
    fn default() -> Self {
        FlatThreshold::Relative(DEFAULT_FLAT_FRACTION)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorConfig {
    pub sigma_g: f64,
    pub rho: f64,
    pub flat: FlatThreshold,
    pub theta_formula: ThetaFormula,
}

impl Default for TensorConfig {
    fn default() -> Self {
        Self {
            sigma_g: DEFAULT_SIGMA_G,
            rho: DEFAULT_RHO,
            flat: FlatThreshold::default(),
            theta_formula: ThetaFormula::Eigen,
        }
    }
}

/// Image gradient by derivative-of-Gaussian correlation.
pub fn gradient_dog(img: &GrayImage, sigma_g: f64) -> Result<Gradient> {
    if !(sigma_g.is_finite() && sigma_g > 0.0) {
        return Err(Error::invalid(format!("sigma_g must be positive, got {sigma_g}")));
    }
    let (w, h) = (img.width(), img.height());
    let d = gaussian_derivative_kernel(sigma_g);
    let g = gaussian_kernel(sigma_g);
    Ok(Gradient {
        width: w,
        height: h,
        gx: separable(img.pixels(), w, h, &d, &g),
        gy: separable(img.pixels(), w, h, &g, &d),
    })
}

/// Gaussian-smoothed outer product of the gradient (`rho == 0` skips the
/// smoothing).
pub fn structure_tensor(grad: &Gradient, rho: f64) -> Result<TensorField> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::invalid(format!("rho must be non-negative, got {rho}")));
    }
    let (w, h) = (grad.width, grad.height);
    if grad.gx.len() != w * h || grad.gy.len() != w * h {
        return Err(Error::invalid("gradient components have inconsistent sizes"));
    }
    let xx: Vec<f64> = grad.gx.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = grad.gx.iter().zip(&grad.gy).map(|(a, b)| a * b).collect();
    let yy: Vec<f64> = grad.gy.iter().map(|b| b * b).collect();
    let k = gaussian_kernel(rho);
    Ok(TensorField {
        width: w,
        height: h,
        j11: separable(&xx, w, h, &k, &k),
        j12: separable(&xy, w, h, &k, &k),
        j22: separable(&yy, w, h, &k, &k),
    })
}

/// Eigenvalues of `[[j11, j12], [j12, j22]]`, largest first.
pub fn eigenvalues(j11: f64, j12: f64, j22: f64) -> (f64, f64) {
    let mean = 0.5 * (j11 + j22);
    let radius = (0.5 * (j11 - j22)).hypot(j12);
    (mean + radius, mean - radius)
}

/// Long-axis angle in [0, π), perpendicular to the dominant gradient.
pub fn orientation(j11: f64, j12: f64, j22: f64) -> f64 {
    orientation_with(ThetaFormula::Eigen, j11, j12, j22)
}

pub fn orientation_with(formula: ThetaFormula, j11: f64, j12: f64, j22: f64) -> f64 {
    let raw = match formula {
        ThetaFormula::Eigen => FRAC_PI_2 + 0.5 * (2.0 * j12).atan2(j11 - j22),
        ThetaFormula::Paper => {
            let t = (2.0 * j12 / (j22 - j11)).atan();
            FRAC_PI_2 + if t.is_nan() { 0.0 } else { t }
        }
    };
    wrap_half_turn(raw)
}

pub(crate) fn wrap_half_turn(angle: f64) -> f64 {
    let t = angle.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Certainty `(λ1 - λ2) / (λ1 + λ2)` in [0, 1]; zero when the trace does not
/// exceed `eps_flat`.
pub fn coherence(lambda1: f64, lambda2: f64, eps_flat: f64) -> f64 {
    let trace = lambda1 + lambda2;
    if trace <= eps_flat || trace <= 0.0 {
        return 0.0;
    }
    ((lambda1 - lambda2) / trace).clamp(0.0, 1.0)
}

/// `(gamma1, gamma2) = (1 / (1 + C), 1 + C)`.
pub fn scalings(c: f64) -> (f64, f64) {
    let gamma2 = 1.0 + c;
    (1.0 / gamma2, gamma2)
}

impl TensorField {
    pub fn mean_trace(&self) -> f64 {
        let n = self.j11.len() as f64;
        self.j11.iter().zip(&self.j22).map(|(a, c)| a + c).sum::<f64>() / n
    }

    pub fn flat_epsilon(&self, flat: FlatThreshold) -> f64 {
        match flat {
            FlatThreshold::Relative(frac) => frac * self.mean_trace(),
            FlatThreshold::Absolute(eps) => eps,
        }
    }

    /// Eigen-analysis of every pixel.
    pub fn steer(&self, eps_flat: f64, formula: ThetaFormula) -> OrientationField {
        let mut field = OrientationField::isotropic(self.width, self.height);
        for i in 0..self.j11.len() {
            let (a, b, c) = (self.j11[i], self.j12[i], self.j22[i]);
            let (l1, l2) = eigenvalues(a, b, c);
            let coh = coherence(l1, l2, eps_flat);
            if l1 + l2 <= eps_flat || l1 + l2 <= 0.0 {
                continue;
            }
            let (g1, g2) = scalings(coh);
            field.theta[i] = orientation_with(formula, a, b, c);
            field.gamma1[i] = g1;
            field.gamma2[i] = g2;
            field.coherence[i] = coh;
        }
        field
    }

    /// CSV dump with header `m,n,j11,j12,j22` (`m` column, `n` row).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,j11,j12,j22\n");
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                let _ = writeln!(out, "{x},{y},{},{},{}", self.j11[i], self.j12[i], self.j22[i]);
            }
        }
        out
    }
}

/// Full pipeline: gradient, tensor, eigen-analysis, steering parameters.
pub fn orientation_field(img: &GrayImage, cfg: &TensorConfig) -> Result<OrientationField> {
    Ok(tensor_and_field(img, cfg)?.1)
}

pub fn tensor_and_field(img: &GrayImage, cfg: &TensorConfig) -> Result<(TensorField, OrientationField)> {
    match cfg.flat {
        FlatThreshold::Relative(v) | FlatThreshold::Absolute(v) if !(v.is_finite() && v >= 0.0) => {
            return Err(Error::invalid(format!("flat threshold must be non-negative, got {v}")));
        }
        _ => {}
    }
    let grad = gradient_dog(img, cfg.sigma_g)?;
    let tensor = structure_tensor(&grad, cfg.rho)?;
    let eps = tensor.flat_epsilon(cfg.flat);
    let field = tensor.steer(eps, cfg.theta_formula);
    Ok((tensor, field))
}
