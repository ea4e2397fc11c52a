//! Windowed, per-pixel normalized weighted averaging: the Gaussian bilateral
//! filter (GBF), the anisotropic domain filter (ADF) and the directional
//! bilateral filter (DBF).
//!
//! Every variant evaluates `x_p = sum_q phi(p, q) y_q / sum_q phi(p, q)` over
//! a square window of radius `r` with reflect-101 boundaries, accumulated as
//! `y_p + sum_q phi (y_q - y_p) / sum_q phi`. The domain
//! weight is a Gaussian of the quadratic form
//! `Q = a dx^2 + 2 b dx dy + c dy^2`; GBF uses `(a, b, c) = (1, 0, 1)`, while
//! ADF and DBF derive the form from the local orientation field.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{mirror_index, GrayImage};
use crate::tensor::OrientationField;

/// Upper bound for automatically chosen window radii.
pub const MAX_AUTO_RADIUS: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gbf,
    Adf,
    Dbf,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Gbf, Variant::Adf, Variant::Dbf];

    pub fn needs_field(self) -> bool {
        matches!(self, Variant::Adf | Variant::Dbf)
    }

    pub fn has_range_kernel(self) -> bool {
        matches!(self, Variant::Gbf | Variant::Dbf)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gbf => "gbf",
            Variant::Adf => "adf",
            Variant::Dbf => "dbf",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbf" => Ok(Variant::Gbf),
            "adf" => Ok(Variant::Adf),
            "dbf" => Ok(Variant::Dbf),
            other => Err(Error::invalid(format!("unknown filter variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Reflect-101.
    #[default]
    Mirror,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub variant: Variant,
    /// `sigma_d` for GBF, `rho_d` for ADF/DBF, in pixels.
    pub domain_scale: f64,
    /// `sigma_r` for GBF, `rho_r` for DBF; ignored by ADF.
    pub range_scale: f64,
    /// Radius 0 makes the window the single centre sample.
    pub window_radius: usize,
    pub boundary: Boundary,
}

/// `ceil(3 * scale)` for GBF and `ceil(6 * scale)` for ADF/DBF, since the
/// oriented kernel's long axis can be stretched by up to 2. Capped at
/// [`MAX_AUTO_RADIUS`], never below 1.
pub fn default_window_radius(variant: Variant, domain_scale: f64) -> usize {
    let stretch = if variant.needs_field() { 2.0 } else { 1.0 };
    ((3.0 * domain_scale * stretch).ceil() as usize).clamp(1, MAX_AUTO_RADIUS)
}

impl FilterParams {
    /// Parameters with the default window radius for `variant`.
    pub fn new(variant: Variant, domain_scale: f64, range_scale: f64) -> Self {
        Self {
            variant,
            domain_scale,
            range_scale,
            window_radius: default_window_radius(variant, domain_scale),
            boundary: Boundary::Mirror,
        }
    }

    pub fn with_window(mut self, radius: usize) -> Self {
        self.window_radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.domain_scale.is_finite() && self.domain_scale > 0.0) {
            return Err(Error::invalid(format!(
                "domain scale must be positive, got {}",
                self.domain_scale
            )));
        }
        if self.variant.has_range_kernel() && !(self.range_scale.is_finite() && self.range_scale > 0.0) {
            return Err(Error::invalid(format!(
                "range scale must be positive, got {}",
                self.range_scale
            )));
        }
        Ok(())
    }
}

/// One neighbour's unnormalized weight `phi(p, q)` at offset `(dx, dy)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSample {
    pub dx: isize,
    pub dy: isize,
    pub weight: f64,
}

pub fn domain_weight_gaussian(dx: isize, dy: isize, sigma_d: f64) -> f64 {
    let d2 = (dx * dx + dy * dy) as f64;
    (-d2 / (2.0 * sigma_d * sigma_d)).exp()
}

/// Oriented Gaussian: the offset is rotated by `theta` into the kernel frame
/// `(m, n)`, whose `m` axis is scaled by `gamma1` and `n` axis by `gamma2`.
pub fn domain_weight_oriented(dx: isize, dy: isize, theta: f64, gamma1: f64, gamma2: f64, rho_d: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (dx, dy) = (dx as f64, dy as f64);
    let m = dx * c + dy * s;
    let n = -dx * s + dy * c;
    let q = gamma1 * gamma1 * m * m + gamma2 * gamma2 * n * n;
    (-q / (2.0 * rho_d * rho_d)).exp()
}

pub fn range_weight(yp: f64, yq: f64, sigma_r: f64) -> f64 {
    let d = yp - yq;
    (-(d * d) / (2.0 * sigma_r * sigma_r)).exp()
}

/// Coefficients of `Q = a dx^2 + 2 b dx dy + c dy^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct QuadForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadForm {
    pub const ISOTROPIC: QuadForm = QuadForm { a: 1.0, b: 0.0, c: 1.0 };

    /// Expanded rotation of the oriented kernel. Written around `gamma2^2`
    /// so that `gamma1 == gamma2` collapses exactly to the isotropic form.
    pub fn oriented(theta: f64, gamma1: f64, gamma2: f64) -> QuadForm {
        let (s, c) = theta.sin_cos();
        let g1 = gamma1 * gamma1;
        let g2 = gamma2 * gamma2;
        let diff = g1 - g2;
        QuadForm {
            a: g2 + diff * c * c,
            b: diff * c * s,
            c: g2 + diff * s * s,
        }
    }

    #[inline]
    pub fn eval(&self, dx: f64, dy: f64) -> f64 {
        self.a * (dx * dx) + 2.0 * self.b * (dx * dy) + self.c * (dy * dy)
    }
}

/// Checks the variant/field pairing and returns the per-pixel quadratic
/// forms.
pub(crate) fn quad_forms(img: &GrayImage, variant: Variant, field: Option<&OrientationField>) -> Result<Vec<QuadForm>> {
    match (variant.needs_field(), field) {
        (false, _) => Ok(vec![QuadForm::ISOTROPIC; img.len()]),
        (true, None) => Err(Error::invalid(format!(
            "variant {variant} requires an orientation field"
        ))),
        (true, Some(f)) => {
            if !f.matches(img) {
                return Err(Error::DimensionMismatch {
                    left_w: img.width(),
                    left_h: img.height(),
                    right_w: f.width,
                    right_h: f.height,
                });
            }
            Ok((0..f.len())
                .map(|i| QuadForm::oriented(f.theta[i], f.gamma1[i], f.gamma2[i]))
                .collect())
        }
    }
}

/// Window sums for one pixel.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PixelSums {
    /// Normalizer `h_p`.
    pub h: f64,
    /// `sum phi * (y_q - y_p)`.
    pub t: f64,
    /// `sum phi * (y_q - y_p)^2`.
    pub v: f64,
    /// Weight of samples whose mirrored source is `p` itself.
    pub self_weight: f64,
}

impl PixelSums {
    /// `y_p + sum phi (y_q - y_p) / h`, which reproduces constant windows
    /// exactly.
    pub fn estimate(&self, yp: f64) -> f64 {
        yp + self.t / self.h
    }

    /// `d x_p / d y_p` with domain weights held fixed:
    /// `(w_self + sum phi' (y_q - x_p)) / h` with
    /// `phi' = phi (y_q - y_p) / r^2`.
    pub fn derivative(&self, range_scale: Option<f64>) -> f64 {
        let mut num = self.self_weight;
        if let Some(r) = range_scale {
            num += (self.v - self.t * self.t / self.h) / (r * r);
        }
        num / self.h
    }
}

pub(crate) struct Engine<'a> {
    img: &'a GrayImage,
    forms: Vec<QuadForm>,
    radius: isize,
    two_d2: f64,
    two_r2: Option<f64>,
}

impl<'a> Engine<'a> {
    pub fn new(img: &'a GrayImage, params: &FilterParams, field: Option<&OrientationField>) -> Result<Self> {
        params.validate()?;
        let forms = quad_forms(img, params.variant, field)?;
        Ok(Self {
            img,
            forms,
            radius: params.window_radius as isize,
            two_d2: 2.0 * params.domain_scale * params.domain_scale,
            two_r2: params
                .variant
                .has_range_kernel()
                .then_some(2.0 * params.range_scale * params.range_scale),
        })
    }

    #[inline]
    fn visit(&self, x: usize, y: usize, mut f: impl FnMut(isize, isize, usize, f64, f64)) {
        let (w, h) = (self.img.width(), self.img.height());
        let px = self.img.pixels();
        let p = y * w + x;
        let yp = px[p];
        let form = self.forms[p];
        let r = self.radius;
        for dy in -r..=r {
            let row = mirror_index(y as isize + dy, h) * w;
            for dx in -r..=r {
                let src = row + mirror_index(x as isize + dx, w);
                let yq = px[src];
                let mut phi = (-form.eval(dx as f64, dy as f64) / self.two_d2).exp();
                if let Some(two_r2) = self.two_r2 {
                    let d = yq - yp;
                    phi *= (-(d * d) / two_r2).exp();
                }
                f(dx, dy, src, yq, phi);
            }
        }
    }

    pub fn sums(&self, x: usize, y: usize) -> PixelSums {
        let p = y * self.img.width() + x;
        let yp = self.img.pixels()[p];
        let mut acc = PixelSums::default();
        self.visit(x, y, |_, _, src, yq, phi| {
            let d = yq - yp;
            acc.h += phi;
            acc.t += phi * d;
            acc.v += phi * d * d;
            if src == p {
                acc.self_weight += phi;
            }
        });
        acc
    }

    pub fn estimate(&self, x: usize, y: usize) -> f64 {
        let yp = self.img.get(x, y);
        let (mut h, mut t) = (0.0, 0.0);
        self.visit(x, y, |_, _, _, yq, phi| {
            h += phi;
            t += phi * (yq - yp);
        });
        yp + t / h
    }

    pub fn samples(&self, x: usize, y: usize) -> Vec<KernelSample> {
        let mut out = Vec::new();
        self.visit(x, y, |dx, dy, _, _, weight| out.push(KernelSample { dx, dy, weight }));
        out
    }

    /// Row-parallel map over all pixels; output is in raster order.
    pub fn map_rows<T: Send + Clone + Default>(&self, f: impl Fn(usize, usize) -> T + Sync) -> Vec<T> {
        let w = self.img.width();
        let mut out = vec![T::default(); self.img.len()];
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, o) in row.iter_mut().enumerate() {
                *o = f(x, y);
            }
        });
        out
    }
}

/// Filters `img`. `field` must be supplied for ADF and DBF and is ignored
/// for GBF.
pub fn apply_filter(img: &GrayImage, params: &FilterParams, field: Option<&OrientationField>) -> Result<GrayImage> {
    let engine = Engine::new(img, params, field)?;
    let pixels = engine.map_rows(|x, y| engine.estimate(x, y));
    GrayImage::new(img.width(), img.height(), pixels)
}

/// The unnormalized weights used at pixel `(x, y)`, in window raster order.
pub fn kernel_samples(
    img: &GrayImage,
    params: &FilterParams,
    field: Option<&OrientationField>,
    x: usize,
    y: usize,
) -> Result<Vec<KernelSample>> {
    if x >= img.width() || y >= img.height() {
        return Err(Error::invalid(format!("pixel ({x}, {y}) outside image")));
    }
    Ok(Engine::new(img, params, field)?.samples(x, y))
}
