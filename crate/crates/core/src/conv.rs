//! Separable correlation with truncated Gaussian and derivative-of-Gaussian
//! kernels under reflect-101 boundaries.

use rayon::prelude::*;

use crate::image::mirror_index;

/// A 1-D kernel stored as its non-negative half; taps at `-i` follow from
/// the symmetry.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel1d {
    /// `k[-i] = k[i]`.
    Even(Vec<f64>),
    /// `k[-i] = -k[i]`, `k[0] = 0`.
    Odd(Vec<f64>),
}

impl Kernel1d {
    pub fn radius(&self) -> usize {
        match self {
            Kernel1d::Even(h) | Kernel1d::Odd(h) => h.len() - 1,
        }
    }

    /// Full tap list from `-r` to `r`.
    pub fn taps(&self) -> Vec<f64> {
        let (half, sign) = match self {
            Kernel1d::Even(h) => (h, 1.0),
            Kernel1d::Odd(h) => (h, -1.0),
        };
        let r = half.len() - 1;
        (0..=2 * r)
            .map(|j| {
                let i = j as isize - r as isize;
                let v = half[i.unsigned_abs()];
                if i < 0 {
                    sign * v
                } else {
                    v
                }
            })
            .collect()
    }

    /// `sum_i f(c + i) k[i]` where `f(j)` is `sample(j)`.
    #[inline]
    fn apply(&self, center: isize, sample: impl Fn(isize) -> f64) -> f64 {
        match self {
            Kernel1d::Even(h) => {
                let mut acc = h[0] * sample(center);
                for (i, &k) in h.iter().enumerate().skip(1) {
                    let i = i as isize;
                    acc += k * (sample(center + i) + sample(center - i));
                }
                acc
            }
            Kernel1d::Odd(h) => {
                let mut acc = 0.0;
                for (i, &k) in h.iter().enumerate().skip(1) {
                    let i = i as isize;
                    acc += k * (sample(center + i) - sample(center - i));
                }
                acc
            }
        }
    }
}

pub fn truncation_radius(scale: f64) -> usize {
    (3.0 * scale).ceil() as usize
}

/// Unit-sum Gaussian of standard deviation `sigma`, truncated at
/// `ceil(3 sigma)`. `sigma == 0` gives the identity kernel.
pub fn gaussian_kernel(sigma: f64) -> Kernel1d {
    if sigma == 0.0 {
        return Kernel1d::Even(vec![1.0]);
    }
    let r = truncation_radius(sigma);
    let raw: Vec<f64> = (0..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    Kernel1d::Even(raw.into_iter().map(|v| v / total).collect())
}

/// First derivative of a Gaussian in correlation form, scaled so that a unit
/// ramp gives a unit response. Taps sum to exactly zero by construction.
pub fn gaussian_derivative_kernel(sigma: f64) -> Kernel1d {
    let r = truncation_radius(sigma).max(1);
    let raw: Vec<f64> = (0..=r)
        .map(|i| i as f64 * (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    // Response to f(j) = j is sum_i i * k[i] = 2 * sum_{i>0} i * k[i].
    let moment = 2.0 * raw.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>();
    Kernel1d::Odd(raw.into_iter().map(|v| v / moment).collect())
}

/// Correlates a row-major field with `kx` along x, then `ky` along y.
pub fn separable(data: &[f64], width: usize, height: usize, kx: &Kernel1d, ky: &Kernel1d) -> Vec<f64> {
    debug_assert_eq!(data.len(), width * height);
    let mut tmp = vec![0.0; data.len()];
    tmp.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let src = &data[y * width..(y + 1) * width];
        for (x, out) in row.iter_mut().enumerate() {
            *out = kx.apply(x as isize, |j| src[mirror_index(j, width)]);
        }
    });
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = ky.apply(y as isize, |j| tmp[mirror_index(j, height) * width + x]);
        }
    });
    out
}
