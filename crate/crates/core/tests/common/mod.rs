//! Brute-force reference evaluations shared by the integration suites.
//! Written independently of the library's filter engine: plain double loops,
//! explicit coordinate rotation, dense matrices.

#![allow(dead_code)]

use dbf_core::image::mirror_index;
use dbf_core::{FilterParams, GrayImage, OrientationField, Variant};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = (0..w * h).map(|_| rng.random_range(0.0..255.0)).collect();
    GrayImage::new(w, h, px).unwrap()
}

/// Unnormalized weight of neighbour `(qx, qy)` (unmirrored coordinates) for
/// centre `(px, py)`, evaluated from raw intensities.
fn weight(
    params: &FilterParams,
    field: Option<&OrientationField>,
    p: usize,
    dx: f64,
    dy: f64,
    yp: f64,
    yq: f64,
) -> f64 {
    let domain = match params.variant {
        Variant::Gbf => {
            let s = params.domain_scale;
            (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
        }
        Variant::Adf | Variant::Dbf => {
            let f = field.expect("field");
            let (theta, g1, g2) = (f.theta[p], f.gamma1[p], f.gamma2[p]);
            let m = dx * theta.cos() + dy * theta.sin();
            let n = -dx * theta.sin() + dy * theta.cos();
            let rho = params.domain_scale;
            (-(g1 * g1 * m * m + g2 * g2 * n * n) / (2.0 * rho * rho)).exp()
        }
    };
    let range = match params.variant {
        Variant::Adf => 1.0,
        _ => {
            let r = params.range_scale;
            (-((yp - yq) * (yp - yq)) / (2.0 * r * r)).exp()
        }
    };
    domain * range
}

/// Literal normalized weighted average over the mirrored window.
pub fn brute_filter(img: &GrayImage, params: &FilterParams, field: Option<&OrientationField>) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = params.window_radius as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let yp = img.get(x, y);
            let mut num = 0.0;
            let mut den = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let qx = mirror_index(x as isize + dx, w);
                    let qy = mirror_index(y as isize + dy, h);
                    let yq = img.get(qx, qy);
                    let phi = weight(params, field, p, dx as f64, dy as f64, yp, yq);
                    num += phi * yq;
                    den += phi;
                }
            }
            out[p] = num / den;
        }
    }
    GrayImage::new(w, h, out).unwrap()
}

/// Central finite-difference divergence, orientation field frozen.
pub fn fd_divergence(img: &GrayImage, params: &FilterParams, field: Option<&OrientationField>, step: f64) -> f64 {
    let mut total = 0.0;
    let base = img.pixels().to_vec();
    for p in 0..base.len() {
        let mut plus = base.clone();
        plus[p] += step;
        let mut minus = base.clone();
        minus[p] -= step;
        let fp = brute_filter(&GrayImage::new(img.width(), img.height(), plus).unwrap(), params, field);
        let fm = brute_filter(
            &GrayImage::new(img.width(), img.height(), minus).unwrap(),
            params,
            field,
        );
        total += (fp.pixels()[p] - fm.pixels()[p]) / (2.0 * step);
    }
    total
}

/// Row-stochastic smoothing matrix of a data-independent filter (ADF, or
/// any variant with the range kernel switched off), materialized densely.
pub fn linear_operator(img: &GrayImage, params: &FilterParams, field: Option<&OrientationField>) -> Vec<Vec<f64>> {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let r = params.window_radius as isize;
    let mut a = vec![vec![0.0; n]; n];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let mut row = vec![0.0; n];
            let mut den = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let q = mirror_index(y as isize + dy, h) * w + mirror_index(x as isize + dx, w);
                    let phi = weight(params, field, p, dx as f64, dy as f64, 0.0, 0.0);
                    row[q] += phi;
                    den += phi;
                }
            }
            a[p] = row.into_iter().map(|v| v / den).collect();
        }
    }
    a
}

pub fn trace(a: &[Vec<f64>]) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn max_abs_diff(a: &GrayImage, b: &GrayImage) -> f64 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
