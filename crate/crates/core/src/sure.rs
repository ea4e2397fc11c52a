//! Stein's unbiased risk estimate for the bilateral family and the grid
//! search that minimizes it.
//!
//! The divergence `sum_p d x_p / d y_p` is computed analytically with the
//! orientation field and domain weights held fixed. Under reflect-101
//! boundaries a window sample may be a mirrored copy of `p` itself; such
//! samples contribute their weight to the numerator exactly like the centre
//! sample does.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fastexp::exp_neg_scaled;
use crate::filters::{apply_filter, default_window_radius, quad_forms, Engine, FilterParams, QuadForm, Variant};
use crate::image::{mirror_index, GrayImage};
use crate::metrics::sum_sq_diff;
use crate::noise::{GAUSSIAN_SAMPLER, PRNG_NAME};
use crate::tensor::{orientation_field, OrientationField, TensorConfig};

/// Filters `y` and returns the analytic divergence alongside the estimate.
pub fn filter_with_divergence(
    y: &GrayImage,
    params: &FilterParams,
    field: Option<&OrientationField>,
) -> Result<(GrayImage, f64)> {
    let engine = Engine::new(y, params, field)?;
    let range = params.variant.has_range_kernel().then_some(params.range_scale);
    let per_pixel = engine.map_rows(|x, yy| {
        let sums = engine.sums(x, yy);
        (sums.estimate(y.get(x, yy)), sums.derivative(range))
    });
    let div = per_pixel.iter().map(|(_, d)| d).sum();
    let pixels = per_pixel.into_iter().map(|(v, _)| v).collect();
    Ok((GrayImage::new(y.width(), y.height(), pixels)?, div))
}

/// `(1/N) |x - y|^2 + (2 sigma^2 / N) div - sigma^2`.
pub fn sure(y: &GrayImage, estimate: &GrayImage, div: f64, sigma: f64) -> Result<f64> {
    y.check_same_shape(estimate)?;
    check_sigma(sigma)?;
    let n = y.len() as f64;
    Ok(sure_from_parts(
        sum_sq_diff(estimate.pixels(), y.pixels()),
        div,
        n,
        sigma,
    ))
}

fn sure_from_parts(residual: f64, div: f64, n: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    residual / n + 2.0 * s2 * (div / n) - s2
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise sigma must be positive, got {sigma}")))
    }
}

/// Robust noise estimate from horizontal first differences:
/// `median(|d|) / 0.6745 / sqrt(2)`.
pub fn estimate_sigma(y: &GrayImage) -> Result<f64> {
    let w = y.width();
    if w < 2 {
        return Err(Error::invalid("sigma estimation needs at least two columns"));
    }
    let mut diffs: Vec<f64> = y
        .pixels()
        .chunks(w)
        .flat_map(|row| row.windows(2).map(|p| (p[1] - p[0]).abs()))
        .collect();
    diffs.sort_by(f64::total_cmp);
    let mid = diffs.len() / 2;
    let median = if diffs.len().is_multiple_of(2) {
        0.5 * (diffs[mid - 1] + diffs[mid])
    } else {
        diffs[mid]
    };
    let sigma = median / 0.6745 / std::f64::consts::SQRT_2;
    check_sigma(sigma).map(|_| sigma)
}

/// Candidate `(rho_d, rho_r)` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub rho_d_values: Vec<f64>,
    pub rho_r_values: Vec<f64>,
}

impl SweepGrid {
    pub fn new(rho_d_values: Vec<f64>, rho_r_values: Vec<f64>) -> Result<Self> {
        let grid = Self {
            rho_d_values,
            rho_r_values,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, vals) in [("rho_d", &self.rho_d_values), ("rho_r", &self.rho_r_values)] {
            if vals.is_empty() {
                return Err(Error::invalid(format!("{name} grid is empty")));
            }
            if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::invalid(format!("{name} grid values must be positive")));
            }
            if vals.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("{name} grid must be strictly ascending")));
            }
        }
        Ok(())
    }

    /// 10 x 10 log-spaced grid: `rho_d` in [0.5, 5] px, `rho_r` in
    /// [0.5 sigma, 5 sigma].
    pub fn default_for_sigma(sigma: f64) -> Self {
        Self {
            rho_d_values: log_space(0.5, 5.0, 10),
            rho_r_values: log_space(0.5 * sigma, 5.0 * sigma, 10),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rho_d_values.len(), self.rho_r_values.len())
    }
}

/// `n` log-spaced points from `lo` to `hi`, endpoints exact.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// Everything the sweep needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub variant: Variant,
    pub grid: SweepGrid,
    pub tensor: TensorConfig,
    /// Fixed window radius; `None` picks the default per `rho_d`.
    pub window_radius: Option<usize>,
}

impl SweepConfig {
    pub fn params(&self, rho_d: f64, rho_r: f64) -> FilterParams {
        let p = FilterParams::new(self.variant, rho_d, rho_r);
        match self.window_radius {
            Some(r) => p.with_window(r),
            None => p,
        }
    }

    fn radius_for(&self, rho_d: f64) -> usize {
        self.window_radius
            .unwrap_or_else(|| default_window_radius(self.variant, rho_d))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub variant: Variant,
    pub tensor: TensorConfig,
    pub window_radius: Option<usize>,
    pub sigma_estimated: bool,
    pub seed: Option<u64>,
    pub prng: String,
    pub gaussian_sampler: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<std::collections::BTreeMap<String, String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: SweepGrid,
    /// `sure_surface[i][j]` for `(rho_d_values[i], rho_r_values[j])`.
    pub sure_surface: Vec<Vec<f64>>,
    pub mse_surface: Option<Vec<Vec<f64>>>,
    /// Grid indices of the SURE minimum.
    pub best_index: (usize, usize),
    pub best_params: (f64, f64),
    pub sigma: f64,
    pub metadata: SweepMetadata,
}

/// Argmin with ties broken towards the smallest `rho_d`, then `rho_r`.
pub fn argmin_surface(surface: &[Vec<f64>]) -> Option<(usize, usize)> {
    surface
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (v, i, j)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
        .map(|(_, i, j)| (i, j))
}

impl SweepReport {
    pub fn mse_argmin(&self) -> Option<(usize, usize)> {
        self.mse_surface.as_deref().and_then(argmin_surface)
    }

    pub fn best_sure(&self) -> f64 {
        self.sure_surface[self.best_index.0][self.best_index.1]
    }

    /// `rho_d,rho_r,sure[,mse]`, rows in `rho_d`-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.mse_surface.is_some() {
            "rho_d,rho_r,sure,mse\n"
        } else {
            "rho_d,rho_r,sure\n"
        });
        for (i, d) in self.grid.rho_d_values.iter().enumerate() {
            for (j, r) in self.grid.rho_r_values.iter().enumerate() {
                let _ = write!(out, "{d},{r},{}", self.sure_surface[i][j]);
                if let Some(m) = &self.mse_surface {
                    let _ = write!(out, ",{}", m[i][j]);
                }
                out.push('\n');
            }
        }
        out
    }

    /// JSON sidecar: best parameters, sigma and provenance.
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            best_rho_d: f64,
            best_rho_r: f64,
            best_sure: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            best_mse: Option<f64>,
            sigma: f64,
            #[serde(flatten)]
            metadata: &'a SweepMetadata,
            grid: &'a SweepGrid,
        }
        let best_mse = self
            .mse_surface
            .as_ref()
            .map(|m| m[self.best_index.0][self.best_index.1]);
        let car = Sidecar {
            best_rho_d: self.best_params.0,
            best_rho_r: self.best_params.1,
            best_sure: self.best_sure(),
            best_mse,
            sigma: self.sigma,
            metadata: &self.metadata,
            grid: &self.grid,
        };
        Ok(serde_json::to_string_pretty(&car)?)
    }
}

/// Per-cell sums collected over all pixels.
#[derive(Clone, Debug)]
struct CellTotals {
    residual: Vec<f64>,
    div: Vec<f64>,
    clean_err: Vec<f64>,
}

impl CellTotals {
    fn zeros(n: usize) -> Self {
        Self {
            residual: vec![0.0; n],
            div: vec![0.0; n],
            clean_err: vec![0.0; n],
        }
    }

    fn add(&mut self, other: &CellTotals) {
        for (a, b) in [
            (&mut self.residual, &other.residual),
            (&mut self.div, &other.div),
            (&mut self.clean_err, &other.clean_err),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Evaluates SURE (and MSE against `clean`, when given) for every grid cell
/// with a frozen orientation field computed once from `y`.
pub fn sweep(y: &GrayImage, sigma: f64, cfg: &SweepConfig, clean: Option<&GrayImage>) -> Result<SweepReport> {
    check_sigma(sigma)?;
    cfg.grid.validate()?;
    if let Some(c) = clean {
        y.check_same_shape(c)?;
    }
    let field = if cfg.variant.needs_field() {
        Some(orientation_field(y, &cfg.tensor)?)
    } else {
        None
    };
    sweep_with_field(y, sigma, cfg, field.as_ref(), clean)
}

/// [`sweep`] with a caller-supplied orientation field.
pub fn sweep_with_field(
    y: &GrayImage,
    sigma: f64,
    cfg: &SweepConfig,
    field: Option<&OrientationField>,
    clean: Option<&GrayImage>,
) -> Result<SweepReport> {
    check_sigma(sigma)?;
    cfg.grid.validate()?;
    if let Some(c) = clean {
        y.check_same_shape(c)?;
    }
    let forms = quad_forms(y, cfg.variant, field)?;
    let (nd, nr) = cfg.grid.shape();
    let kernel = FusedKernel::new(y, clean, &forms, cfg);
    let rows: Vec<CellTotals> = (0..y.height()).into_par_iter().map(|row| kernel.row(row)).collect();
    let mut totals = CellTotals::zeros(nd * kernel.range_cols);
    for r in &rows {
        totals.add(r);
    }

    let n = y.len() as f64;
    let range_cols = kernel.range_cols;
    let cell = |i: usize, j: usize| i * range_cols + if range_cols == 1 { 0 } else { j };
    let sure_surface: Vec<Vec<f64>> = (0..nd)
        .map(|i| {
            (0..nr)
                .map(|j| {
                    let k = cell(i, j);
                    sure_from_parts(totals.residual[k], totals.div[k], n, sigma)
                })
                .collect()
        })
        .collect();
    let mse_surface = clean.map(|_| {
        (0..nd)
            .map(|i| (0..nr).map(|j| totals.clean_err[cell(i, j)] / n).collect())
            .collect()
    });
    let best_index = argmin_surface(&sure_surface).expect("non-empty grid");
    Ok(SweepReport {
        best_params: (cfg.grid.rho_d_values[best_index.0], cfg.grid.rho_r_values[best_index.1]),
        grid: cfg.grid.clone(),
        sure_surface,
        mse_surface,
        best_index,
        sigma,
        metadata: SweepMetadata {
            variant: cfg.variant,
            tensor: cfg.tensor,
            window_radius: cfg.window_radius,
            sigma_estimated: false,
            seed: None,
            prng: PRNG_NAME.to_string(),
            gaussian_sampler: GAUSSIAN_SAMPLER.to_string(),
            config: None,
        },
    })
}

/// Evaluates every grid cell in one pass per pixel. Window offsets are
/// ordered by ring (Chebyshev radius) so that each `rho_d` window is a
/// prefix; range weights are shared across `rho_d` and domain weights
/// across `rho_r`.
struct FusedKernel<'a> {
    y: &'a GrayImage,
    clean: Option<&'a GrayImage>,
    forms: &'a [QuadForm],
    offsets: Vec<(isize, isize)>,
    /// Window length (in ring order) for each `rho_d`.
    prefix: Vec<usize>,
    inv_two_d2: Vec<f64>,
    /// `1 / (2 rho_r^2)`; empty for ADF.
    inv_two_r2: Vec<f64>,
    rho_r2: Vec<f64>,
    range_cols: usize,
    /// Isotropic domain weights, shared by all pixels (GBF only).
    fixed_domain: Option<Vec<Vec<f64>>>,
    max_r: usize,
}

struct Scratch {
    d: Vec<f64>,
    d2: Vec<f64>,
    q: Vec<f64>,
    dom: Vec<f64>,
    rng: Vec<f64>,
    selfs: Vec<usize>,
}

impl<'a> FusedKernel<'a> {
    fn new(y: &'a GrayImage, clean: Option<&'a GrayImage>, forms: &'a [QuadForm], cfg: &SweepConfig) -> Self {
        let radii: Vec<usize> = cfg.grid.rho_d_values.iter().map(|&d| cfg.radius_for(d)).collect();
        let max_r = radii.iter().copied().max().unwrap_or(0);
        let r = max_r as isize;
        let mut offsets: Vec<(isize, isize)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
        offsets.sort_by_key(|&(dx, dy)| (dx.abs().max(dy.abs()), dy, dx));
        let prefix = radii.iter().map(|&r| (2 * r + 1) * (2 * r + 1)).collect();
        let inv_two_d2: Vec<f64> = cfg.grid.rho_d_values.iter().map(|d| 1.0 / (2.0 * d * d)).collect();
        let has_range = cfg.variant.has_range_kernel();
        let inv_two_r2 = if has_range {
            cfg.grid.rho_r_values.iter().map(|r| 1.0 / (2.0 * r * r)).collect()
        } else {
            Vec::new()
        };
        let fixed_domain = (!cfg.variant.needs_field()).then(|| {
            let q: Vec<f64> = offsets
                .iter()
                .map(|&(dx, dy)| QuadForm::ISOTROPIC.eval(dx as f64, dy as f64))
                .collect();
            inv_two_d2
                .iter()
                .map(|&f| {
                    let mut out = vec![0.0; q.len()];
                    exp_neg_scaled(&q, f, &mut out);
                    out
                })
                .collect()
        });
        Self {
            y,
            clean,
            forms,
            offsets,
            prefix,
            inv_two_d2,
            inv_two_r2,
            rho_r2: cfg.grid.rho_r_values.iter().map(|r| r * r).collect(),
            range_cols: if has_range { cfg.grid.rho_r_values.len() } else { 1 },
            fixed_domain,
            max_r,
        }
    }

    fn row(&self, y: usize) -> CellTotals {
        let (w, h) = (self.y.width(), self.y.height());
        let px = self.y.pixels();
        let nd = self.inv_two_d2.len();
        let n_off = self.offsets.len();
        let nk = self.inv_two_r2.len();
        let mut totals = CellTotals::zeros(nd * self.range_cols);
        let mut s = Scratch {
            d: vec![0.0; n_off],
            d2: vec![0.0; n_off],
            q: vec![0.0; n_off],
            dom: vec![0.0; n_off],
            rng: vec![0.0; n_off * nk],
            selfs: Vec::new(),
        };
        let r = self.max_r;
        let interior_y = y >= r && y + r < h;

        for x in 0..w {
            let p = y * w + x;
            let yp = px[p];
            let interior = interior_y && x >= r && x + r < w;
            s.selfs.clear();
            for (o, &(dx, dy)) in self.offsets.iter().enumerate() {
                let src = if interior {
                    (p as isize + dy * w as isize + dx) as usize
                } else {
                    mirror_index(y as isize + dy, h) * w + mirror_index(x as isize + dx, w)
                };
                let d = px[src] - yp;
                s.d[o] = d;
                s.d2[o] = d * d;
                if src == p {
                    s.selfs.push(o);
                }
            }
            if self.fixed_domain.is_none() {
                let form = self.forms[p];
                for (q, &(dx, dy)) in s.q.iter_mut().zip(&self.offsets) {
                    *q = form.eval(dx as f64, dy as f64);
                }
            }
            for (k, &f) in self.inv_two_r2.iter().enumerate() {
                exp_neg_scaled(&s.d2, f, &mut s.rng[k * n_off..(k + 1) * n_off]);
            }
            let clean_v = self.clean.map(|c| c.pixels()[p]);

            for jd in 0..nd {
                let len = self.prefix[jd];
                let dom: &[f64] = match &self.fixed_domain {
                    Some(tables) => &tables[jd][..len],
                    None => {
                        exp_neg_scaled(&s.q[..len], self.inv_two_d2[jd], &mut s.dom[..len]);
                        &s.dom[..len]
                    }
                };
                // Mirrored copies of p have zero intensity difference, hence
                // unit range weight.
                let self_w: f64 = s.selfs.iter().filter(|&&o| o < len).map(|&o| dom[o]).sum();
                for kc in 0..self.range_cols {
                    let (hh, t, deriv) = if nk == 0 {
                        let (hh, t) = moments2(dom, &s.d[..len]);
                        (hh, t, self_w)
                    } else {
                        let rng = &s.rng[kc * n_off..kc * n_off + len];
                        let (hh, t, v) = moments3(dom, rng, &s.d[..len], &s.d2[..len]);
                        (hh, t, self_w + (v - t * t / hh) / self.rho_r2[kc])
                    };
                    let c = jd * self.range_cols + kc;
                    let est = yp + t / hh;
                    totals.div[c] += deriv / hh;
                    totals.residual[c] += (est - yp) * (est - yp);
                    if let Some(cv) = clean_v {
                        totals.clean_err[c] += (est - cv) * (est - cv);
                    }
                }
            }
        }
        totals
    }
}

const LANES: usize = 4;

/// `(sum w, sum w d)`.
#[inline]
fn moments2(w: &[f64], d: &[f64]) -> (f64, f64) {
    let mut h = [0.0; LANES];
    let mut t = [0.0; LANES];
    let split = w.len() - w.len() % LANES;
    for (wc, dc) in w[..split].chunks_exact(LANES).zip(d[..split].chunks_exact(LANES)) {
        for l in 0..LANES {
            h[l] += wc[l];
            t[l] += wc[l] * dc[l];
        }
    }
    let (mut hs, mut ts) = (h.iter().sum::<f64>(), t.iter().sum::<f64>());
    for i in split..w.len() {
        hs += w[i];
        ts += w[i] * d[i];
    }
    (hs, ts)
}

/// `(sum a b, sum a b d, sum a b d2)`.
#[inline]
fn moments3(a: &[f64], b: &[f64], d: &[f64], d2: &[f64]) -> (f64, f64, f64) {
    let mut h = [0.0; LANES];
    let mut t = [0.0; LANES];
    let mut v = [0.0; LANES];
    let split = a.len() - a.len() % LANES;
    let chunks = a[..split]
        .chunks_exact(LANES)
        .zip(b[..split].chunks_exact(LANES))
        .zip(d[..split].chunks_exact(LANES).zip(d2[..split].chunks_exact(LANES)));
    for ((ac, bc), (dc, d2c)) in chunks {
        for l in 0..LANES {
            let wgt = ac[l] * bc[l];
            h[l] += wgt;
            t[l] += wgt * dc[l];
            v[l] += wgt * d2c[l];
        }
    }
    let (mut hs, mut ts, mut vs) = (h.iter().sum::<f64>(), t.iter().sum::<f64>(), v.iter().sum::<f64>());
    for i in split..a.len() {
        let wgt = a[i] * b[i];
        hs += wgt;
        ts += wgt * d[i];
        vs += wgt * d2[i];
    }
    (hs, ts, vs)
}

/// Sweeps the grid, then filters `y` at the SURE-optimal cell.
pub fn denoise_auto(y: &GrayImage, sigma: f64, cfg: &SweepConfig) -> Result<(GrayImage, SweepReport)> {
    denoise_auto_with_clean(y, sigma, cfg, None)
}

pub fn denoise_auto_with_clean(
    y: &GrayImage,
    sigma: f64,
    cfg: &SweepConfig,
    clean: Option<&GrayImage>,
) -> Result<(GrayImage, SweepReport)> {
    let field = if cfg.variant.needs_field() {
        Some(orientation_field(y, &cfg.tensor)?)
    } else {
        None
    };
    let report = sweep_with_field(y, sigma, cfg, field.as_ref(), clean)?;
    let (rho_d, rho_r) = report.best_params;
    let out = apply_filter(y, &cfg.params(rho_d, rho_r), field.as_ref())?;
    Ok((out, report))
}
