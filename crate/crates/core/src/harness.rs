//! Reproducible denoising experiments: every (noise level, seed) pair is
//! denoised by each requested variant at its SURE-optimal parameters, and
//! output PSNRs are tabulated per variant and noise level.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{apply_filter, Variant};
use crate::image::GrayImage;
use crate::io::load_image;
use crate::metrics::{mse, psnr, psnr_from_mse, DEFAULT_PEAK};
use crate::noise::{add_awgn, NoiseSpec, GAUSSIAN_SAMPLER, PRNG_NAME};
use crate::sure::{log_space, sweep_with_field, SweepConfig, SweepGrid};
use crate::synth::{generate, SyntheticImageSpec};
use crate::tensor::{orientation_field, TensorConfig};

pub const RUNS_FILE: &str = "bench_runs.jsonl";
pub const TABLE_CSV_FILE: &str = "bench_table.csv";
pub const TABLE_MD_FILE: &str = "bench_table.md";
pub const SPEC_FILE: &str = "bench_spec.json";

/// Log-spaced axis `lo:hi:n`; with `relative` the bounds are multiples of
/// the noise sigma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub relative: bool,
}

impl AxisSpec {
    pub fn values(&self, sigma: f64) -> Vec<f64> {
        let k = if self.relative { sigma } else { 1.0 };
        log_space(self.lo * k, self.hi * k, self.n)
    }
}

impl FromStr for AxisSpec {
    type Err = Error;

    /// Parses `lo:hi:n` as an absolute axis.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::invalid(format!("expected lo:hi:n, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 || !(lo > 0.0) || !(hi >= lo) || (n > 1 && hi == lo) {
            return Err(bad());
        }
        Ok(AxisSpec {
            lo,
            hi,
            n,
            relative: false,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rho_d: AxisSpec,
    pub rho_r: AxisSpec,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rho_d: AxisSpec {
                lo: 0.5,
                hi: 5.0,
                n: 10,
                relative: false,
            },
            rho_r: AxisSpec {
                lo: 0.5,
                hi: 5.0,
                n: 10,
                relative: true,
            },
        }
    }
}

impl GridSpec {
    pub fn grid(&self, sigma: f64) -> Result<SweepGrid> {
        SweepGrid::new(self.rho_d.values(sigma), self.rho_r.values(sigma))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    File(PathBuf),
    Synthetic(SyntheticImageSpec),
}

impl ImageSource {
    pub fn load(&self) -> Result<GrayImage> {
        match self {
            ImageSource::File(p) => load_image(p),
            ImageSource::Synthetic(s) => generate(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub source: ImageSource,
    pub sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub grid: GridSpec,
    pub tensor: TensorConfig,
    pub window_radius: Option<usize>,
    pub peak: f64,
}

impl ExperimentSpec {
    /// Fringe benchmark at the five standard noise levels.
    pub fn standard(source: ImageSource, seeds: Vec<u64>) -> Self {
        Self {
            source,
            sigmas: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            seeds,
            variants: Variant::ALL.to_vec(),
            grid: GridSpec::default(),
            tensor: TensorConfig::default(),
            window_radius: None,
            peak: DEFAULT_PEAK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.seeds.is_empty() || self.variants.is_empty() {
            return Err(Error::invalid("sigma, seed and variant lists must be non-empty"));
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("noise levels must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one (variant, sigma, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub sigma: f64,
    pub seed: u64,
    pub input_psnr: f64,
    pub output_psnr: f64,
    pub output_mse: f64,
    pub best_rho_d: f64,
    pub best_rho_r: f64,
    pub best_sure: f64,
}

/// Mean and sample standard deviation over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub variant: Variant,
    pub sigma: f64,
    pub input_psnr_mean: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<BenchCell>,
}

pub fn run_bench(spec: &ExperimentSpec) -> Result<BenchResult> {
    spec.validate()?;
    let clean = spec.source.load()?;
    run_bench_on(spec, &clean)
}

pub fn run_bench_on(spec: &ExperimentSpec, clean: &GrayImage) -> Result<BenchResult> {
    spec.validate()?;
    let mut runs = Vec::new();
    for &sigma in &spec.sigmas {
        let grid = spec.grid.grid(sigma)?;
        for &seed in &spec.seeds {
            let noisy = add_awgn(clean, NoiseSpec::new(sigma, seed)?)?;
            let input_psnr = psnr(&noisy, clean, spec.peak)?;
            let field = if spec.variants.iter().any(|v| v.needs_field()) {
                Some(orientation_field(&noisy, &spec.tensor)?)
            } else {
                None
            };
            for &variant in &spec.variants {
                let cfg = SweepConfig {
                    variant,
                    grid: grid.clone(),
                    tensor: spec.tensor,
                    window_radius: spec.window_radius,
                };
                let field = field.as_ref().filter(|_| variant.needs_field());
                let report = sweep_with_field(&noisy, sigma, &cfg, field, None)?;
                let (rho_d, rho_r) = report.best_params;
                let out = apply_filter(&noisy, &cfg.params(rho_d, rho_r), field)?;
                let output_mse = mse(&out, clean)?;
                runs.push(RunRecord {
                    variant,
                    sigma,
                    seed,
                    input_psnr,
                    output_psnr: psnr_from_mse(output_mse, spec.peak),
                    output_mse,
                    best_rho_d: rho_d,
                    best_rho_r: rho_r,
                    best_sure: report.best_sure(),
                });
            }
        }
    }
    let cells = summarize(&runs);
    Ok(BenchResult { runs, cells })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Groups runs by (variant, sigma), in variant order then ascending sigma.
pub fn summarize(runs: &[RunRecord]) -> Vec<BenchCell> {
    let mut groups: BTreeMap<(Variant, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.variant, r.sigma.to_bits())).or_default().push(r);
    }
    let mut cells: Vec<BenchCell> = groups
        .into_values()
        .map(|rs| {
            let input: Vec<f64> = rs.iter().map(|r| r.input_psnr).collect();
            let output: Vec<f64> = rs.iter().map(|r| r.output_psnr).collect();
            let (psnr_mean, psnr_std) = mean_std(&output);
            BenchCell {
                variant: rs[0].variant,
                sigma: rs[0].sigma,
                input_psnr_mean: mean_std(&input).0,
                psnr_mean,
                psnr_std,
                runs: rs.len(),
            }
        })
        .collect();
    cells.sort_by(|a, b| a.variant.cmp(&b.variant).then(a.sigma.total_cmp(&b.sigma)));
    cells
}

impl BenchResult {
    pub fn cell(&self, variant: Variant, sigma: f64) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.variant == variant && c.sigma == sigma)
    }

    pub fn runs_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.runs {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("variant,sigma,input_psnr_mean,psnr_mean,psnr_std,runs\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4},{}",
                c.variant, c.sigma, c.input_psnr_mean, c.psnr_mean, c.psnr_std, c.runs
            );
        }
        out
    }

    /// Variants as rows, noise levels as columns.
    pub fn table_markdown(&self) -> String {
        let mut sigmas: Vec<f64> = self.cells.iter().map(|c| c.sigma).collect();
        sigmas.sort_by(f64::total_cmp);
        sigmas.dedup();
        let mut variants: Vec<Variant> = self.cells.iter().map(|c| c.variant).collect();
        variants.dedup();

        let mut out = String::from("| |");
        for s in &sigmas {
            let _ = write!(out, " sigma {s} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(sigmas.len()));
        out.push_str("\n| Input PSNR |");
        for &s in &sigmas {
            let input = self.cells.iter().find(|c| c.sigma == s).map(|c| c.input_psnr_mean);
            let _ = write!(out, " {} |", input.map_or("-".into(), |v| format!("{v:.2}")));
        }
        out.push('\n');
        for v in variants {
            let _ = write!(out, "| {} |", v.name().to_uppercase());
            for &s in &sigmas {
                match self.cell(v, s) {
                    Some(c) => {
                        let _ = write!(out, " {:.2} ± {:.2} |", c.psnr_mean, c.psnr_std);
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes runs, tables and the experiment description into `dir`.
    pub fn write(&self, dir: &Path, spec: &ExperimentSpec, config: Option<&BTreeMap<String, String>>) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        #[derive(Serialize)]
        struct SpecDoc<'a> {
            experiment: &'a ExperimentSpec,
            prng: &'a str,
            gaussian_sampler: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            config: Option<&'a BTreeMap<String, String>>,
        }
        let doc = SpecDoc {
            experiment: spec,
            prng: PRNG_NAME,
            gaussian_sampler: GAUSSIAN_SAMPLER,
            config,
        };
        let files = [
            (RUNS_FILE, self.runs_jsonl()?),
            (TABLE_CSV_FILE, self.table_csv()),
            (TABLE_MD_FILE, self.table_markdown()),
            (SPEC_FILE, serde_json::to_string_pretty(&doc)? + "\n"),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Reads a runs log written by [`BenchResult::write`].
pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::invalid(format!("config line {}: empty key", lineno + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}
