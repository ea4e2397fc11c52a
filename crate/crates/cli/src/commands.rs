use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context as _};
use dbf_core::filters::{FilterParams, Variant};
use dbf_core::harness::{run_bench, AxisSpec, ExperimentSpec, GridSpec, ImageSource};
use dbf_core::io::{load_image, save_image};
use dbf_core::metrics::{format_db, mse, psnr, psnr_from_mse};
use dbf_core::noise::{GAUSSIAN_SAMPLER, PRNG_NAME};
use dbf_core::sure::{
    denoise_auto_with_clean, estimate_sigma, filter_with_divergence, sure, sweep as run_sweep, SweepConfig, SweepGrid,
    SweepReport,
};
use dbf_core::synth::{generate, SyntheticImageSpec};
use dbf_core::tensor::{orientation_field, tensor_and_field, FlatThreshold, TensorConfig};
use dbf_core::{add_awgn, GrayImage, NoiseSpec};
use serde_json::{json, Value};

use crate::{
    AddNoiseArgs, BenchArgs, DenoiseArgs, EvalArgs, GenArgs, GridFlags, NoiseLevel, SweepArgs, SynthArgs, TensorArgs,
    TensorFlags,
};

pub struct Context {
    /// Entries of the `--config` file, echoed into reports.
    pub config: Option<BTreeMap<String, String>>,
}

fn load(path: &Path) -> anyhow::Result<GrayImage> {
    load_image(path).with_context(|| format!("loading {}", path.display()))
}

fn save(img: &GrayImage, path: &Path) -> anyhow::Result<()> {
    ensure_parent(path)?;
    save_image(img, path).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, body: &str) -> anyhow::Result<()> {
    ensure_parent(path)?;
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
        }
        _ => Ok(()),
    }
}

fn synth_spec(a: &SynthArgs) -> SyntheticImageSpec {
    SyntheticImageSpec {
        kind: a.kind,
        width: a.size,
        height: a.size,
        angle_deg: a.angle,
        period: a.period,
        amplitude: a.amplitude,
        offset: a.offset,
    }
}

fn tensor_config(t: &TensorFlags) -> TensorConfig {
    TensorConfig {
        sigma_g: t.sigma_g,
        rho: t.rho_tensor,
        flat: FlatThreshold::default(),
        theta_formula: t.theta_formula,
    }
}

fn grid_spec(g: &GridFlags) -> GridSpec {
    let default = GridSpec::default();
    GridSpec {
        rho_d: g.grid_d.unwrap_or(default.rho_d),
        rho_r: g
            .grid_r
            .map(|a| AxisSpec { relative: false, ..a })
            .unwrap_or(default.rho_r),
    }
}

fn noise_sigma(y: &GrayImage, n: &NoiseLevel) -> anyhow::Result<(f64, bool)> {
    match n.sigma {
        Some(s) if !n.estimate_sigma => {
            ensure!(s.is_finite() && s > 0.0, "--sigma must be positive, got {s}");
            Ok((s, false))
        }
        _ => {
            let s = estimate_sigma(y)?;
            eprintln!("estimated sigma = {s:.4} (median absolute difference estimate)");
            Ok((s, true))
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn annotate(report: &mut SweepReport, ctx: &Context, sigma_estimated: bool, seed: Option<u64>) {
    report.metadata.sigma_estimated = sigma_estimated;
    report.metadata.seed = seed;
    report.metadata.config = ctx.config.clone();
}

pub fn gen(_ctx: &Context, a: GenArgs) -> anyhow::Result<()> {
    let img = generate(&synth_spec(&a.synth))?;
    save(&img, &a.out)
}

pub fn add_noise(_ctx: &Context, a: AddNoiseArgs) -> anyhow::Result<()> {
    let clean = load(&a.input)?;
    let noisy = add_awgn(&clean, NoiseSpec::new(a.sigma, a.seed)?)?;
    save(&noisy, &a.out)
}

pub fn denoise(ctx: &Context, a: DenoiseArgs) -> anyhow::Result<()> {
    let y = load(&a.input)?;
    let clean = a.clean.as_deref().map(load).transpose()?;
    let (sigma, sigma_estimated) = noise_sigma(&y, &a.noise)?;
    let tensor = tensor_config(&a.tensor);

    let (out, mut report) = if a.auto {
        let cfg = SweepConfig {
            variant: a.filter,
            grid: grid_spec(&a.grid).grid(sigma)?,
            tensor,
            window_radius: a.window,
        };
        let (out, mut sweep) = denoise_auto_with_clean(&y, sigma, &cfg, clean.as_ref())?;
        annotate(&mut sweep, ctx, sigma_estimated, a.seed);
        let (rho_d, rho_r) = sweep.best_params;
        let params = cfg.params(rho_d, rho_r);
        let sidecar: Value = serde_json::from_str(&sweep.sidecar_json()?)?;
        let report = json!({
            "mode": "auto",
            "params": params,
            "sure": sweep.best_sure(),
            "sweep": sidecar,
        });
        (out, report)
    } else {
        let rho_d = a.rho_d.context("--rho-d is required without --auto")?;
        let rho_r = match (a.rho_r, a.filter) {
            (Some(r), _) => r,
            // The range scale is unused by ADF.
            (None, Variant::Adf) => 1.0,
            (None, v) => anyhow::bail!("--rho-r is required for {v}"),
        };
        let mut params = FilterParams::new(a.filter, rho_d, rho_r);
        if let Some(w) = a.window {
            params = params.with_window(w);
        }
        let field = if a.filter.needs_field() {
            Some(orientation_field(&y, &tensor)?)
        } else {
            None
        };
        let (out, div) = filter_with_divergence(&y, &params, field.as_ref())?;
        let report = json!({
            "mode": "fixed",
            "params": params,
            "sure": sure(&y, &out, div, sigma)?,
            "divergence": div,
            "sigma": sigma,
            "sigma_estimated": sigma_estimated,
            "tensor": tensor,
            "seed": a.seed,
            "prng": PRNG_NAME,
            "gaussian_sampler": GAUSSIAN_SAMPLER,
            "config": ctx.config,
        });
        (out, report)
    };

    let mut line = format!(
        "filter={} rho_d={} rho_r={} window={} sure={}",
        a.filter,
        report["params"]["domain_scale"],
        report["params"]["range_scale"],
        report["params"]["window_radius"],
        report["sure"]
    );
    if let Some(c) = &clean {
        let out_mse = mse(&out, c)?;
        let input_psnr = psnr(&y, c, a.peak)?;
        let output_psnr = psnr_from_mse(out_mse, a.peak);
        report["mse"] = json!(out_mse);
        report["input_psnr_db"] = json!(format_db(input_psnr));
        report["output_psnr_db"] = json!(format_db(output_psnr));
        line.push_str(&format!(
            " input_psnr_db={} psnr_db={} mse={out_mse}",
            format_db(input_psnr),
            format_db(output_psnr)
        ));
    }
    save(&out, &a.out)?;
    let report_path = a.report.unwrap_or_else(|| sidecar_path(&a.out));
    write_text(&report_path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    println!("{line}");
    Ok(())
}

pub fn sweep(ctx: &Context, a: SweepArgs) -> anyhow::Result<()> {
    let y = load(&a.input)?;
    let clean = a.clean.as_deref().map(load).transpose()?;
    let (sigma, sigma_estimated) = noise_sigma(&y, &a.noise)?;
    let grid: SweepGrid = grid_spec(&a.grid).grid(sigma)?;
    let cfg = SweepConfig {
        variant: a.filter,
        grid,
        tensor: tensor_config(&a.tensor),
        window_radius: a.window,
    };
    let mut report = run_sweep(&y, sigma, &cfg, clean.as_ref())?;
    annotate(&mut report, ctx, sigma_estimated, a.seed);
    write_text(&a.out, &report.to_csv())?;
    write_text(&sidecar_path(&a.out), &(report.sidecar_json()? + "\n"))?;
    let (d, r) = report.best_params;
    println!("best rho_d={d} rho_r={r} sure={}", report.best_sure());
    Ok(())
}

pub fn eval(_ctx: &Context, a: EvalArgs) -> anyhow::Result<()> {
    let reference = load(&a.reference)?;
    let test = load(&a.test)?;
    let m = mse(&test, &reference)?;
    println!("psnr_db={} mse={m}", format_db(psnr_from_mse(m, a.peak)));
    Ok(())
}

pub fn tensor(_ctx: &Context, a: TensorArgs) -> anyhow::Result<()> {
    let img = load(&a.input)?;
    let (tensor, field) = tensor_and_field(&img, &tensor_config(&a.tensor))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save(&field.theta_map(), &a.out.join("theta.pgm"))?;
    save(&field.coherence_map(), &a.out.join("coherence.pgm"))?;
    write_text(&a.out.join("tensor.csv"), &tensor.to_csv())
}

pub fn bench(ctx: &Context, a: BenchArgs) -> anyhow::Result<()> {
    let source = match &a.input {
        Some(p) => ImageSource::File(p.clone()),
        None => ImageSource::Synthetic(synth_spec(&a.synth)),
    };
    let spec = ExperimentSpec {
        source,
        sigmas: a.sigmas,
        seeds: a.seeds,
        variants: a.filters,
        grid: grid_spec(&a.grid),
        tensor: tensor_config(&a.tensor),
        window_radius: a.window,
        peak: a.peak,
    };
    let result = run_bench(&spec)?;
    result.write(&a.out, &spec, ctx.config.as_ref())?;
    print!("{}", result.table_markdown());
    Ok(())
}
