//! `dbf`: command-line front end for the bilateral filter toolkit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use dbf_core::filters::Variant;
use dbf_core::harness::AxisSpec;
use dbf_core::synth::SyntheticKind;
use dbf_core::tensor::{ThetaFormula, DEFAULT_RHO, DEFAULT_SIGMA_G};

#[derive(Parser, Debug)]
#[command(
    name = "dbf",
    version,
    about = "Directional bilateral filtering with SURE parameter selection"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` file supplying defaults for any long flag; explicit
    /// flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic test image.
    Gen(GenArgs),
    /// Add white Gaussian noise (unclamped until the file is written).
    AddNoise(AddNoiseArgs),
    /// Filter an image at fixed or SURE-selected parameters.
    Denoise(DenoiseArgs),
    /// Evaluate SURE (and MSE with --clean) over a parameter grid.
    Sweep(SweepArgs),
    /// Print PSNR and MSE between two images.
    Eval(EvalArgs),
    /// Write orientation and coherence maps.
    Tensor(TensorArgs),
    /// Compare the filter variants over noise levels and seeds.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct SynthArgs {
    #[arg(long, default_value = "oriented-fringe")]
    kind: SyntheticKind,
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Direction of intensity variation, degrees from +x towards +y.
    #[arg(long, default_value_t = 120.0)]
    angle: f64,
    #[arg(long, default_value_t = 8.0)]
    period: f64,
    #[arg(long, default_value_t = 100.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 128.0)]
    offset: f64,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AddNoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct TensorFlags {
    /// Gradient scale.
    #[arg(long, default_value_t = DEFAULT_SIGMA_G)]
    sigma_g: f64,
    /// Tensor smoothing scale.
    #[arg(long, default_value_t = DEFAULT_RHO)]
    rho_tensor: f64,
    #[arg(long, default_value = "eigen")]
    theta_formula: ThetaFormula,
}

#[derive(Args, Debug, Clone)]
struct GridFlags {
    /// Domain-scale axis `lo:hi:n` (log-spaced); default 0.5:5:10.
    #[arg(long, value_name = "LO:HI:N")]
    grid_d: Option<AxisSpec>,
    /// Range-scale axis `lo:hi:n` in intensity units; default 0.5σ:5σ:10.
    #[arg(long, value_name = "LO:HI:N")]
    grid_r: Option<AxisSpec>,
}

#[derive(Args, Debug, Clone)]
struct NoiseLevel {
    /// Noise standard deviation in intensity units.
    #[arg(long, required_unless_present = "estimate_sigma")]
    sigma: Option<f64>,
    /// Estimate sigma from the image (median of absolute differences).
    #[arg(long, conflicts_with = "sigma")]
    estimate_sigma: bool,
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "dbf")]
    filter: Variant,
    #[command(flatten)]
    noise: NoiseLevel,
    /// Domain scale (σ_d for GBF, ρ_d otherwise).
    #[arg(long, required_unless_present = "auto")]
    rho_d: Option<f64>,
    /// Range scale (σ_r for GBF, ρ_r for DBF; unused by ADF).
    #[arg(long)]
    rho_r: Option<f64>,
    /// Choose the scales by minimizing SURE over the grid.
    #[arg(long)]
    auto: bool,
    /// Window radius; defaults to the scale-dependent radius.
    #[arg(long)]
    window: Option<usize>,
    #[command(flatten)]
    tensor: TensorFlags,
    #[command(flatten)]
    grid: GridFlags,
    /// Clean reference; adds MSE and PSNR to the report.
    #[arg(long)]
    clean: Option<PathBuf>,
    #[arg(long, default_value_t = dbf_core::metrics::DEFAULT_PEAK)]
    peak: f64,
    /// Seed recorded in the report for provenance.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Report JSON path; defaults to the output path with a .json extension.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "dbf")]
    filter: Variant,
    #[command(flatten)]
    noise: NoiseLevel,
    #[arg(long)]
    window: Option<usize>,
    #[command(flatten)]
    tensor: TensorFlags,
    #[command(flatten)]
    grid: GridFlags,
    #[arg(long)]
    clean: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Surface CSV; the JSON sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = dbf_core::metrics::DEFAULT_PEAK)]
    peak: f64,
}

#[derive(Args, Debug)]
struct TensorArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    tensor: TensorFlags,
    /// Output directory for theta.pgm, coherence.pgm and tensor.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Clean image; a synthetic image is generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 30.0, 40.0, 50.0])]
    sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = Variant::ALL)]
    filters: Vec<Variant>,
    #[arg(long)]
    window: Option<usize>,
    #[command(flatten)]
    tensor: TensorFlags,
    #[command(flatten)]
    grid: GridFlags,
    #[arg(long, default_value_t = dbf_core::metrics::DEFAULT_PEAK)]
    peak: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run() -> anyhow::Result<()> {
    let raw: Vec<String> = std::env::args().collect();
    let (argv, config) = config::expand(&Cli::command(), raw)?;
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            e.print()?;
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            anyhow::bail!("{}", text.trim_end().trim_start_matches("error: "))
        }
    };
    let cli = Cli::from_arg_matches(&matches)?;
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let ctx = commands::Context { config };
    match cli.command {
        Command::Gen(a) => commands::gen(&ctx, a),
        Command::AddNoise(a) => commands::add_noise(&ctx, a),
        Command::Denoise(a) => commands::denoise(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Tensor(a) => commands::tensor(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
    }
}
