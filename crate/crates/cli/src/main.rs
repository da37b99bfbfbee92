//! `qshs`: simulate undersampled k-space, reconstruct, tune, evaluate and
//! benchmark.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Overrides;

#[derive(Parser, Debug)]
#[command(name = "qshs", version, about = "Hessian-Schatten MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a mask and noisy k-space measurements from an image.
    Simulate(Flags),
    /// Reconstruct an image from k-space and a mask.
    Reconstruct(Flags),
    /// Golden-section search for rho against a ground truth, then reconstruct.
    Tune(Flags),
    /// Compare a reconstruction with a ground truth.
    Evaluate(Flags),
    /// Tune and run every method on every (image, mask) pair.
    Benchmark(Flags),
}

#[derive(clap::Args, Debug, Default)]
struct Flags {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth image (PGM, PNG, IMGF or `phantom:<name>[:<size>]`). Repeatable for benchmark.
    #[arg(long)]
    image: Vec<String>,
    /// KSP1 k-space file.
    #[arg(long)]
    kspace: Option<PathBuf>,
    /// Ground truth for metrics; alias of --image for reconstruct/tune/evaluate.
    #[arg(long)]
    truth: Option<String>,
    /// Reconstruction to evaluate.
    #[arg(long)]
    recon: Option<PathBuf>,
    /// Mask PGM path or generator spec `vd|radial|uniform:<density>[:<center>]`. Repeatable for benchmark.
    #[arg(long)]
    mask: Vec<String>,
    /// qshs, hs1, hs2 or tv1.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Shrinkage rule: decaying or growing.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Master seed for masks and noise.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<Flags> for (Option<PathBuf>, Overrides) {
    fn from(f: Flags) -> Self {
        (
            f.config,
            Overrides {
                images: f.image,
                kspace: f.kspace,
                truth: f.truth,
                recon: f.recon,
                masks: f.mask,
                method: f.method,
                q: f.q,
                rho: f.rho,
                beta: f.beta,
                iters: f.iters,
                tol: f.tol,
                rule: f.rule,
                sigma: f.sigma,
                seed: f.seed,
                out: f.out,
            },
        )
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, flags) = match cli.command {
        Command::Simulate(f) => ("simulate", f),
        Command::Reconstruct(f) => ("reconstruct", f),
        Command::Tune(f) => ("tune", f),
        Command::Evaluate(f) => ("evaluate", f),
        Command::Benchmark(f) => ("benchmark", f),
    };
    let (config, overrides) = flags.into();
    match commands::run(name, config.as_deref(), overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
