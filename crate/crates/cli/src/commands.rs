use std::fs;
use std::path::{Path, PathBuf};

use qshs_core::io::{
    read_image, read_kspace, read_mask, write_imgf, write_kspace, write_mask, write_pgm16,
};
use qshs_core::phantom::phantom_by_name;
use qshs_core::tune::{golden_section_tune, TuneObjective, TuneResult, TuneSpec};
use qshs_core::{
    make_mask, mse, simulate_measurement, solve, ssim, Image, KSpace, Mask,
    Method, ReconResult, SolverConfig, SsimParams,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, MaskSource};
use crate::error::{csv_err, io_err, CliError};

/// Command-line values that override the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub images: Vec<String>,
    pub kspace: Option<PathBuf>,
    pub truth: Option<String>,
    pub recon: Option<PathBuf>,
    pub masks: Vec<String>,
    pub method: Option<String>,
    pub q: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub iters: Option<usize>,
    pub tol: Option<f64>,
    pub rule: Option<String>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

struct Context {
    cfg: ExperimentConfig,
    recon_path: Option<PathBuf>,
}

fn parse<T: std::str::FromStr<Err = qshs_core::Error>>(s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(CliError::from)
}

fn resolve(config: Option<&Path>, o: Overrides) -> Result<Context, CliError> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if o.seed.is_some() {
        cfg.seed = o.seed;
    }
    let mask_seed = cfg.seed.unwrap_or(0);
    if let Some(first) = o.images.first() {
        cfg.image_path = Some(first.clone());
        cfg.images = o.images.clone();
    }
    if let Some(t) = o.truth {
        cfg.image_path = Some(t);
    }
    if o.kspace.is_some() {
        cfg.kspace_path = o.kspace;
    }
    if !o.masks.is_empty() {
        let parsed: Vec<MaskSource> = o.masks.iter().map(|m| MaskSource::parse(m, mask_seed)).collect();
        cfg.mask = parsed.first().cloned();
        cfg.masks = parsed;
    }
    let s = &mut cfg.solver;
    if let Some(m) = &o.method {
        s.method = parse::<Method>(m)?;
    }
    if let Some(r) = &o.rule {
        s.shrink_rule = parse(r)?;
    }
    if let Some(q) = o.q {
        s.q = q;
    }
    if let Some(rho) = o.rho {
        s.rho = rho;
    }
    if o.beta.is_some() {
        s.beta = o.beta;
    }
    if let Some(it) = o.iters {
        s.max_iters = it;
    }
    if let Some(tol) = o.tol {
        s.primal_tol = tol;
    }
    if let Some(sigma) = o.sigma {
        cfg.noise.sigma = sigma;
    }
    if let Some(out) = o.out {
        cfg.output_dir = out;
    }
    cfg.apply_master_seed();
    cfg.solver.validate()?;
    cfg.ssim.validate()?;
    Ok(Context {
        cfg,
        recon_path: o.recon,
    })
}

pub fn run(command: &str, config: Option<&Path>, overrides: Overrides) -> Result<(), CliError> {
    let ctx = resolve(config, overrides)?;
    fs::create_dir_all(&ctx.cfg.output_dir).map_err(|e| io_err(&ctx.cfg.output_dir, e))?;
    match command {
        "simulate" => cmd_simulate(&ctx.cfg),
        "reconstruct" => cmd_reconstruct(&ctx.cfg),
        "tune" => cmd_tune(&ctx.cfg),
        "evaluate" => cmd_evaluate(&ctx),
        "benchmark" => cmd_benchmark(&ctx.cfg),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}

/// `phantom:<name>[:<size>]` or an image file.
pub fn load_image(spec: &str) -> Result<Image, CliError> {
    if let Some(rest) = spec.strip_prefix("phantom:") {
        let mut parts = rest.splitn(2, ':');
        let name = parts.next().unwrap_or_default();
        let n = match parts.next() {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Usage(format!("bad phantom size in '{spec}'")))?,
            None => 64,
        };
        return phantom_by_name(name, n).map_err(CliError::from);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Io(format!("image not found: {spec}")));
    }
    read_image(path).map_err(|e| CliError::at(path, e))
}

pub fn load_mask(source: &MaskSource, n: usize) -> Result<Mask, CliError> {
    match source {
        MaskSource::Spec(spec) => make_mask(n, spec).map_err(CliError::from),
        MaskSource::Path(p) => {
            if !p.exists() {
                return Err(CliError::Io(format!("mask not found: {}", p.display())));
            }
            read_mask(p).map_err(|e| CliError::at(p, e))
        }
    }
}

fn require_image(cfg: &ExperimentConfig) -> Result<(String, Image), CliError> {
    let spec = cfg
        .image_path
        .clone()
        .ok_or_else(|| CliError::Usage("an input image is required (--image)".into()))?;
    let img = load_image(&spec)?;
    Ok((spec, img))
}

fn require_mask(cfg: &ExperimentConfig, n: usize) -> Result<Mask, CliError> {
    let src = cfg
        .mask
        .as_ref()
        .ok_or_else(|| CliError::Usage("a mask is required (--mask)".into()))?;
    load_mask(src, n)
}

fn require_kspace(cfg: &ExperimentConfig) -> Result<KSpace, CliError> {
    let p = cfg
        .kspace_path
        .as_ref()
        .ok_or_else(|| CliError::Usage("a k-space file is required (--kspace)".into()))?;
    if !p.exists() {
        return Err(CliError::Io(format!("k-space not found: {}", p.display())));
    }
    read_kspace(p).map_err(|e| CliError::at(p, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn lib_io<T>(path: &Path, r: qshs_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::at(path, e))
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
    details: T,
}

fn file_names(paths: &[&Path]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect()
}

#[derive(Serialize)]
struct SimulateDetails {
    image: String,
    size: usize,
    sigma: f64,
    noise_seed: u64,
    mask: String,
    density: f64,
    sampled_bins: usize,
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (spec, img) = require_image(cfg)?;
    let n = img.size();
    let source = cfg.mask.clone().unwrap_or(MaskSource::parse("vd:0.18", 0));
    let mask = load_mask(&source, n)?;
    let y = simulate_measurement(&img, &mask, cfg.noise)?;

    let dir = &cfg.output_dir;
    let (ksp, mpgm, truth) = (dir.join("kspace.ksp"), dir.join("mask.pgm"), dir.join("truth.imgf"));
    lib_io(&ksp, write_kspace(&ksp, &y))?;
    lib_io(&mpgm, write_mask(&mpgm, &mask))?;
    lib_io(&truth, write_imgf(&truth, &img))?;
    let details = SimulateDetails {
        image: spec,
        size: n,
        sigma: cfg.noise.sigma,
        noise_seed: cfg.noise.seed,
        mask: source.label(),
        density: mask.density(),
        sampled_bins: mask.count(),
    };
    write_json(
        &dir.join("simulate_manifest.json"),
        &Manifest {
            command: "simulate",
            config: cfg,
            outputs: file_names(&[&ksp, &mpgm, &truth]),
            details,
        },
    )?;
    println!("wrote {} ({}x{n}, {} sampled bins)", ksp.display(), n, mask.count());
    Ok(())
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    objective: Option<f64>,
    primal_residual_u: f64,
    primal_residual_h: f64,
}

#[derive(Serialize, Clone)]
struct MetricsRow {
    method: String,
    rho: f64,
    beta: f64,
    iterations: usize,
    converged: bool,
    mse: Option<f64>,
    ssim: Option<f64>,
}

/// Writes image, trace and metrics files for one reconstruction.
fn write_recon(
    dir: &Path,
    solver: &SolverConfig,
    result: &ReconResult,
    truth: Option<&Image>,
    ssim_params: &SsimParams,
) -> Result<(MetricsRow, Vec<PathBuf>), CliError> {
    let pgm = dir.join("recon.pgm");
    let imgf = dir.join("recon.imgf");
    let trace = dir.join("trace.csv");
    let metrics = dir.join("metrics.csv");
    lib_io(&pgm, write_pgm16(&pgm, &result.u_final))?;
    lib_io(&imgf, write_imgf(&imgf, &result.u_final))?;
    let rows: Vec<TraceRow> = (0..result.iterations_run)
        .map(|k| TraceRow {
            iteration: k + 1,
            objective: result.objective_trace.get(k).copied(),
            primal_residual_u: result.primal_residual_u_trace[k],
            primal_residual_h: result.primal_residual_h_trace[k],
        })
        .collect();
    write_csv(&trace, &rows)?;
    let row = MetricsRow {
        method: solver.method.to_string(),
        rho: solver.rho,
        beta: result.beta_used,
        iterations: result.iterations_run,
        converged: result.converged,
        mse: truth.map(|t| mse(&result.u_final, t)).transpose()?,
        ssim: truth.map(|t| ssim(&result.u_final, t, ssim_params)).transpose()?,
    };
    write_csv(&metrics, std::slice::from_ref(&row))?;
    Ok((row, vec![pgm, imgf, trace, metrics]))
}

fn optional_truth(cfg: &ExperimentConfig, n: usize) -> Result<Option<Image>, CliError> {
    let Some(spec) = &cfg.image_path else { return Ok(None) };
    let img = load_image(spec)?;
    if img.size() != n {
        return Err(CliError::Usage(format!(
            "ground truth is {0}x{0} but k-space is {n}x{n}",
            img.size()
        )));
    }
    Ok(Some(img))
}

fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let y = require_kspace(cfg)?;
    let mask = require_mask(cfg, y.size())?;
    let truth = optional_truth(cfg, y.size())?;
    let result = solve(&y, &mask, &cfg.solver)?;
    let (row, outputs) = write_recon(&cfg.output_dir, &cfg.solver, &result, truth.as_ref(), &cfg.ssim)?;
    let paths: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_json(
        &cfg.output_dir.join("reconstruct_manifest.json"),
        &Manifest {
            command: "reconstruct",
            config: cfg,
            outputs: file_names(&paths),
            details: &row,
        },
    )?;
    print_metrics(&row);
    Ok(())
}

fn print_metrics(row: &MetricsRow) {
    let mut line = format!(
        "{} rho={} iterations={} converged={}",
        row.method, row.rho, row.iterations, row.converged
    );
    if let (Some(m), Some(s)) = (row.mse, row.ssim) {
        line += &format!(" mse={m:.4} ssim={s:.4}");
    }
    println!("{line}");
}

/// Error metric of a reconstruction against the truth, lower is better.
fn tune_score(u: &Image, truth: &Image, spec: &TuneSpec, p: &SsimParams) -> qshs_core::Result<f64> {
    match spec.objective {
        TuneObjective::Mse => mse(u, truth),
        TuneObjective::NegSsim => Ok(-ssim(u, truth, p)?),
    }
}

fn tune_rho(
    y: &KSpace,
    mask: &Mask,
    truth: &Image,
    solver: &SolverConfig,
    spec: &TuneSpec,
    ssim_params: &SsimParams,
) -> qshs_core::Result<TuneResult> {
    let probe_cfg = SolverConfig {
        track_objective: false,
        ..solver.clone()
    };
    golden_section_tune(
        |x| {
            let cfg = SolverConfig {
                rho: 10f64.powf(x),
                ..probe_cfg.clone()
            };
            let r = solve(y, mask, &cfg)?;
            tune_score(&r.u_final, truth, spec, ssim_params)
        },
        spec,
    )
}

#[derive(Serialize)]
struct ProbeRow {
    probe: usize,
    log10_rho: f64,
    rho: f64,
    objective: f64,
}

#[derive(Serialize)]
struct TuneDetails<'a> {
    best_rho: f64,
    best_log10_rho: f64,
    best_objective: f64,
    bracket_width: f64,
    probes: usize,
    max_probes: usize,
    final_run: &'a MetricsRow,
}

fn cmd_tune(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let y = require_kspace(cfg)?;
    let mask = require_mask(cfg, y.size())?;
    let truth = optional_truth(cfg, y.size())?
        .ok_or_else(|| CliError::Usage("tuning needs a ground truth (--truth)".into()))?;
    let spec = cfg.tune_spec();
    let tuned = tune_rho(&y, &mask, &truth, &cfg.solver, &spec, &cfg.ssim)?;

    let trace = cfg.output_dir.join("tune_trace.csv");
    let rows: Vec<ProbeRow> = tuned
        .probes
        .iter()
        .enumerate()
        .map(|(i, p)| ProbeRow {
            probe: i + 1,
            log10_rho: p.log10_rho,
            rho: 10f64.powf(p.log10_rho),
            objective: p.objective,
        })
        .collect();
    write_csv(&trace, &rows)?;

    let solver = SolverConfig {
        rho: tuned.best_rho(),
        ..cfg.solver.clone()
    };
    let result = solve(&y, &mask, &solver)?;
    let (row, mut outputs) = write_recon(&cfg.output_dir, &solver, &result, Some(&truth), &cfg.ssim)?;
    outputs.push(trace);
    let paths: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_json(
        &cfg.output_dir.join("tune_manifest.json"),
        &Manifest {
            command: "tune",
            config: cfg,
            outputs: file_names(&paths),
            details: TuneDetails {
                best_rho: tuned.best_rho(),
                best_log10_rho: tuned.best_log10_rho,
                best_objective: tuned.best_objective,
                bracket_width: tuned.bracket_width,
                probes: tuned.probes.len(),
                max_probes: spec.max_evals(),
                final_run: &row,
            },
        },
    )?;
    println!("best rho={} ({} probes)", tuned.best_rho(), tuned.probes.len());
    print_metrics(&row);
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    mse: f64,
    ssim: f64,
}

fn cmd_evaluate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let (_, truth) = require_image(cfg)?;
    let recon_path = ctx
        .recon_path
        .as_ref()
        .ok_or_else(|| CliError::Usage("a reconstruction is required (--recon)".into()))?;
    let recon = load_image(&recon_path.to_string_lossy())?;
    let row = EvalRow {
        mse: mse(&recon, &truth)?,
        ssim: ssim(&recon, &truth, &cfg.ssim)?,
    };
    let out = cfg.output_dir.join("evaluate.csv");
    write_csv(&out, std::slice::from_ref(&row))?;
    write_json(
        &cfg.output_dir.join("evaluate_manifest.json"),
        &Manifest {
            command: "evaluate",
            config: cfg,
            outputs: file_names(&[&out]),
            details: (recon_path, &row),
        },
    )?;
    println!("mse={:.6} ssim={:.6}", row.mse, row.ssim);
    Ok(())
}

#[derive(Serialize, Clone)]
struct BenchRow {
    image: String,
    mask: String,
    method: String,
    rho: Option<f64>,
    mse: Option<f64>,
    ssim: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    status: String,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

struct Cell {
    image: String,
    mask: String,
    truth: Image,
    mask_bins: Mask,
    y: KSpace,
}

fn bench_case(
    cell: &Cell,
    method: Method,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<BenchRow, CliError> {
    let solver = SolverConfig {
        method,
        ..cfg.solver.clone()
    };
    let spec = cfg.tune_spec();
    let tuned = tune_rho(&cell.y, &cell.mask_bins, &cell.truth, &solver, &spec, &cfg.ssim)?;
    let solver = SolverConfig {
        rho: tuned.best_rho(),
        track_objective: false,
        ..solver
    };
    let r = solve(&cell.y, &cell.mask_bins, &solver)?;
    let stem = format!("{}__{}__{}", slug(&cell.image), slug(&cell.mask), method);
    let pgm = dir.join(format!("{stem}.pgm"));
    let imgf = dir.join(format!("{stem}.imgf"));
    lib_io(&pgm, write_pgm16(&pgm, &r.u_final))?;
    lib_io(&imgf, write_imgf(&imgf, &r.u_final))?;
    Ok(BenchRow {
        image: cell.image.clone(),
        mask: cell.mask.clone(),
        method: method.to_string(),
        rho: Some(solver.rho),
        mse: Some(mse(&r.u_final, &cell.truth)?),
        ssim: Some(ssim(&r.u_final, &cell.truth, &cfg.ssim)?),
        iterations: Some(r.iterations_run),
        converged: Some(r.converged),
        status: "ok".into(),
    })
}

fn failed_row(image: &str, mask: &str, method: &str, e: &CliError) -> BenchRow {
    BenchRow {
        image: image.into(),
        mask: mask.into(),
        method: method.into(),
        rho: None,
        mse: None,
        ssim: None,
        iterations: None,
        converged: None,
        status: format!("error: {e}"),
    }
}

fn cmd_benchmark(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let images = if !cfg.images.is_empty() {
        cfg.images.clone()
    } else if let Some(p) = &cfg.image_path {
        vec![p.clone()]
    } else {
        vec!["phantom:shaded-shepp-logan:64".into(), "phantom:smooth:64".into()]
    };
    let masks = if !cfg.masks.is_empty() {
        cfg.masks.clone()
    } else if let Some(m) = &cfg.mask {
        vec![m.clone()]
    } else {
        let seed = cfg.seed.map(|s| crate::config::derive_seed(s, crate::config::MASK_STREAM));
        ["vd:0.18", "vd:0.09"]
            .iter()
            .map(|s| MaskSource::parse(s, seed.unwrap_or(0)))
            .collect()
    };
    let cases_dir = cfg.output_dir.join("cases");
    fs::create_dir_all(&cases_dir).map_err(|e| io_err(&cases_dir, e))?;

    let mut rows: Vec<BenchRow> = Vec::new();
    let mut cells = Vec::new();
    for image in &images {
        for source in &masks {
            let label = source.label();
            let cell = load_image(image).and_then(|truth| {
                let mask_bins = load_mask(source, truth.size())?;
                let y = simulate_measurement(&truth, &mask_bins, cfg.noise)?;
                Ok(Cell {
                    image: image.clone(),
                    mask: label.clone(),
                    truth,
                    mask_bins,
                    y,
                })
            });
            match cell {
                Ok(c) => cells.push(c),
                Err(e) => rows.extend(Method::ALL.iter().map(|m| failed_row(image, &label, m.name(), &e))),
            }
        }
    }
    let jobs: Vec<(&Cell, Method)> = cells
        .iter()
        .flat_map(|c| Method::ALL.iter().map(move |&m| (c, m)))
        .collect();
    let results: Vec<BenchRow> = jobs
        .par_iter()
        .map(|&(cell, method)| {
            bench_case(cell, method, cfg, &cases_dir)
                .unwrap_or_else(|e| failed_row(&cell.image, &cell.mask, method.name(), &e))
        })
        .collect();
    rows.extend(results);

    let table = cfg.output_dir.join("benchmark.csv");
    write_csv(&table, &rows)?;
    write_json(
        &cfg.output_dir.join("benchmark_manifest.json"),
        &Manifest {
            command: "benchmark",
            config: cfg,
            outputs: file_names(&[&table]),
            details: (&images, masks.iter().map(|m| m.label()).collect::<Vec<_>>()),
        },
    )?;
    for r in &rows {
        match r.ssim {
            Some(s) => println!("{:<28} {:<10} {:<5} ssim={s:.4}", r.image, r.mask, r.method),
            None => println!("{:<28} {:<10} {:<5} {}", r.image, r.mask, r.method, r.status),
        }
    }
    Ok(())
}

