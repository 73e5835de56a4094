//! Command implementations. Every command consumes a [`RunManifest`], so a
//! run is fully described by — and reproducible from — its manifest.

use std::fmt;
use std::path::Path;

use satv2_core::admm::{run, run_with_deltas, RunOutput, SolverConfig};
use satv2_core::analysis::{steepness_sweep, SWEEP_MULTIPLIERS};
use satv2_core::error::SatvError;
use satv2_core::grid::ImageGrid;
use satv2_core::metrics::{clamp_to_output, QualityReport};
use satv2_core::problems::{average_kernel, gaussian_kernel, BlurKernel, ProblemSpec};
use satv2_core::synth::{
    add_gaussian_noise, bars_image, disk_image, phantom_image, triangle_image, NoiseSpec,
};
use satv2_core::weights::WeightMode;

use crate::io;
use crate::manifest::RunManifest;

/// Failure classes mapped to process exit codes: I/O 2, configuration 3,
/// solver abort 4.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Config(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Config(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Solver(msg) => write!(f, "solver abort: {msg}"),
        }
    }
}

impl From<SatvError> for CliError {
    fn from(e: SatvError) -> Self {
        match &e {
            SatvError::NonFinite { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// Parses `gaussian:<size>:<sigma>` or `average:<size>`.
pub fn parse_kernel(spec: &str) -> Result<BlurKernel, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["gaussian", size, sigma] => {
            let size: usize = size
                .parse()
                .map_err(|_| CliError::Config(format!("bad kernel size in `{spec}`")))?;
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| CliError::Config(format!("bad kernel sigma in `{spec}`")))?;
            gaussian_kernel(size, sigma).map_err(CliError::from)
        }
        ["average", size] => {
            let size: usize = size
                .parse()
                .map_err(|_| CliError::Config(format!("bad kernel size in `{spec}`")))?;
            average_kernel(size).map_err(CliError::from)
        }
        _ => Err(CliError::Config(format!(
            "unknown kernel `{spec}` (use gaussian:<size>:<sigma> or average:<size>)"
        ))),
    }
}

/// Parses `dynamic`, `observed`, `oracle:<path>` or `constant:<a>:<b>`.
fn parse_weights(spec: &str, mesh: f64) -> Result<WeightMode, CliError> {
    if spec == "dynamic" {
        return Ok(WeightMode::Dynamic);
    }
    if spec == "observed" {
        return Ok(WeightMode::Observed);
    }
    if let Some(path) = spec.strip_prefix("oracle:") {
        let reference = io::read_image(Path::new(path), mesh)?;
        return Ok(WeightMode::Oracle(reference));
    }
    if let Some(rest) = spec.strip_prefix("constant:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if let [a, b] = parts.as_slice() {
            let alpha0: f64 = a
                .parse()
                .map_err(|_| CliError::Config(format!("bad constant alpha in `{spec}`")))?;
            let beta0: f64 = b
                .parse()
                .map_err(|_| CliError::Config(format!("bad constant beta in `{spec}`")))?;
            if alpha0 < 0.0 || beta0 < 0.0 {
                return Err(CliError::Config("constant weights must be nonnegative".into()));
            }
            return Ok(WeightMode::Constant { alpha0, beta0 });
        }
    }
    Err(CliError::Config(format!(
        "unknown weight mode `{spec}` (dynamic | observed | oracle:<path> | constant:<a>:<b>)"
    )))
}

fn solver_config(m: &RunManifest) -> Result<SolverConfig, CliError> {
    Ok(SolverConfig {
        lambda: m.lambda,
        r1: m.r1,
        r2: m.r2,
        mu: m.mu,
        gamma: m.gamma,
        tau: m.tau,
        h: m.h,
        max_iter: m.max_iter,
        tol: m.tol,
        weight_mode: parse_weights(&m.weights, m.h)?,
        enable_first: m.first_order,
        enable_second: m.second_order,
    })
}

fn build_problem(m: &RunManifest) -> Result<ProblemSpec, CliError> {
    match m.command.as_str() {
        "denoise" => Ok(ProblemSpec::Denoise),
        "deblur" => {
            let spec = m
                .kernel
                .as_deref()
                .ok_or_else(|| CliError::Config("deblur requires --kernel".into()))?;
            Ok(ProblemSpec::Deblur {
                kernel: parse_kernel(spec)?,
            })
        }
        "inpaint" => {
            let mask_path = m
                .mask
                .as_deref()
                .ok_or_else(|| CliError::Config("inpaint requires --mask".into()))?;
            let mask = io::read_mask(Path::new(mask_path))?;
            let r3 = m
                .r3
                .ok_or_else(|| CliError::Config("inpaint requires --r3".into()))?;
            ProblemSpec::inpaint(mask, r3).map_err(CliError::from)
        }
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

/// Shared driver for `denoise`, `deblur` and `inpaint`.
pub fn cmd_restore(m: &RunManifest) -> Result<RunOutput, CliError> {
    let input = m
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("missing input image (--in)".into()))?;
    let f = io::read_image(Path::new(input), m.h)?;
    let reference = match m.reference.as_deref() {
        Some(p) => Some(io::read_image(Path::new(p), m.h)?),
        None => None,
    };
    let cfg = solver_config(m)?;
    let problem = build_problem(m)?;

    let out = if m.deltas {
        run_with_deltas(&cfg, &problem, &f, reference.as_ref())?
    } else {
        run(&cfg, &problem, &f, reference.as_ref())?
    };

    if let Some(path) = m.output.as_deref() {
        io::write_image(Path::new(path), &clamp_to_output(&out.u))?;
    }
    if let Some(path) = m.trace.as_deref() {
        io::write_trace(Path::new(path), m, &out.trace, m.timing)?;
    }
    if let Some(prefix) = m.weights_out.as_deref() {
        // The weight fields are rescaled to the display range here and only
        // here; the solve always uses the raw values.
        let weights = satv2_core::weights::weights_for(&cfg.weight_mode, &out.u, &f)?;
        let normalize = |a: &ndarray::Array2<f64>| {
            let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = if max > min { max - min } else { 1.0 };
            ImageGrid::new(a.mapv(|v| (v - min) / span * 255.0), m.h).expect("finite weights")
        };
        io::write_image(
            Path::new(&format!("{prefix}_alpha.pgm")),
            &normalize(&weights.alpha),
        )?;
        io::write_image(
            Path::new(&format!("{prefix}_beta.pgm")),
            &normalize(&weights.beta),
        )?;
    }
    println!(
        "converged={} iterations={}",
        out.converged,
        out.trace.last().map(|r| r.k).unwrap_or(0)
    );
    if let Some(r) = &reference {
        // Final quality against the reference is reported on the values a
        // saved file would hold.
        let report = QualityReport::compute(r, &clamp_to_output(&out.u))?;
        println!("psnr={} ssim={}", report.psnr_db, report.ssim);
    }
    Ok(out)
}

fn synth_scene(m: &RunManifest) -> Result<ImageGrid, CliError> {
    let scene = m
        .scene
        .as_deref()
        .ok_or_else(|| CliError::Config("synth requires a scene".into()))?;
    match scene {
        "bars" => Ok(bars_image()),
        "triangle" => Ok(triangle_image()),
        "phantom" => {
            let rows = m.rows.unwrap_or(256);
            let cols = m.cols.unwrap_or(256);
            Ok(phantom_image(rows, cols))
        }
        "disk" => {
            let radius = m.radius.unwrap_or(32.0);
            let contrast = m.contrast.unwrap_or(100.0);
            let rows = m.rows.unwrap_or((4.0 * radius).round() as usize);
            let cols = m.cols.unwrap_or(rows);
            disk_image(rows, cols, radius, contrast).map_err(CliError::from)
        }
        other => Err(CliError::Config(format!(
            "unknown scene `{other}` (disk | bars | triangle | phantom)"
        ))),
    }
}

/// Generates a synthetic scene, degrades it (blur first, then noise) and
/// writes the result.
pub fn cmd_synth(m: &RunManifest) -> Result<(), CliError> {
    let mut img = synth_scene(m)?;
    if let Some(spec) = m.blur.as_deref() {
        let kernel = parse_kernel(spec)?;
        img = satv2_core::problems::apply_blur(&img, &kernel)?;
    }
    if let Some(sigma) = m.noise_sigma {
        let seed = m
            .seed
            .ok_or_else(|| CliError::Config("--noise requires --seed".into()))?;
        let spec = NoiseSpec {
            sigma,
            mean: m.noise_mean.unwrap_or(0.0),
            seed,
        };
        img = add_gaussian_noise(&img, &spec)?;
    }
    let out = m
        .output
        .as_deref()
        .ok_or_else(|| CliError::Config("synth requires --out".into()))?;
    io::write_image(Path::new(out), &img)
}

/// Prints a quality report for a pair of files as one CSV row.
pub fn cmd_metrics(m: &RunManifest) -> Result<(), CliError> {
    let input = m
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("metrics requires --in".into()))?;
    let reference = m
        .reference
        .as_deref()
        .ok_or_else(|| CliError::Config("metrics requires --ref".into()))?;
    let candidate = io::read_image(Path::new(input), m.h)?;
    let reference = io::read_image(Path::new(reference), m.h)?;
    let report = QualityReport::compute(&reference, &candidate)?;
    println!("mse,psnr,ssim");
    println!("{},{},{}", report.mse, report.psnr_db, report.ssim);
    Ok(())
}

/// Runs the steepness sweep and emits it as CSV.
pub fn cmd_analyze(m: &RunManifest) -> Result<(), CliError> {
    let radius = m.radius.unwrap_or(1.0);
    let contrast = m.contrast.unwrap_or(1.0);
    let rows = steepness_sweep(radius, contrast, &SWEEP_MULTIPLIERS)?;
    io::write_sweep(m.output.as_deref().map(Path::new), m, &rows)
}

/// Dispatches a manifest to its command.
pub fn dispatch(m: &RunManifest) -> Result<(), CliError> {
    match m.command.as_str() {
        "denoise" | "deblur" | "inpaint" => cmd_restore(m).map(|_| ()),
        "synth" => cmd_synth(m),
        "metrics" => cmd_metrics(m),
        "analyze" => cmd_analyze(m),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}
