//! `satv2` — spatially adaptive TV–TV² image restoration.
//!
//! Subcommands: `denoise`, `deblur`, `inpaint` (the solver), `synth`
//! (test scenes and degradations), `metrics` (PSNR/SSIM of two files),
//! `analyze` (radial geometry sweep), and `rerun` (reproduce a run from an
//! embedded manifest). Exit codes: 0 success, 2 I/O failure, 3 invalid
//! configuration, 4 solver abort.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use satv2_cli::commands::{dispatch, CliError};
use satv2_cli::manifest::RunManifest;

#[derive(Parser)]
#[command(name = "satv2", version, about = "Spatially adaptive TV-TV2 image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Input (degraded) image, .pgm or .png
    #[arg(long = "in")]
    input: PathBuf,
    /// Restored image output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration diagnostics CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Ground-truth image; enables PSNR/SSIM reporting
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Fidelity weight (larger smooths more)
    #[arg(long)]
    lambda: f64,
    /// Penalty on the gradient splitting
    #[arg(long)]
    r1: f64,
    /// Penalty on the Hessian splitting
    #[arg(long)]
    r2: f64,
    /// Proximal weight on u
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Proximal weight on v
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Proximal weight on w
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Spatial mesh size
    #[arg(long, default_value_t = 5.0)]
    h: f64,
    #[arg(long = "max-iter", default_value_t = 300)]
    max_iter: usize,
    /// Stopping tolerance on the relative change of u
    #[arg(long, default_value_t = 2e-3)]
    tol: f64,
    /// Weight mode: dynamic | observed | oracle:<path> | constant:<a>:<b>
    #[arg(long, default_value = "dynamic")]
    weights: String,
    /// Disable the first-order term (pin v to the gradient)
    #[arg(long = "no-first-order")]
    no_first: bool,
    /// Disable the second-order term (pin w to the Hessian)
    #[arg(long = "no-second-order")]
    no_second: bool,
    /// Record wall-clock times in the trace (makes reruns differ)
    #[arg(long)]
    timing: bool,
    /// Compute post-hoc convergence quantities (second deterministic pass)
    #[arg(long)]
    deltas: bool,
    /// Write display-normalized final weight fields to
    /// <PREFIX>_alpha.pgm / <PREFIX>_beta.pgm
    #[arg(long = "weights-out")]
    weights_out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Remove additive Gaussian noise
    Denoise(SolverArgs),
    /// Invert a known periodic blur
    Deblur {
        #[command(flatten)]
        common: SolverArgs,
        /// Blur kernel: gaussian:<size>:<sigma> | average:<size>
        #[arg(long)]
        kernel: String,
    },
    /// Fill missing pixels
    Inpaint {
        #[command(flatten)]
        common: SolverArgs,
        /// Mask image: value >= 128 marks a missing pixel
        #[arg(long)]
        mask: PathBuf,
        /// Penalty coupling the fidelity splitting
        #[arg(long, default_value_t = 0.005)]
        r3: f64,
    },
    /// Generate synthetic scenes and degradations
    Synth {
        /// disk | bars | triangle | phantom
        scene: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        /// Disk radius in pixels
        #[arg(long = "R")]
        radius: Option<f64>,
        /// Disk intensity
        #[arg(long)]
        contrast: Option<f64>,
        /// Degrade with a blur kernel first
        #[arg(long)]
        blur: Option<String>,
        /// Then add Gaussian noise with this standard deviation
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long = "noise-mean")]
        noise_mean: Option<f64>,
        /// Seed for the noise generator (required with --noise)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// PSNR/SSIM of a candidate against a reference
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Steepness sweep of the radial geometry quantities, as CSV
    Analyze {
        /// Disk radius
        #[arg(long = "R", default_value_t = 1.0)]
        radius: f64,
        /// Disk intensity
        #[arg(long, default_value_t = 1.0)]
        contrast: f64,
        /// CSV output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a run from a manifest (JSON file or trace CSV header)
    Rerun {
        /// Path to a manifest JSON or a trace CSV with an embedded manifest
        path: PathBuf,
    },
}

fn path_str(p: &std::path::Path) -> String {
    p.to_string_lossy().into_owned()
}

fn opt_path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_deref().map(path_str)
}

fn solver_manifest(command: &str, a: &SolverArgs) -> RunManifest {
    RunManifest {
        command: command.into(),
        input: Some(path_str(&a.input)),
        output: opt_path_str(&a.out),
        trace: opt_path_str(&a.trace),
        reference: opt_path_str(&a.reference),
        lambda: a.lambda,
        r1: a.r1,
        r2: a.r2,
        mu: a.mu,
        gamma: a.gamma,
        tau: a.tau,
        h: a.h,
        max_iter: a.max_iter,
        tol: a.tol,
        weights: a.weights.clone(),
        first_order: !a.no_first,
        second_order: !a.no_second,
        weights_out: a.weights_out.clone(),
        timing: a.timing,
        deltas: a.deltas,
        ..RunManifest::default()
    }
}

fn manifest_of(command: &Command) -> Result<RunManifest, CliError> {
    Ok(match command {
        Command::Denoise(a) => solver_manifest("denoise", a),
        Command::Deblur { common, kernel } => {
            let mut m = solver_manifest("deblur", common);
            m.kernel = Some(kernel.clone());
            m
        }
        Command::Inpaint { common, mask, r3 } => {
            let mut m = solver_manifest("inpaint", common);
            m.mask = Some(path_str(mask));
            m.r3 = Some(*r3);
            m
        }
        Command::Synth {
            scene,
            out,
            rows,
            cols,
            radius,
            contrast,
            blur,
            noise,
            noise_mean,
            seed,
        } => RunManifest {
            command: "synth".into(),
            scene: Some(scene.clone()),
            output: Some(path_str(out)),
            rows: *rows,
            cols: *cols,
            radius: *radius,
            contrast: *contrast,
            blur: blur.clone(),
            noise_sigma: *noise,
            noise_mean: *noise_mean,
            seed: *seed,
            ..RunManifest::default()
        },
        Command::Metrics { input, reference } => RunManifest {
            command: "metrics".into(),
            input: Some(path_str(input)),
            reference: Some(path_str(reference)),
            ..RunManifest::default()
        },
        Command::Analyze { radius, contrast, out } => RunManifest {
            command: "analyze".into(),
            radius: Some(*radius),
            contrast: Some(*contrast),
            output: opt_path_str(out),
            ..RunManifest::default()
        },
        Command::Rerun { path } => {
            let contents = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            RunManifest::from_embedded(&contents).ok_or_else(|| {
                CliError::Config(format!("{}: no readable manifest found", path.display()))
            })?
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(3);
            }
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let manifest = match manifest_of(&cli.command) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(&manifest) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
