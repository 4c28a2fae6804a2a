//! `ebsurf`: scan meshes, reconstruct surfaces from point clouds, extract
//! meshes from checkpoints and score them against ground truth.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, missing inputs,
//! invalid configs), 2 when a stage fails at runtime.

mod commands;
mod config;
mod logging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};


/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "EBSURF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ebsurf", version, about = "Energy-based surface reconstruction from point clouds")]
struct Cli {
    /// Log debug messages.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON or TOML file with any subset of the configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub print_config: bool,

    /// Seed for scanning and training.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a multi-view range scan of a mesh.
    Scan(ScanArgs),
    /// Train a network on a point cloud and extract its surface.
    Reconstruct(ReconstructArgs),
    /// Mesh the zero level set of a checkpoint.
    Extract(ExtractArgs),
    /// Compare a reconstruction with the ground-truth mesh.
    Eval(EvalArgs),
    /// Scan, reconstruct, extract and evaluate every (mesh, sigma) pair.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, required_unless_present = "print_config")]
    pub mesh: Option<PathBuf>,
    /// Depth noise in units of the normalized shape.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub scans: Option<usize>,
    #[arg(long)]
    pub rays: Option<usize>,
    /// Output cloud (.ply, .xyz or .obj).
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, required_unless_present = "print_config")]
    pub cloud: Option<PathBuf>,
    /// Noise level of the cloud; selects the target beta from the table.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Target beta, taking precedence over --sigma.
    #[arg(long)]
    pub beta_override: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Write Langevin trajectories under traces/.
    #[arg(long)]
    pub trace_sampler: bool,
    /// Updates between traced sampler calls.
    #[arg(long, default_value_t = 100)]
    pub trace_every: usize,
    /// Run directory.
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, required_unless_present = "print_config")]
    pub checkpoint: Option<PathBuf>,
    /// Samples per axis.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Output mesh (.ply or .obj).
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Reconstructed mesh.
    #[arg(long, required_unless_present = "print_config")]
    pub mesh: Option<PathBuf>,
    /// Ground-truth mesh; both meshes are normalized by its bounds.
    #[arg(long, required_unless_present = "print_config")]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, num_args = 1.., required_unless_present = "print_config")]
    pub meshes: Vec<PathBuf>,
    #[arg(long, num_args = 1.., default_values_t = [0.0])]
    pub sigmas: Vec<f64>,
    /// Target beta for every run instead of the table.
    #[arg(long)]
    pub beta_override: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Number of (mesh, sigma) runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Experiment directory; receives results.csv and one directory per run.
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), commands::Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| commands::Failure::usage(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::Failure::runtime(e.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    logging::init(cli.verbose);
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Scan(a) => commands::scan(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Extract(a) => commands::extract(a),
        Command::Eval(a) => commands::eval(a),
        Command::Pipeline(a) => commands::pipeline(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
