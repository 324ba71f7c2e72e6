//! `collapse-lab`: command-line front end for `collapse-core`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 usage.

pub mod commands;
pub mod config;
pub mod error;
pub mod geometry;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;
use crate::output::{json_bytes, write_atomic, RunManifest, TOOL_VERSION};

pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "collapse-lab", version, about = "Collapsing-limit experiments on one-dimensional bases")]
pub struct Cli {
    /// Write a JSON run manifest here.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowMode {
    Continuity,
    Krf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the threshold and log power of a resolution file.
    Lct {
        file: PathBuf,
        /// Emit a JSON record instead of the one-line summary.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the resolution of a Kodaira fiber, or sweep the whole table.
    Kodaira {
        /// Type tag such as I0star, mI1, Ibstar, II, IVstar.
        #[arg(long = "type", value_name = "TAG", required_unless_present = "sweep")]
        kind: Option<String>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        b: Option<u32>,
        #[arg(long, conflicts_with = "kind")]
        sweep: bool,
        /// Multiplicities for the multiple-fiber rows of the sweep.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,5")]
        m_list: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the local-model fiber-volume density.
    FiberVolume {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit the exponents; the JSON summary goes to PATH or stdout.
        #[arg(long, value_name = "PATH", num_args = 0..=1)]
        fit: Option<Option<PathBuf>>,
    },
    /// Solve the generalized Kähler–Einstein equation on the torus.
    Gke {
        config: PathBuf,
        /// Potential grid as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON summary; stdout when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run the continuity family or the flow and tabulate convergence.
    Flow {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "continuity")]
        mode: FlowMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distances in the completed base metric.
    Metric(MetricArgs),
    /// Geodesic diagnostics on a product of two completed surfaces.
    Product(ProductArgs),
    /// Epsilon-isometry maxima of a shrinking-fiber product.
    Collapse(CollapseArgs),
    /// Aggregate JSON and CSV outputs into one report.
    Report {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub stencil: Option<u32>,
    /// CSV with columns x1,y1,x2,y2.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Pair distances as CSV; skipped when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary; stdout when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Overrides the metric scale of the config.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Exponent L of the ball radius eps^L in the diameter check.
    #[arg(long = "ball-exponent", default_value_t = 4)]
    pub ball_exponent: i32,
}

#[derive(Debug, Args)]
pub struct ProductArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long)]
    pub stencil: Option<u32>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Number of sampled point pairs.
    #[arg(long, default_value_t = 32)]
    pub pairs: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Per-pair excesses as CSV; skipped when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary; stdout when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    /// Base density config; a flat 32x32 torus when absent.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Fiber density config; a flat 32x32 torus when absent.
    #[arg(long)]
    pub fiber: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma_list: Vec<f64>,
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub stencil: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a subcommand reports back for the manifest.
#[derive(Default)]
pub struct Outcome {
    pub config_paths: Vec<PathBuf>,
    pub output_paths: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub config_hash: String,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("COLLAPSE_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Validation(format!("COLLAPSE_LAB_THREADS must be a positive integer, got {value:?}")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Lct { file, json, out } => commands::lct(file, *json, out.as_deref()),
        Command::Kodaira {
            kind,
            m,
            b,
            sweep,
            m_list,
            out,
        } => commands::kodaira(kind.as_deref(), *m, *b, *sweep, m_list, out.as_deref()),
        Command::FiberVolume { config, out, fit } => commands::fiber_volume(config, out.as_deref(), fit.as_ref()),
        Command::Gke { config, out, summary } => commands::gke(config, out.as_deref(), summary.as_deref()),
        Command::Flow { config, mode, out } => commands::flow(config, *mode, out.as_deref()),
        Command::Metric(args) => geometry::metric(args),
        Command::Product(args) => geometry::product(args),
        Command::Collapse(args) => geometry::collapse(args),
        Command::Report { inputs, out } => report::report(inputs, out.as_deref()),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Lct { .. } => "lct",
        Command::Kodaira { .. } => "kodaira",
        Command::FiberVolume { .. } => "fiber-volume",
        Command::Gke { .. } => "gke",
        Command::Flow { .. } => "flow",
        Command::Metric(_) => "metric",
        Command::Product(_) => "product",
        Command::Collapse(_) => "collapse",
        Command::Report { .. } => "report",
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let start = Instant::now();
    let outcome = dispatch(&cli.command)?;
    if let Some(path) = &cli.manifest {
        let display = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect();
        let manifest = RunManifest {
            command: command_name(&cli.command).to_string(),
            config_paths: display(&outcome.config_paths),
            output_paths: display(&outcome.output_paths),
            seed: outcome.seed,
            tool_version: TOOL_VERSION,
            config_hash: outcome.config_hash,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        write_atomic(path, &json_bytes(&manifest))?;
    }
    Ok(())
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("collapse-lab {}: {e}", command_name(&cli.command));
            e.exit_code()
        }
    }
}
