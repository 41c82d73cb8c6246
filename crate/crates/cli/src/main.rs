//! `ricciface`: batch conformal flattening of face scans into nine-channel
//! images.
//!
//! Logs go to stderr, reports to JSON files, and stdout carries one summary
//! line. Exit status is 0 when every input succeeds, 1 when any input
//! fails, and 2 on usage errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ricciface::embed::Projection;
use ricciface::ricci::FlowMode;

use crate::config::InputKind;

#[derive(Debug, Parser)]
#[command(name = "ricciface", version, about = "Conformal flattening of face scans via discrete surface Ricci flow")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the deterministic test meshes as OBJ files.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
    /// Flatten meshes into nine-channel MCI images with flow and distortion reports.
    Flatten(BatchArgs),
    /// Compare quasi-conformal distortion of conformal and orthographic flattening.
    Compare(BatchArgs),
    /// Rigidly align meshes to a reference scan.
    Icp(BatchArgs),
    /// Report mesh topology and curvature statistics.
    Stats(BatchArgs),
    /// Export channels of MCI images as 8-bit PGM files.
    ExportPgm(ExportArgs),
}

/// Flags shared by the batch subcommands. Each overrides the same key in
/// `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct BatchArgs {
    /// Input path or glob pattern; repeatable.
    #[arg(long)]
    pub input: Vec<String>,
    /// Inputs are meshes (OBJ, PLY) or depth images (PGM, CSV).
    #[arg(long, value_enum)]
    pub kind: Option<InputKind>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Image size as WxH [default: 182x182].
    #[arg(long)]
    pub size: Option<String>,
    /// Interior curvature tolerance of the flow [default: 1e-6].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Flow solver: gradient or newton [default: newton].
    #[arg(long)]
    pub mode: Option<FlowMode>,
    /// conformal or orthographic [default: conformal].
    #[arg(long)]
    pub projection: Option<Projection>,
    /// Reference mesh to align every input to before flattening.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Skip alignment (required for orthographic projection without --reference).
    #[arg(long)]
    pub no_align: bool,
    /// Parallel jobs [default: 1].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Pixel spacing of depth images in model units [default: 1].
    #[arg(long)]
    pub spacing: Option<f64>,
    /// ICP iteration limit [default: 300].
    #[arg(long)]
    pub icp_iters: Option<usize>,
    /// ICP stops once the RMS changes by less than this [default: 1e-9].
    #[arg(long)]
    pub icp_tol: Option<f64>,
    /// TOML file with any of the keys above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// MCI file or glob pattern; repeatable.
    #[arg(long, required = true)]
    input: Vec<String>,
    /// Channel index (0-8) or name (R, G, B, Nx, Ny, Nz, K, CF, D); all channels if omitted.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Bad flags, config or inputs; exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// How many inputs of a batch went through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub ok: usize,
    pub failed: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    let result = match cli.command {
        Command::Fixtures { out } => commands::fixtures(&out),
        Command::Flatten(args) => commands::flatten(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::Icp(args) => commands::icp(&args),
        Command::Stats(args) => commands::stats(&args),
        Command::ExportPgm(args) => commands::export_pgm(&args.input, args.channel.as_deref(), &args.out),
    };
    match result {
        Ok(tally) if tally.failed == 0 => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
