//! `holosense <experiment> --config <path> [--seed <u64>] [--jobs <n>] [--out <dir>]`
//!
//! Exit status: 0 on success, 1 when an experiment fails, 2 for usage or
//! configuration errors, 3 for I/O failures.

mod config;
mod output;
mod run;

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{ConfigError, ExperimentConfig, Kind};
use output::{version_string, Artifacts, FileEntry};
use run::RunError;

#[derive(Parser)]
#[command(name = "holosense", version, about = "Holographic channel-sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Array pattern of a single raw hologram used as weights.
    PatternRaw(Common),
    /// Array pattern of the phase-shift recovered field.
    PatternPsis(Common),
    /// Field recovery error of PSIS against a single exposure.
    PsisDemo(Common),
    /// Channel NMSE against SNR.
    NmseSnr(Common),
    /// Channel NMSE against array size.
    NmseSize(Common),
    /// Channel NMSE against estimation order.
    NmseOrder(Common),
    /// Measured errors against the analytical bounds.
    Bounds(Common),
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Root seed, overriding `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<NonZeroUsize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Command {
    fn split(self) -> (Kind, Common) {
        match self {
            Command::PatternRaw(c) => (Kind::PatternRaw, c),
            Command::PatternPsis(c) => (Kind::PatternPsis, c),
            Command::PsisDemo(c) => (Kind::PsisDemo, c),
            Command::NmseSnr(c) => (Kind::NmseSnr, c),
            Command::NmseSize(c) => (Kind::NmseSize, c),
            Command::NmseOrder(c) => (Kind::NmseOrder, c),
            Command::Bounds(c) => (Kind::Bounds, c),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: String,
    experiment: &'static str,
    seed: u64,
    jobs: usize,
    wall_time_s: f64,
    config: &'a ExperimentConfig,
    files: &'a [FileEntry],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    peaks: &'a [holosense::Peak],
    summary: serde_json::Value,
}

enum Failure {
    Config(ConfigError),
    Run(RunError),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(ConfigError::Io(_)) | Failure::Run(RunError::Io(_)) => 3,
            Failure::Config(_) => 2,
            Failure::Run(RunError::Model(_)) => 1,
        }
    }
}

fn execute(kind: Kind, args: &Common) -> Result<PathBuf, Failure> {
    let started = Instant::now();
    let cfg = ExperimentConfig::load(&args.config)
        .map_err(Failure::Config)?
        .resolve(kind, args.seed);
    cfg.validate(kind).map_err(Failure::Config)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.map_or(0, NonZeroUsize::get))
        .build()
        .map_err(|e| Failure::Run(RunError::Io(std::io::Error::other(e.to_string()))))?;
    let jobs = pool.current_num_threads();
    log::info!("{} with seed {} on {jobs} worker(s)", kind.name(), cfg.noise.seed);

    let mut out = Artifacts::new(&args.out, cfg.prefix()).map_err(|e| Failure::Run(RunError::Io(e)))?;
    let report = pool.install(|| run::run(&cfg, kind, &mut out)).map_err(Failure::Run)?;

    let manifest = Manifest {
        tool: "holosense",
        version: version_string(),
        experiment: kind.name(),
        seed: cfg.noise.seed,
        jobs,
        wall_time_s: started.elapsed().as_secs_f64(),
        config: &cfg,
        files: &out.files,
        peaks: &report.peaks,
        summary: report.summary,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Run(RunError::Io(e.into())))? + "\n";
    let path = out.path("manifest.json");
    std::fs::write(&path, text).map_err(|e| Failure::Run(RunError::Io(e)))?;
    Ok(path)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HOLOSENSE_LOG", "warn")).init();
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match execute(kind, &args) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Config(ConfigError::Io(m)) => eprintln!("error: cannot read config {m}"),
                Failure::Config(e) => eprintln!("error: invalid config {}: {e}", args.config.display()),
                Failure::Run(e) => eprintln!("error: {} failed: {e}", kind.name()),
            }
            ExitCode::from(f.code())
        }
    }
}
