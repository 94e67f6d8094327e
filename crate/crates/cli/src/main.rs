//! `eqw`: batch front end for the elephant quantum walk suite.
//!
//! Each subcommand writes its data files and a `manifest.json` into the
//! `--out` directory. Exit status 2 marks a configuration problem such as a
//! value out of range; 3 marks a failure during the run itself, for example
//! the aliasing guard tripping.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{ChannelOpts, ClassicalOpts, Completed, EigenOpts, FitOpts, TraceOpts, WalkOpts};
use config::{layer, load_config, CliError};

#[derive(Parser)]
#[command(name = "eqw", version, about = "Elephant quantum walk simulations")]
struct Cli {
    /// Output directory for data files and the manifest.
    #[arg(long, global = true, default_value = "eqw-out")]
    out: PathBuf,
    /// Worker threads (defaults to the machine's parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with keys named like the flags, or a manifest.json from a previous run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard coined walk with unit steps (exact when noiseless).
    Standard(WalkOpts),
    /// Elephant walk: Monte Carlo ensemble over random step sizes.
    Elephant(WalkOpts),
    /// Classical elephant random walk.
    Classical(ClassicalOpts),
    /// Trace distance between two initial coin states.
    TraceDistance(TraceOpts),
    /// Eigenvalues of the step-averaged momentum-space map.
    KspaceEigen(EigenOpts),
    /// Exact averaged dynamics on a periodic lattice.
    ExactChannel(ChannelOpts),
    /// Power-law fit of one column of a CSV file.
    Fit(FitOpts),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Standard(_) => "standard",
            Command::Elephant(_) => "elephant",
            Command::Classical(_) => "classical",
            Command::TraceDistance(_) => "trace-distance",
            Command::KspaceEigen(_) => "kspace-eigen",
            Command::ExactChannel(_) => "exact-channel",
            Command::Fit(_) => "fit",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    params: serde_json::Value,
    seed: u64,
    version: &'a str,
    elapsed_seconds: f64,
}

fn dispatch(
    command: Command,
    file: Option<serde_json::Map<String, serde_json::Value>>,
    out: &Path,
) -> Result<Completed, CliError> {
    use commands::*;
    match command {
        Command::Standard(o) => run_walk(&layer(&o, file)?.resolve(false)?, out),
        Command::Elephant(o) => run_walk(&layer(&o, file)?.resolve(true)?, out),
        Command::Classical(o) => run_classical(&layer(&o, file)?.resolve()?, out),
        Command::TraceDistance(o) => run_trace(&layer(&o, file)?.resolve()?, out),
        Command::KspaceEigen(o) => run_eigen(&layer(&o, file)?.resolve()?, out),
        Command::ExactChannel(o) => run_channel(&layer(&o, file)?.resolve()?, out),
        Command::Fit(o) => run_fit(&layer(&o, file)?.resolve()?, out),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let name = cli.command.name();
    let file = cli
        .config
        .as_deref()
        .map(|p| load_config(p, name))
        .transpose()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::field("threads", "must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let out = cli.out;
    let done = pool.install(|| dispatch(cli.command, file, &out))?;
    let manifest = Manifest {
        command: name,
        params: done.params,
        seed: done.seed,
        version: env!("CARGO_PKG_VERSION"),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eqw: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
