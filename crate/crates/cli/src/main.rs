mod commands;
mod config;
mod oracles;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Failure;
use crate::config::RunConfig;

/// Forward self-similar Navier-Stokes profiles: solve, verify, oracles, export.
#[derive(Debug, Parser)]
#[command(name = "lerayflow", version)]
struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; overrides LERAYFLOW_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Dotted-path configuration override, e.g. `grid.n=128`. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the profile by continuation and write fields and a report.
    Solve,
    /// Check a solved profile against the analytical properties.
    Verify {
        /// Directory holding the solve artifacts; defaults to --out-dir.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Where to write the verification JSON; defaults to the configured
        /// name inside --out-dir.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run an oracle suite: oseen, projection, semigroup or holder.
    Oracle { name: String },
    /// Write CSV files of the solved fields and radial shell maxima.
    ExportCsv {
        /// Directory holding the solve artifacts; defaults to --out-dir.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("LERAYFLOW_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Failure::config(anyhow::anyhow!("LERAYFLOW_THREADS='{v}' is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Failure::config(anyhow::anyhow!("thread count must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.into()))?;
    }
    let load = || RunConfig::load(cli.config.as_deref(), &cli.overrides).map_err(Failure::config);
    match &cli.command {
        Command::Solve => commands::solve(&load()?, &cli.out_dir),
        Command::Verify { profile, report } => {
            let dir = profile.as_ref().unwrap_or(&cli.out_dir);
            commands::verify(dir, report.as_deref(), &cli.out_dir)
        }
        Command::Oracle { name } => commands::oracle(name, load()?.seed),
        Command::ExportCsv { profile } => commands::export_csv(profile.as_ref().unwrap_or(&cli.out_dir), &cli.out_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(e) = &f.error {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(f.code)
        }
    }
}
