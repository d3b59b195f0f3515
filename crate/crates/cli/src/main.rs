//! `brw`: runs one experiment described by a JSON config and writes its
//! CSV/JSON results and a manifest into an output directory.
//!
//! Exit status: 0 when every check passes, 2 when a check fails, 1 on a
//! usage or configuration error.

mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use config::Config;

/// A problem with the command line, the config or the output directory.
#[derive(Debug)]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "brw", version, about = "Branching random walk experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(UsageError(msg)) => {
            eprintln!("brw: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<bool, UsageError> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut config = Config::parse(&text)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("brw-{}-{}", config.experiment.name(), config.seed)));
    config.out = Some(out_dir.clone());
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(UsageError("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| UsageError(format!("cannot start workers: {e}")))?;
    }
    let workers = rayon::current_num_threads();

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let outcome = experiments::run(&config.experiment, config.seed)?;
    let wall = clock.elapsed().as_secs_f64();

    fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;
    for (name, bytes) in &outcome.files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    }
    let pass = outcome.failures.is_empty();
    let manifest = json!({
        "generator": format!("brw {}", env!("CARGO_PKG_VERSION")),
        "library_version": brw_core::VERSION,
        "rng": brw_core::rng::GENERATOR,
        "experiment": config.experiment.name(),
        "seed": config.seed,
        "workers": workers,
        "started_unix_seconds": started,
        "wall_time_seconds": wall,
        "files": outcome.files.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
        "status": if pass { "pass" } else { "fail" },
        "failures": outcome.failures,
        "notes": outcome.notes,
        "config": config,
    });
    let path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serialisable");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;

    for note in &outcome.notes {
        eprintln!("brw: note: {note}");
    }
    for failure in &outcome.failures {
        eprintln!("brw: FAIL: {failure}");
    }
    println!("{}: {} ({})", config.experiment.name(), if pass { "pass" } else { "fail" }, out_dir.display());
    Ok(pass)
}

fn io_error(path: &Path, e: std::io::Error) -> UsageError {
    UsageError(format!("cannot write {}: {e}", path.display()))
}
