//! `opt`: run KATE and its baselines from a JSON config.
//!
//! Exit codes: 0 completed (diverged runs and failed checks included),
//! 1 internal error, 2 bad configuration.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use kate_core::data::FetchMode;
use kate_core::harness::{self, BetaSpec, EtaSpec, RunConfig};
use kate_core::Error;

#[derive(Parser)]
#[command(name = "opt", version, about = "KATE optimizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer for `trials` seeds.
    Run(Common),
    /// Final loss over a Δ grid for every optimizer.
    Sweep(Common),
    /// Grid-search β per optimizer.
    Tune(Common),
    /// Compare runs on unscaled and scaled synthetic data.
    Invariance(Common),
    /// Download LIBSVM datasets into the cache.
    Fetch(FetchArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    optimizer: Option<String>,
    /// Number or "paper".
    #[arg(long)]
    beta: Option<String>,
    /// Number, JSON array or "grad_init".
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "T")]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    /// Dataset names; all known datasets when omitted.
    names: Vec<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Only check the cache.
    #[arg(long)]
    offline: bool,
}

impl Common {
    fn load(&self) -> kate_core::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_json(&std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", path.display()))
            })?)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.optimizer {
            config.optimizer = o.clone();
        }
        if let Some(b) = &self.beta {
            config.beta = Some(b.parse::<BetaSpec>()?);
        }
        if let Some(e) = &self.eta {
            config.eta = Some(e.parse::<EtaSpec>()?);
        }
        if let Some(d) = self.delta {
            config.delta = Some(d);
        }
        if let Some(t) = self.steps {
            config.steps = t;
        }
        if let Some(b) = self.batch {
            config.batch = b;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(t) = self.trials {
            config.trials = t;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> kate_core::Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_json<T: Serialize>(value: &T) -> kate_core::Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn execute(cli: Cli) -> kate_core::Result<()> {
    match cli.command {
        Command::Run(c) => print_json(&harness::cmd_run(&c.load()?, &c.out)?),
        Command::Sweep(c) => print_json(&harness::cmd_sweep_delta(&c.load()?, &c.out)?),
        Command::Tune(c) => print_json(&harness::cmd_tune(&c.load()?, &c.out)?),
        Command::Invariance(c) => print_json(&harness::cmd_invariance(&c.load()?, &c.out)?),
        Command::Fetch(f) => {
            let cache = f.cache_dir.unwrap_or_else(harness::default_cache_dir);
            let names: Vec<&str> = if f.names.is_empty() {
                kate_core::data::KNOWN_DATASETS.iter().map(|k| k.name).collect()
            } else {
                f.names.iter().map(String::as_str).collect()
            };
            let mode = if f.offline { FetchMode::Offline } else { FetchMode::Online };
            for src in harness::cmd_fetch(Path::new(&cache), &names, mode)? {
                emit(&format!("{}\t{}\t{}", src.name, src.sha256, src.path.display()))?;
            }
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Precondition(_) | Error::Dimension { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
