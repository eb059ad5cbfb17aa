use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use geotomo_cli::commands::{execute, Command};
use geotomo_cli::{CliError, Config};

/// Attenuated geodesic ray transform experiments on simple disks.
#[derive(Debug, Parser)]
#[command(name = "geotomo", version)]
struct Cli {
    /// JSON configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides the configured output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run even if the metric fails the simplicity check.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads; GEOTOMO_THREADS applies only when this is absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("GEOTOMO_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Config(format!("GEOTOMO_THREADS must be a thread count, got {v:?}"))
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output = out;
    }
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    execute(&cli.command, &config, &config.output.clone(), cli.force)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geotomo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
