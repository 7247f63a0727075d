use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use efimov::commands::{self, Run};
use efimov::config::RunConfig;
use efimov::error::CliError;

#[derive(Parser)]
#[command(name = "efimov", version, about = "Lattice three-body spectra and the Efimov counting law")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Branch-table cache directory; overrides EFIMOV_CACHE_DIR and the configuration.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker count. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Resonance couplings and the Watson integral.
    Resonance,
    /// Two-body dispersion edges, bound states and sign checks.
    TwoBody,
    /// Essential spectrum per total momentum.
    Bands,
    /// Eigenvalue counts below energy thresholds.
    Count,
    /// The three routes to the Efimov counting coefficient.
    Efimov,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    if cli.threads > 1 {
        log::info!("running sequentially; --threads {} does not change results", cli.threads);
    }
    let run = Run::new(RunConfig::load(path)?, cli.out.as_deref(), cli.cache.as_deref())?;
    let files = match cli.command {
        Command::Resonance => commands::resonance(&run)?,
        Command::TwoBody => commands::two_body(&run)?,
        Command::Bands => commands::bands(&run)?,
        Command::Count => commands::count(&run)?,
        Command::Efimov => commands::efimov(&run)?,
    };
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
