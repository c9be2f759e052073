//! Command-line front end: validate or run one experiment config.
//!
//! Exit codes: 0 success (including a non-converged MEGA fit), 1 internal
//! failure, 2 configuration or domain error, 3 resource limit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mega_sim::cache::SpectrumCache;
use mega_sim::config::ExperimentConfig;
use mega_sim::runner;

#[derive(Parser)]
#[command(
    name = "mega-sim",
    version,
    about = "Hubbard-cluster effective-temperature laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config against the schema and domain limits without computing.
    Validate(Common),
    /// Execute the experiment and write CSVs plus a run manifest.
    Run(RunArgs),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory (overrides `output` in the config)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Spectrum cache directory (overrides MEGA_SIM_CACHE)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker thread count (defaults to the available cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(c) => validate(&c),
        Command::Run(r) => run(&r),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn validate(args: &Common) -> mega_sim::Result<ExitCode> {
    ExperimentConfig::from_path(&args.config)?;
    println!("ok: {}", args.config.display());
    Ok(ExitCode::SUCCESS)
}

fn run(args: &RunArgs) -> mega_sim::Result<ExitCode> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(mega_sim::Error::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| mega_sim::Error::resource(format!("thread pool: {e}")))?;
    }
    let cfg = ExperimentConfig::from_path(&args.common.config)?;
    let cache_dir = args
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os("MEGA_SIM_CACHE").map(PathBuf::from));
    let cache = match &cache_dir {
        Some(dir) => Some(SpectrumCache::open(dir)?),
        None => None,
    };
    let summary = runner::run(&cfg, cache.as_ref(), args.output.as_deref())?;
    for f in &summary.files {
        println!("wrote {}", summary.output_dir.join(f).display());
    }
    println!("wrote {}", summary.manifest_path.display());
    if summary.converged == Some(false) {
        println!("note: fit did not reach the convergence threshold");
    }
    Ok(ExitCode::SUCCESS)
}
