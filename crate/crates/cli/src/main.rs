use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::CliError;

#[derive(Debug, Parser)]
#[command(name = "rfgp", version, about = "Spatial random forests for binary data")]
struct Cli {
    /// Worker threads; `RFGP_THREADS` takes precedence. Defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate simulated replicates as train/test/truth CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Select spatial parameters and fit the final model.
    Fit {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Spatial predictions `p_hat,se,y_hat` for new sites.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Covariate effect `m_hat` at new covariate points.
    EstimateEffect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validation table over the spatial parameter grid.
    Cv {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulation study over a (sigma2, f) grid.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("RFGP_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("RFGP_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => match flag {
            Some(0) => Err(CliError::Config("--threads must be >= 1".into())),
            other => Ok(other),
        },
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
        Command::Fit {
            train,
            config,
            out,
            seed,
        } => commands::fit(&train, config.as_deref(), &out, seed),
        Command::Predict {
            model,
            test,
            config,
            out,
            seed,
        } => commands::predict(&model, &test, config.as_deref(), &out, seed),
        Command::EstimateEffect { model, points, out } => commands::estimate_effect(&model, &points, &out),
        Command::Cv {
            train,
            config,
            out,
            seed,
        } => commands::cv(&train, config.as_deref(), &out, seed),
        Command::Benchmark { config, out, seed } => commands::benchmark(&config, &out, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
