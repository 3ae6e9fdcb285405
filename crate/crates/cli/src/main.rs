use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use error::{CliError, CliResult};

/// Supervised screening and regularized factor forecasting.
#[derive(Debug, Parser)]
#[command(name = "ssrf", version)]
struct Cli {
    /// Seed for every random stream (simulation spec seed, then 42, when absent).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "ssrf-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo recovery and forecast experiment from a JSON spec.
    Simulate { spec: PathBuf },
    /// Expanding-window out-of-sample forecasts over the test period.
    Forecast {
        data: PathBuf,
        series_spec: PathBuf,
        config: PathBuf,
    },
    /// Keep-fraction grid search on the training sample.
    Tune {
        data: PathBuf,
        series_spec: PathBuf,
        config: PathBuf,
    },
    /// Eigenvalue shares and loadings of the five factor constructions.
    EigenReport {
        data: PathBuf,
        series_spec: PathBuf,
        config: PathBuf,
    },
}

const DEFAULT_SEED: u64 = 42;

fn dispatch(cli: &Cli) -> CliResult<()> {
    let out = &cli.out;
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Simulate { spec } => commands::simulate(spec, cli.seed, out),
        Command::Forecast {
            data,
            series_spec,
            config,
        } => commands::forecast(data, series_spec, config, seed, out),
        Command::Tune {
            data,
            series_spec,
            config,
        } => commands::tune(data, series_spec, config, seed, out),
        Command::EigenReport {
            data,
            series_spec,
            config,
        } => commands::eigen_report(data, series_spec, config, seed, out),
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {detail}", e.code());
            ExitCode::FAILURE
        }
    }
}
