//! `featmix` command-line runner.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use featmix::Window;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{unix_now, Manifest, OutputDir};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "FEATMIX_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "featmix", version, about = "Feature-driven Bayesian density forecast combination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Compute the feature matrix of each series.
    Features,
    /// Fit the component models and write their one-step log predictive densities.
    FitModels,
    /// Train a combination and save it as JSON.
    Train,
    /// Produce multi-step combined forecasts from a saved fit.
    Forecast,
    /// Recursive one-step out-of-sample evaluation of several modes.
    Evaluate,
    /// Holdout scores for every multi-model subset of the pool.
    Benchmark,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Features => "features",
            Command::FitModels => "fit-models",
            Command::Train => "train",
            Command::Forecast => "forecast",
            Command::Evaluate => "evaluate",
            Command::Benchmark => "benchmark",
        }
    }
}

/// Flags that override values from the config file.
#[derive(Args, Default)]
struct Overrides {
    /// TOML config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Input CSV file (repeatable).
    #[arg(long, global = true)]
    series: Vec<PathBuf>,
    #[arg(long, global = true)]
    column: Option<String>,
    #[arg(long, global = true)]
    id_column: Option<String>,
    /// Comma-separated model pool.
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Comma-separated modes for evaluate and benchmark.
    #[arg(long, global = true, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Comma-separated candidate features.
    #[arg(long, global = true, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Features kept after ReliefF screening.
    #[arg(long, short, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    min_length: Option<usize>,
    #[arg(long, global = true)]
    feature_window: Option<Window>,
    #[arg(long, global = true)]
    model_window: Option<Window>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    start_t: Option<usize>,
    #[arg(long, global = true)]
    draws: Option<usize>,
    #[arg(long, global = true)]
    burn_in: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    fit: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    frozen_models: bool,
    #[arg(long, global = true)]
    reselect_features: bool,
    /// Output directory (also settable through FEATMIX_OUTPUT_DIR).
    #[arg(long, short, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) {
        if !self.series.is_empty() {
            cfg.series = self.series;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(column, models, mode, modes, features, min_length, feature_window, model_window, sigma2, horizon);
        set!(draws, burn_in, restarts, seed, output_dir);
        if self.id_column.is_some() {
            cfg.id_column = self.id_column;
        }
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if self.start_t.is_some() {
            cfg.start_t = self.start_t;
        }
        if self.fit.is_some() {
            cfg.fit = self.fit;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.frozen_models |= self.frozen_models;
        cfg.reselect_features |= self.reselect_features;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let started_unix = unix_now();
    let mut cfg = match &cli.overrides.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }

    let mut out = OutputDir::create(&cfg.output_dir)?;
    let notes = match cli.command {
        Command::Features => commands::features(&cfg, &mut out)?,
        Command::FitModels => commands::fit_models(&cfg, &mut out)?,
        Command::Train => commands::train(&cfg, &mut out)?,
        Command::Forecast => commands::forecast(&cfg, &mut out)?,
        Command::Evaluate => commands::evaluate(&cfg, &mut out)?,
        Command::Benchmark => commands::benchmark(&cfg, &mut out)?,
    };
    for n in &notes {
        eprintln!("note: {n}");
    }
    let outputs = out.written().iter().map(|p| p.display().to_string()).collect();
    let manifest = Manifest {
        command: cli.command.name(),
        config: &cfg,
        seed: cfg.seed,
        featmix_version: env!("CARGO_PKG_VERSION"),
        started_unix,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs,
        notes,
    };
    let path = out.write_json(&format!("manifest_{}.json", cli.command.name()), &manifest)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
