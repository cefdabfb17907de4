use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spfcast::cli::{self, RunConfig};

/// Seasonal-performance estimation and retrofit forecasting from
/// smart-meter populations.
#[derive(Parser)]
#[command(name = "spfcast", version, arg_required_else_help = true)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Directory with meters.csv, buildings.csv, weather.csv (overrides
    /// [paths] data_dir).
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Correlation checks between consumption, weather and building size.
    Validate,
    /// Estimate the electricity-to-heat scale factor per year.
    Estimate {
        /// Restrict to these years (repeatable); default is every year
        /// present in the data.
        #[arg(long = "year", value_name = "YEAR")]
        years: Vec<i32>,
        /// Heat-demand reduction override.
        #[arg(long)]
        gamma: Option<f64>,
        /// Divergence to minimize: symmetric_kl or mixture.
        #[arg(long)]
        variant: Option<String>,
        /// Histogram bin count override.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Predict post-retrofit electricity for the gas-heated stock.
    Forecast {
        #[arg(long = "year", value_name = "YEAR")]
        years: Vec<i32>,
        /// Scale factor to apply; defaults to the estimate step's output.
        #[arg(long)]
        b: Option<f64>,
        /// Mean SPF to apply (used when --b is absent).
        #[arg(long)]
        spf: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Winter temperature table and annual-distribution histograms.
    Analyze {
        #[arg(long = "year", value_name = "YEAR")]
        years: Vec<i32>,
    },
    /// Generate a synthetic town with known ground truth.
    Synth {
        /// Random seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(args: Cli) -> spfcast::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(dir) = args.out {
        cfg.output.dir = dir;
    }
    if let Some(dir) = args.data {
        cfg.paths.data_dir = dir;
    }
    match args.command {
        Command::Validate => cli::cmd_validate(&cfg),
        Command::Estimate {
            years,
            gamma,
            variant,
            bins,
        } => {
            if let Some(g) = gamma {
                cfg.retrofit.gamma = g;
            }
            if let Some(v) = variant {
                cfg.divergence.variant = v;
            }
            if let Some(n) = bins {
                cfg.binning.bins = Some(n);
                cfg.binning.width = None;
            }
            cli::cmd_estimate(&cfg, &years)
        }
        Command::Forecast {
            years,
            b,
            spf,
            gamma,
        } => {
            if let Some(g) = gamma {
                cfg.retrofit.gamma = g;
            }
            if let Some(b) = b {
                cfg.forecast.b = Some(b);
            }
            if let Some(s) = spf {
                cfg.forecast.spf = Some(s);
            }
            cli::cmd_forecast(&cfg, &years)
        }
        Command::Analyze { years } => cli::cmd_analyze(&cfg, &years),
        Command::Synth { seed } => {
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            cli::cmd_synth(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
