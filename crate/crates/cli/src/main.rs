//! `d2dcache` command-line front end.
//!
//! Exit codes: 0 on success, 1 on a user or configuration error, 2 on an internal failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Error caused by the invocation rather than by the library.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "d2dcache",
    version,
    about = "Caching policies, throughput-outage analytics and simulation for cache-aided multi-hop D2D networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// CSV output file; defaults to <out-dir>/<subcommand>.csv
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Directory for default output files
    #[arg(
        long,
        global = true,
        env = "D2DCACHE_OUT_DIR",
        default_value = "results"
    )]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// Popularity model and cache budget.
#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Tail exponent of the MZipf popularity
    #[arg(long)]
    pub gamma: f64,
    /// Plateau factor (0 gives plain Zipf)
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,
    /// Library size
    #[arg(long = "M")]
    pub library_size: usize,
    /// Cache size per user, in files
    #[arg(long = "S")]
    pub cache_size: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal caching distribution for one cluster size
    #[command(allow_negative_numbers = true)]
    Policy {
        #[command(flatten)]
        model: ModelArgs,
        /// Mean users per cluster
        #[arg(long)]
        gc: f64,
        /// Solver: closed-form (water-filling, exact fallback) or kkt (bisection)
        #[arg(long, default_value = "closed-form", value_parser = ["closed-form", "kkt"])]
        solver: String,
    },
    /// Closed-form outage expressions
    #[command(allow_negative_numbers = true)]
    Outage {
        #[arg(long)]
        gamma: f64,
        /// Plateau ratio q/M for the gamma < 1 bound
        #[arg(long = "D", default_value_t = 0.0)]
        d: f64,
        /// rho as a multiple of gamma, for the gamma < 1 bound
        #[arg(long)]
        rho_mult: Option<f64>,
        /// alpha1 for the gamma > 1 limit
        #[arg(long)]
        alpha1: Option<f64>,
        /// Plateau factor for the exact outage
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        /// Library size for the exact outage
        #[arg(long = "M")]
        library_size: Option<usize>,
        /// Cache size for the exact outage
        #[arg(long = "S")]
        cache_size: Option<usize>,
        /// Cluster size for the exact outage
        #[arg(long)]
        gc: Option<f64>,
    },
    /// Achievable and outer throughput-outage curves
    #[command(allow_negative_numbers = true)]
    Tradeoff {
        #[command(flatten)]
        model: ModelArgs,
        /// TDMA reuse factor
        #[arg(long, default_value_t = 4.0)]
        reuse: f64,
        /// Points per curve
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
    /// Monte Carlo trials at one cluster size, one CSV row per trial
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        gc: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Clusters per network side
        #[arg(long, default_value_t = 1)]
        clusters_per_side: usize,
        /// TDMA reuse factor (perfect square)
        #[arg(long, default_value_t = 4)]
        reuse: u32,
        /// Squarelet sizing constant
        #[arg(long, default_value_t = 2.0)]
        c0: f64,
        /// Report rates in bits/s/Hz and check relay hops against the SINR threshold
        #[arg(long)]
        physical: bool,
    },
    /// Experiment from a flat TOML file
    #[command(allow_negative_numbers = true)]
    Sweep {
        /// Experiment file
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, applied after the file (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Master seed (overrides the file)
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per point (overrides the file)
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Preset theory-versus-simulation reports
    #[command(allow_negative_numbers = true)]
    Validate {
        /// 3: cutoff, 4: outage, 5: throughput-outage, 6: multi-hop vs single-hop
        #[arg(long, value_parser = clap::value_parser!(u8).range(3..=6))]
        figure: u8,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long = "M")]
        library_size: Option<usize>,
        #[arg(long = "S")]
        cache_size: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Override a preset key (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Miss probability after searching n_s caches
    #[command(allow_negative_numbers = true)]
    Pmiss {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of caches searched
        #[arg(long)]
        ns: u64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() || err.downcast_ref::<std::io::Error>().is_some()
    {
        return 1;
    }
    match err.downcast_ref::<d2dcache::Error>() {
        Some(e) if e.is_user_error() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(2),
    }
}
