//! `tvclt`: total-variation CLT computations from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 numerical nonconvergence.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "tvclt", version, about = "Total-variation central limit theorem toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct GlobalOpts {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Grid intervals used to sample each absolutely continuous family.
    #[arg(long, global = true, default_value_t = tvclt::family::DEFAULT_INTERVALS)]
    pub grid_points: usize,
    /// Extra absolute slack allowed in every verification inequality.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub tolerance: f64,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Tv,
    Kolmogorov,
}

#[derive(Debug, Subcommand, serde::Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Distance between the n-fold sums of two laws (the second defaults to the matched normal).
    Tv {
        #[arg(long)]
        spec_a: PathBuf,
        #[arg(long)]
        spec_b: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        n: u64,
        /// Shift applied to the second law.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = Kind::Tv)]
        kind: Kind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Law of the sum of n copies: density CSV plus a JSON sidecar with atoms and budget.
    Convolve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: PathBuf,
        /// Sidecar path (default: the output path with a .json extension).
        #[arg(long)]
        meta_out: Option<PathBuf>,
    },
    /// Δ_n = d_TV(S_n, matched normal) for each n.
    DeltaSeries {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = tvclt::dichotomy::default_n_values())]
        n_list: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Branch and log-log slope of a Δ_n series CSV.
    RateFit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact shift distance of triangular sums against the closed-form bound.
    Lemma1Verify {
        #[arg(long, value_delimiter = ',', required = true)]
        a_list: Vec<f64>,
        #[arg(long)]
        n_max: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma_list: Vec<f64>,
        /// Random points for the cosine inequality check (0 skips it).
        #[arg(long, default_value_t = 10_000)]
        cosine_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Triangular decomposition certificate of F*F.
    Decompose {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Residual density CSV (default: the output path with a .residual.csv extension).
        #[arg(long)]
        residual_out: Option<PathBuf>,
    },
    /// Bound on d_TV(S_n, S_n + γ) with its breakdown.
    ShiftBound {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        gamma: f64,
        /// Also compute the exact shift distance and fail if the bound is below it.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stein equation solutions for interval-union sets.
    SteinCheck {
        /// `random:K` for K seeded random sets, or `intervals:LO:HI,LO:HI,…` for one set.
        #[arg(long, default_value = "random:100")]
        sets: String,
        /// Largest residual accepted.
        #[arg(long, default_value_t = 1e-8)]
        max_residual: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Right-hand side of the master bound on Δ_n.
    BoundRhs {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: u64,
        /// Also compute Δ_n and fail if it exceeds the bound.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = commands::run(cli);
    ExitCode::from(code.as_u8())
}
