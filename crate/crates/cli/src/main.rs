//! `stability-lab`: batch front end for the stability-core library.
//!
//! Exit codes: 0 when the checked property holds, 1 when it fails, 2 on
//! any error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "stability-lab", version, about = "Construct, certify and search stability witnesses")]
struct Cli {
    /// Worker threads (default: all cores). STABILITY_LAB_THREADS overrides.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModeArgs {
    /// Exact rational arithmetic (default).
    #[arg(long, conflicts_with = "float")]
    exact: bool,
    /// Floating-point coefficients.
    #[arg(long)]
    float: bool,
}

#[derive(Debug, Args)]
struct Output {
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ConstructKind {
    /// Binary-tree witness of depth m (2^m pairs).
    Tree {
        #[arg(long)]
        m: u32,
        #[command(flatten)]
        mode: ModeArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Tree witness mixed with a fixed orthogonal direction.
    Shifted {
        #[arg(long)]
        m: u32,
        /// Power recorded in the document for later certification.
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        mode: ModeArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Shattered point set with one realizer per subset.
    Vc {
        #[arg(long)]
        d: u32,
        /// Margin, as a rational ("1/2") or decimal.
        #[arg(long)]
        epsilon: String,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Brute,
    Greedy,
}

#[derive(Debug, Subcommand)]
enum VcCommand {
    /// min(dim, floor(4/eps^2)).
    Formula {
        #[arg(long)]
        dim: u64,
        #[arg(long)]
        epsilon: String,
    },
    /// Verify every realizer of a VC witness file.
    Check {
        witness: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Whether d points of rank r are too few sign cells to shatter.
    Impossible {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        r: u64,
    },
    /// Mean of ||sum sigma_i x_i||^2 against the shattering lower bound.
    Averaging {
        witness: PathBuf,
        /// Defaults to the witness margin.
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Count subsets realizable in the unit ball by least-norm solves.
    Count {
        witness: PathBuf,
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Subcommand)]
enum ApproxCommand {
    /// Minimal coefficient mass of a degree-D grid approximation.
    Ag {
        /// `poly:c0,c1,...`, `abs`, `relu:c` or `table:file.csv`.
        #[arg(long)]
        g: String,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        degree: usize,
        /// Chebyshev grid size; 0 picks max(8D+1, 201).
        #[arg(long, default_value_t = 0)]
        grid: usize,
        #[command(flatten)]
        out: Output,
    },
    /// exp(2 pi A / eps) with A computed at eta = eps/4.
    Bound {
        #[arg(long)]
        g: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        grid: usize,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a witness family and write it as JSON.
    Construct {
        #[command(subcommand)]
        kind: ConstructKind,
    },
    /// Check a witness file for a half-graph at margin epsilon.
    Certify {
        witness: PathBuf,
        /// `inner`, `pow:x`, `ipow:d` or `poly:a0,a1,...`.
        #[arg(long, default_value = "inner")]
        predicate: String,
        #[arg(long)]
        epsilon: String,
        /// Use |f(x_i,y_j) - f(x_j,y_i)| as the margin.
        #[arg(long)]
        abs: bool,
        /// Also evaluate the S-functional certificate.
        #[arg(long)]
        sfunctional: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Fail unless every margin is exact or rigorously enclosed.
        #[arg(long)]
        require_exact: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Find a large half-graph inside a witness file.
    Search {
        witness: PathBuf,
        #[arg(long, default_value = "inner")]
        predicate: String,
        #[arg(long)]
        epsilon: String,
        #[arg(long, value_enum, default_value = "brute")]
        method: Method,
        /// Exit 1 when fewer pairs are found.
        #[arg(long, default_value_t = 1)]
        min_k: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Tabulate lower and upper stability bounds over margins (CSV).
    Scan {
        #[arg(long, default_value = "inner")]
        predicate: String,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Margin-shattering tools.
    Vc {
        #[command(subcommand)]
        command: VcCommand,
    },
    /// Operator norm of the n x n matrix 1/(i-j).
    HilbertNorm {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iters: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Polynomial approximation functional of a connective.
    Approx {
        #[command(subcommand)]
        command: ApproxCommand,
    },
}

fn thread_count(flag: Option<usize>) -> usize {
    let env = std::env::var("STABILITY_LAB_THREADS").ok().and_then(|v| v.trim().parse().ok());
    env.or(flag)
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = thread_count(cli.threads);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let mut manifest = RunManifest::new(threads);
    match commands::run(cli.command, &mut manifest) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
