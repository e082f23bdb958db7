mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Causal discovery on pooled observational and knockout expression data.
#[derive(Debug, Parser)]
#[command(name = "lcd", version, about)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a dataset and its causal graph.
    Simulate(SimulateArgs),
    /// Run a stabilized estimator and write pair counts.
    Run(RunArgs),
    /// Score per-fold predictions against held-out interventions.
    Evaluate(EvaluateArgs),
    /// Answer graph queries on a graph file.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Small example graph instead of a random panel.
    #[arg(long, value_parser = ["lcd-chain", "lcd-chain-confounded", "lcd-instrument-confounded", "icp-diamond"])]
    pub fixture: Option<String>,
    /// Number of genes of a random panel.
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[arg(long, default_value_t = 0.04)]
    pub edge_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    pub weight_low: f64,
    #[arg(long, default_value_t = 1.5)]
    pub weight_high: f64,
    /// Knockout experiments of a random panel, one per distinct gene.
    #[arg(long, default_value_t = 100)]
    pub interventions: usize,
    /// Knockout level in observational standard deviations below zero.
    #[arg(long, default_value_t = 20.0)]
    pub knockout_shift: f64,
    #[arg(long, default_value_t = 200)]
    pub n_obs: usize,
    /// Interventional samples of a fixture.
    #[arg(long, default_value_t = 1000)]
    pub n_int: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output table.
    #[arg(long)]
    pub out: PathBuf,
    /// Output graph file [default: <out>.graph].
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// One of lcd, lcd-mv, lcd-bst, lcd-bst-mv, icp, boost-baseline.
    #[arg(long)]
    pub estimator: String,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub subsamples: usize,
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    #[arg(long, default_value_t = 8)]
    pub max_vars: usize,
    #[arg(long, default_value_t = 100)]
    pub mstop: usize,
    #[arg(long, default_value_t = 0.1)]
    pub nu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Train on all folds but --test-fold of a k-fold split.
    #[arg(long, requires = "test_fold")]
    pub folds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub fold_seed: u64,
    #[arg(long, requires = "folds")]
    pub test_fold: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// One prediction file per test fold.
    #[arg(long, num_args = 1.., required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, num_args = 1.., default_values_t = [0.1, 0.01, 0.001])]
    pub prevalence: Vec<f64>,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
    /// Directory for roc_<q>.tsv and band_<q>.tsv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(subcommand)]
    pub query: OracleQuery,
}

#[derive(Debug, Subcommand)]
pub enum OracleQuery {
    /// Print `separated` or `connected`.
    Dsep {
        a: String,
        b: String,
        /// Conditioning nodes.
        #[arg(long, num_args = 0..)]
        given: Vec<String>,
    },
    /// Print the ancestors of a node, one per line.
    Ancestors { node: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Run(a) => commands::run(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Oracle(a) => commands::oracle(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
