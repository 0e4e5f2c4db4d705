//! Command-line surface for the treatment-policy toolkit.
//!
//! Subcommands: `simulate | learn | evaluate | mc-eval | benchmark-gamma`.
//! Every run is deterministic given its inputs and `--seed`; each output
//! directory gets a `run.meta.json` sidecar recording the tool version, the
//! fully resolved configuration, and its SHA-256 hash (never timestamps),
//! so re-runs are byte-identical.
//!
//! Exit codes: 0 success — including an infeasible calibration, which is a
//! valid scientific outcome reported as `feasible: false`; 1 runtime or I/O
//! failure; 2 usage or configuration error.
//!
//! Configuration can come from flags or from a `key=value` file passed with
//! `--config`; explicit flags win on conflict.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::CliError;

#[derive(Parser)]
#[command(name = "riskpol", version, about = "Certified treatment-risk policy learning")]
struct Cli {
    /// Worker threads for replications and grid sweeps (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Key=value configuration file; explicit flags win on conflict.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV + schema sidecar.
    Simulate(SimulateArgs),
    /// Split, sweep, and calibrate a policy on a dataset.
    Learn(LearnArgs),
    /// Estimate (dataset) or look up (scenario) the risks of a policy.
    Evaluate(EvaluateArgs),
    /// Replicate the full pipeline and report coverage per risk cap.
    McEval(McEvalArgs),
    /// Benchmark a plausible miscalibration factor for a dataset.
    BenchmarkGamma(BenchmarkGammaArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario: obs-clean | obs-confounded | rct-selected.
    #[arg(long)]
    scenario: Option<String>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also emit the latent confounder indicator as a column
    /// (obs-confounded only; for gamma benchmarking).
    #[arg(long)]
    with_confounder: bool,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Dataset CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema sidecar path (one `name = kind` line per feature).
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Data regime: observational | trial.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    action_col: Option<String>,
    #[arg(long)]
    loss_col: Option<String>,
    /// Treatment-risk cap to certify.
    #[arg(long)]
    tau: Option<f64>,
    /// Miscalibration factor (>= 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Confidence level of the certificate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Selection rule: high-prob | average.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated split fractions (learn,certify or learn,conformal,certify).
    #[arg(long)]
    split: Option<String>,
    /// Tolerance grid size.
    #[arg(long)]
    grid_count: Option<usize>,
    /// Upper end of the tolerance grid (exclusive of 0, inclusive here).
    #[arg(long)]
    grid_hi: Option<f64>,
    /// Maximum tree depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Threshold bins per continuous feature.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter preset: star (depth 3, 100-point grid up to 0.8).
    #[arg(long)]
    preset: Option<String>,
    /// Trial regime: marginal enrollment ratio p(S=1)/p(S=0).
    #[arg(long)]
    marginal_ratio: Option<f64>,
    /// Trial regime: known treatment probability (default: empirical).
    #[arg(long)]
    p_treat: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Policy JSON path.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Dataset CSV to estimate on (needs --schema).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    action_col: Option<String>,
    #[arg(long)]
    loss_col: Option<String>,
    /// Scenario to evaluate against ground truth (alternative to --data).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Monte Carlo draws for scenario truth when no closed form applies.
    #[arg(long)]
    precision: Option<usize>,
    /// Alternative stream for the scenario truth oracle.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial regime: marginal enrollment ratio p(S=1)/p(S=0).
    #[arg(long)]
    marginal_ratio: Option<f64>,
    /// Trial regime: known treatment probability (default: empirical).
    #[arg(long)]
    p_treat: Option<f64>,
    /// Optional output directory for report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McEvalArgs {
    #[arg(long)]
    scenario: Option<String>,
    /// Selection rule: high-prob | average.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated risk caps to certify.
    #[arg(long)]
    taus: Option<String>,
    /// Comma-separated split sizes per replication.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_count: Option<usize>,
    #[arg(long)]
    grid_hi: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// Monte Carlo draws per truth-oracle evaluation.
    #[arg(long)]
    precision: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkGammaArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    action_col: Option<String>,
    #[arg(long)]
    loss_col: Option<String>,
    /// Reliability bins.
    #[arg(long)]
    n_bins: Option<usize>,
    /// Coverage quantile for the suggested factor.
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        // Best effort: a pool may already be installed (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global();
    }
    let file_config = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(fc) => fc,
        Err(err) => return fail(err),
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args, &file_config),
        Command::Learn(args) => commands::learn(args, &file_config),
        Command::Evaluate(args) => commands::evaluate(args, &file_config),
        Command::McEval(args) => commands::mc_eval(args, &file_config),
        Command::BenchmarkGamma(args) => commands::benchmark_gamma(args, &file_config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(err),
    }
}

fn fail(err: CliError) -> ExitCode {
    match err {
        CliError::Usage(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        CliError::Runtime(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
