//! `outage-mdp`: solve, evaluate and compare policies of a finite discounted
//! MDP by expected gain and by the probability of exceeding a gain threshold,
//! and emit CSV curves for plotting.
//!
//! Exit codes: 0 success, 1 invalid model or solver did not converge,
//! 2 usage error (bad flags, missing files, out-of-range arguments).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use outage_core::distributional::{DEFAULT_BINS, DEFAULT_TOL};
use outage_core::expected::DEFAULT_MAX_ITER;
use outage_core::rollout::DEFAULT_TRUNCATION_EPS;

#[derive(Debug, Parser)]
#[command(name = "outage-mdp", version, about = "Expected-gain and outage-probability solvers for finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model description and list every violation.
    Validate {
        /// Model description (JSON).
        mdp: PathBuf,
    },
    /// Maximize the expected discounted gain by value iteration.
    SolveExpected {
        mdp: PathBuf,
        /// Sup-norm stopping tolerance.
        #[arg(long, default_value_t = outage_core::expected::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Values as CSV with header `state,value`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Greedy policy file.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Maximize p(G > alpha) per state with the binned distribution solver.
    SolveOutage {
        mdp: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value_t = SweepArg::Inplace)]
        sweep: SweepArg,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Per-state distributions file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// CCDF x ↦ p(G > x) of one state, analytic or by Monte Carlo.
    Ccdf(CcdfArgs),
    /// Expected-gain and outage policies side by side.
    Compare {
        mdp: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Learn a two-Gaussian mixture from sampled labels with TD updates.
    TdDemo(TdArgs),
    /// Write the bundled recycling-robot model.
    ExampleModel {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
struct GridArgs {
    /// Bins per state grid (at least 2).
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// `global`: one uniform grid over the reachable gain span shared by all
    /// states; `centered`: per-state grid with a center at the state's value.
    #[arg(long, value_enum, default_value_t = GridArg::Global)]
    grid: GridArg,
    /// Starting vectors: all mass at the state's value, or uniform.
    #[arg(long, value_enum, default_value_t = InitArg::PointMass)]
    init: InitArg,
}

#[derive(Debug, Clone, Args)]
struct CcdfArgs {
    mdp: PathBuf,
    /// Policy file to evaluate.
    #[arg(long, conflicts_with = "from_dists", required_unless_present = "from_dists")]
    policy: Option<PathBuf>,
    /// Distributions file written by `solve-outage`.
    #[arg(long)]
    from_dists: Option<PathBuf>,
    /// Start state name.
    #[arg(long)]
    state: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Episode truncation bound on the dropped discounted tail.
    #[arg(long, default_value_t = DEFAULT_TRUNCATION_EPS)]
    truncation_eps: f64,
    /// First x; defaults to the model's reachable gain lower bound.
    #[arg(long, allow_negative_numbers = true)]
    xs_min: Option<f64>,
    /// Last x; defaults to the model's reachable gain upper bound.
    #[arg(long, allow_negative_numbers = true)]
    xs_max: Option<f64>,
    /// Number of evenly spaced x points.
    #[arg(long, default_value_t = 1001)]
    xs_steps: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Curve as CSV with header `x,ccdf`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct TdArgs {
    /// Weight of the first Gaussian.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    mean1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    mean2: f64,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    /// Learning rate in (0, 1].
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Squared)]
    loss: LossArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Take one full step toward the exact mixture instead of sampling labels.
    #[arg(long)]
    one_step: bool,
    /// Trace as CSV with header `step,l1_error`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    Global,
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    PointMass,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    Inplace,
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Squared,
    Kl,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
