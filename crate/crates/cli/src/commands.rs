//! Command implementations behind the argument parser.

use std::fmt;
use std::path::Path;

use outage_core::distributional::{
    evaluate_policy_distribution, gain_span, load_distributions, make_grid, save_distributions, solve_outage, GainGrid,
    GridMode, Init, OutageQuery, SolveStatus, SolverConfig, StateDistribution, SweepMode,
};
use outage_core::expected::{greedy_policy, policy_evaluation_exact, value_iteration, ValueTable};
use outage_core::mdp::{load_mdp, load_policy, recycling_robot, save_mdp, save_policy, validate_mdp, Policy};
use outage_core::rollout::{empirical_ccdf, simulate_gains, RolloutConfig};
use outage_core::td::{mixture_experiment, mixture_one_step, Loss, MixtureOutcome, TdConfig};
use outage_core::{Error, Mdp};

use crate::{CcdfArgs, Command, GridArg, GridArgs, InitArg, LossArg, ModeArg, SweepArg, TdArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing input files, out-of-range arguments.
    Usage(String),
    /// Invalid model, malformed input, or a solver that did not converge.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) | Error::Io { .. } => CliError::Usage(e.to_string()),
            Error::Parse { .. } | Error::Invalid(_) | Error::GridMismatch(_) => CliError::Failure(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Validate { mdp } => validate(&mdp),
        Command::SolveExpected { mdp, tol, max_iter, out, policy_out } => {
            eprintln!("solve-expected: tol={tol:e} max-iter={max_iter}");
            solve_expected(&mdp, tol, max_iter, out.as_deref(), policy_out.as_deref())
        }
        Command::SolveOutage { mdp, alpha, grid, sweep, tol, max_iter, out, policy_out } => {
            eprintln!(
                "solve-outage: alpha={alpha} {} sweep={} tol={tol:e} max-iter={max_iter}",
                describe(&grid),
                sweep_name(sweep)
            );
            let cfg = SolverConfig { tol, max_iter, sweep: sweep_mode(sweep) };
            solve_outage_cmd(&mdp, alpha, &grid, &cfg, out.as_deref(), policy_out.as_deref())
        }
        Command::Ccdf(args) => ccdf(&args),
        Command::Compare { mdp, alpha, grid, tol, max_iter } => {
            eprintln!("compare: alpha={alpha} {} sweep=inplace tol={tol:e} max-iter={max_iter}", describe(&grid));
            compare(&mdp, alpha, &grid, tol, max_iter)
        }
        Command::TdDemo(args) => td_demo(&args),
        Command::ExampleModel { out } => {
            save_mdp(&recycling_robot(), &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn describe(grid: &GridArgs) -> String {
    let kind = match grid.grid {
        GridArg::Global => "global",
        GridArg::Centered => "centered",
    };
    let init = match grid.init {
        InitArg::PointMass => "point-mass",
        InitArg::Uniform => "uniform",
    };
    format!("bins={} grid={kind} init={init}", grid.bins)
}

fn sweep_name(sweep: SweepArg) -> &'static str {
    match sweep {
        SweepArg::Inplace => "inplace",
        SweepArg::Snapshot => "snapshot",
    }
}

fn sweep_mode(sweep: SweepArg) -> SweepMode {
    match sweep {
        SweepArg::Inplace => SweepMode::InPlace,
        SweepArg::Snapshot => SweepMode::Snapshot,
    }
}

/// Reads and validates a model; violations are a failure, not a usage error.
fn load(path: &Path) -> CliResult<Mdp> {
    let model = load_mdp(path)?;
    let report = validate_mdp(&model);
    if !report.is_ok() {
        return Err(CliError::Failure(format!("{}: invalid model\n{report}", path.display())));
    }
    Ok(Mdp::new(model)?)
}

/// Grids and starting vectors anchored at `values` (the values the grid is
/// centered on and the point-mass start sits at).
fn grids_and_init(mdp: &Mdp, grid: &GridArgs, values: &ValueTable) -> CliResult<(Vec<GainGrid>, Init)> {
    let mode = match grid.grid {
        GridArg::Global => GridMode::GlobalSpan,
        GridArg::Centered => GridMode::CenteredAt(values.clone()),
    };
    let grids = make_grid(mdp, grid.bins, &mode)?;
    let init = match grid.init {
        InitArg::PointMass => Init::PointMass(values.clone()),
        InitArg::Uniform => Init::Uniform,
    };
    Ok((grids, init))
}

fn optimal_values(mdp: &Mdp, tol: f64, max_iter: usize) -> CliResult<ValueTable> {
    let vi = value_iteration(mdp, tol, max_iter)?;
    if !vi.converged {
        return Err(CliError::Failure(format!("value iteration did not converge in {max_iter} sweeps")));
    }
    Ok(vi.values)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: [&str; 2], rows: impl IntoIterator<Item = [String; 2]>) -> CliResult {
    let io_err = |e: csv::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn validate(path: &Path) -> CliResult {
    let model = load_mdp(path)?;
    let report = validate_mdp(&model);
    if report.is_ok() {
        println!("ok: {} states, {} actions, discount {}", model.states.len(), model.actions.len(), model.discount);
        return Ok(());
    }
    println!("{report}");
    Err(CliError::Failure(format!("{}: {} violation(s)", path.display(), report.violations.len())))
}

fn solve_expected(path: &Path, tol: f64, max_iter: usize, out: Option<&Path>, policy_out: Option<&Path>) -> CliResult {
    let mdp = load(path)?;
    let vi = value_iteration(&mdp, tol, max_iter)?;
    let policy = greedy_policy(&mdp, &vi.values);
    for (s, (name, action)) in policy.to_names(&mdp).into_iter().enumerate() {
        println!("{name}\t{action}\t{:.6}", vi.values.get(s));
    }
    if let Some(out) = out {
        let rows = (0..mdp.n_states()).map(|s| [mdp.state_name(s).to_string(), vi.values.get(s).to_string()]);
        write_rows(out, ["state", "value"], rows)?;
    }
    if let Some(policy_out) = policy_out {
        save_policy(&mdp, &policy, policy_out)?;
    }
    if !vi.converged {
        return Err(CliError::Failure(format!(
            "value iteration did not converge in {max_iter} sweeps (last change {:e})",
            vi.residuals.last().copied().unwrap_or(f64::INFINITY)
        )));
    }
    println!("converged after {} sweeps", vi.iterations);
    Ok(())
}

fn status_error(status: SolveStatus, sweeps: usize, residual: f64) -> CliResult {
    match status {
        SolveStatus::Converged => Ok(()),
        SolveStatus::MaxIterations => Err(CliError::Failure(format!(
            "outage solver did not converge in {sweeps} sweeps (last change {residual:e})"
        ))),
        SolveStatus::Oscillating => Err(CliError::Failure(format!(
            "outage solver stopped after {sweeps} sweeps: policy oscillates between two choices"
        ))),
    }
}

fn solve_outage_cmd(
    path: &Path,
    alpha: f64,
    grid: &GridArgs,
    cfg: &SolverConfig,
    out: Option<&Path>,
    policy_out: Option<&Path>,
) -> CliResult {
    let mdp = load(path)?;
    let values = optimal_values(&mdp, cfg.tol, cfg.max_iter)?;
    let (grids, init) = grids_and_init(&mdp, grid, &values)?;
    let sol = solve_outage(&mdp, &grids, OutageQuery { alpha }, &init, cfg)?;
    for s in 0..mdp.n_states() {
        let a = sol.policy.action(s);
        let q: Vec<String> = sol.q[s].iter().map(|&(b, q)| format!("{}={q:.6}", mdp.action_name(b))).collect();
        println!(
            "{}\t{}\t{:.6}\tQ: {}",
            mdp.state_name(s),
            mdp.action_name(a),
            sol.q_value(s, a).expect("chosen action has a Q value"),
            q.join(" ")
        );
    }
    if let Some(out) = out {
        save_distributions(&mdp, &sol.distributions, out)?;
    }
    if let Some(policy_out) = policy_out {
        save_policy(&mdp, &sol.policy, policy_out)?;
    }
    status_error(sol.status, sol.sweeps, sol.residual)?;
    println!("converged after {} sweeps", sol.sweeps);
    Ok(())
}

fn sample_points(lo: f64, hi: f64, steps: usize) -> CliResult<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(CliError::Usage(format!("need finite xs-min ≤ xs-max, got {lo} and {hi}")));
    }
    match steps {
        0 => Err(CliError::Usage("xs-steps must be at least 1".into())),
        1 => Ok(vec![lo]),
        n => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

fn ccdf(args: &CcdfArgs) -> CliResult {
    let mdp = load(&args.mdp)?;
    let start = mdp.state_index(&args.state).ok_or_else(|| CliError::Usage(format!("unknown state {}", args.state)))?;
    let (span_lo, span_hi) = gain_span(&mdp);
    let (lo, hi) = (args.xs_min.unwrap_or(span_lo), args.xs_max.unwrap_or(span_hi));
    let xs = sample_points(lo, hi, args.xs_steps)?;
    let curve = match (args.mode, &args.policy, &args.from_dists) {
        (ModeArg::MonteCarlo, Some(policy), _) => {
            eprintln!(
                "ccdf: mode=monte-carlo state={} episodes={} seed={} truncation-eps={:e} xs={lo}..{hi} ({} points)",
                args.state, args.episodes, args.seed, args.truncation_eps, args.xs_steps
            );
            let policy = load_policy(&mdp, policy)?;
            let cfg = RolloutConfig { episodes: args.episodes, truncation_eps: args.truncation_eps, seed: args.seed };
            let gains = simulate_gains(&mdp, &policy, start, &cfg)?;
            empirical_ccdf(&gains, &xs)?
        }
        (ModeArg::MonteCarlo, None, _) => {
            return Err(CliError::Usage("monte-carlo mode needs --policy".into()));
        }
        (ModeArg::Analytic, Some(policy), _) => {
            eprintln!(
                "ccdf: mode=analytic state={} {} tol={:e} max-iter={} xs={lo}..{hi} ({} points)",
                args.state,
                describe(&args.grid),
                args.tol,
                args.max_iter,
                args.xs_steps
            );
            let policy = load_policy(&mdp, policy)?;
            let dist = analytic_distribution(&mdp, &policy, start, args)?;
            dist.ccdf(&xs)?
        }
        (ModeArg::Analytic, None, Some(dists)) => {
            eprintln!(
                "ccdf: mode=analytic state={} from-dists={} xs={lo}..{hi} ({} points)",
                args.state,
                dists.display(),
                args.xs_steps
            );
            load_distributions(&mdp, dists)?.swap_remove(start).ccdf(&xs)?
        }
        (ModeArg::Analytic, None, None) => unreachable!("argument parser requires --policy or --from-dists"),
    };
    let rows = xs.iter().zip(&curve).map(|(x, c)| [x.to_string(), c.to_string()]);
    match &args.out {
        Some(out) => write_rows(out, ["x", "ccdf"], rows),
        None => {
            println!("x,ccdf");
            for [x, c] in rows {
                println!("{x},{c}");
            }
            Ok(())
        }
    }
}

fn analytic_distribution(mdp: &Mdp, policy: &Policy, start: usize, args: &CcdfArgs) -> CliResult<StateDistribution> {
    let values = policy_evaluation_exact(mdp, policy);
    let (grids, init) = grids_and_init(mdp, &args.grid, &values)?;
    let cfg = SolverConfig { tol: args.tol, max_iter: args.max_iter, sweep: SweepMode::InPlace };
    let sol = evaluate_policy_distribution(mdp, policy, &grids, &init, &cfg)?;
    if !sol.converged {
        return Err(CliError::Failure(format!(
            "distribution evaluation did not converge in {} sweeps (last change {:e})",
            sol.sweeps, sol.residual
        )));
    }
    Ok(sol.distributions.into_iter().nth(start).expect("start state exists"))
}

fn compare(path: &Path, alpha: f64, grid: &GridArgs, tol: f64, max_iter: usize) -> CliResult {
    let mdp = load(path)?;
    let values = optimal_values(&mdp, tol, max_iter)?;
    let expected_policy = greedy_policy(&mdp, &values);
    let v = policy_evaluation_exact(&mdp, &expected_policy);
    let (grids, init) = grids_and_init(&mdp, grid, &values)?;
    let cfg = SolverConfig { tol, max_iter, sweep: SweepMode::InPlace };
    let outage = solve_outage(&mdp, &grids, OutageQuery { alpha }, &init, &cfg)?;
    let outage_values = outage.values();
    // Outage probability of the expected-gain policy on the same grids.
    let baseline = evaluate_policy_distribution(&mdp, &expected_policy, &grids, &init, &cfg)?;

    println!("state\texpected-gain policy\tv(s)\tp(G>α)\toutage policy\tv(s,α)");
    let mut differ = Vec::new();
    for s in 0..mdp.n_states() {
        let (a_exp, a_out) = (expected_policy.action(s), outage.policy.action(s));
        if a_exp != a_out {
            differ.push(mdp.state_name(s));
        }
        println!(
            "{}\t{}\t{:.6}\t{:.6}\t{}\t{:.6}",
            mdp.state_name(s),
            mdp.action_name(a_exp),
            v.get(s),
            baseline.distributions[s].outage_value(alpha),
            mdp.action_name(a_out),
            outage_values[s]
        );
    }
    if differ.is_empty() {
        println!("policies identical at α = {alpha}");
    } else {
        println!("policies differ at α = {alpha} in: {}", differ.join(", "));
    }
    if !baseline.converged {
        return Err(CliError::Failure(format!(
            "distribution evaluation did not converge in {} sweeps",
            baseline.sweeps
        )));
    }
    status_error(outage.status, outage.sweeps, outage.residual)
}

fn td_demo(args: &TdArgs) -> CliResult {
    let loss = match args.loss {
        LossArg::Squared => Loss::SquaredDifference,
        LossArg::Kl => Loss::KlDivergence,
    };
    let loss_name = match args.loss {
        LossArg::Squared => "squared",
        LossArg::Kl => "kl",
    };
    let outcome: MixtureOutcome = if args.one_step {
        eprintln!(
            "td-demo: one-step p={} mean1={} mean2={} bins={} loss={loss_name}",
            args.p, args.mean1, args.mean2, args.bins
        );
        mixture_one_step(args.p, args.mean1, args.mean2, args.bins, loss)?
    } else {
        eprintln!(
            "td-demo: p={} mean1={} mean2={} bins={} steps={} lr={} loss={loss_name} seed={}",
            args.p, args.mean1, args.mean2, args.bins, args.steps, args.lr, args.seed
        );
        let cfg = TdConfig { learning_rate: args.lr, loss, steps: args.steps, seed: args.seed };
        mixture_experiment(args.p, args.mean1, args.mean2, args.bins, &cfg)?
    };
    if let Some(out) = &args.out {
        let rows = outcome.trace.iter().map(|(step, l1)| [step.to_string(), l1.to_string()]);
        write_rows(out, ["step", "l1_error"], rows)?;
    }
    println!("final l1_error = {}", outcome.l1_error);
    Ok(())
}
