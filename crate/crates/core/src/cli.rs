//! Command-line front end. Exit codes: 0 all checks pass, 1 a check failed
//! or a solve aborted, 2 bad input.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::junction::{solve_linear, solve_quadratic};
use crate::pde::{extract_policy, solve_backward, write_junction_csv, write_value_csv, FeedbackPolicy, ValueGrid};
use crate::problem::{validate_problem, CheckStatus, ControlProblem};
use crate::scenario::Scenario;
use crate::sim::{simulate_ensemble, simulate_ensemble_sequential, write_ensemble_csv, write_trace_csv, SimulationConfig};
use crate::verify::verify;

#[derive(Debug, Parser)]
#[command(name = "junction-control", version, about = "Optimal control of diffusions on a star junction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing assumptions and the terminal compatibility condition.
    Validate(ScenarioArgs),
    /// Solve the junction problem for an inline gradient vector.
    Qp(QpArgs),
    /// Solve the HJB system and write the value grid and junction table.
    Solve(ScenarioArgs),
    /// Simulate the optimally controlled process and write per-path costs.
    Simulate(SimulateArgs),
    /// Compare Monte Carlo costs against the value function.
    Verify(ScenarioArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file, or the name of a shipped scenario.
    scenario: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Also dump full traces of the first N paths.
    #[arg(long, value_name = "N")]
    trace: Option<usize>,
    /// Run the ensemble on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Linear,
    Quadratic,
}

#[derive(Debug, Args)]
struct QpArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    p: Vec<f64>,
    #[arg(long)]
    floor: f64,
    #[arg(long, value_enum, default_value = "linear")]
    mode: Mode,
    /// Quadratic weights `sigma_i(0)^2`; all ones when omitted.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

enum Failure {
    Input(Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Scenario(_) | Error::InvalidProblem(_) | Error::InvalidGrid(_) | Error::InvalidSimulation(_)
            | Error::EmptyControlSet { .. } | Error::Ellipticity { .. } => Failure::Input(e),
            other => Failure::Run(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

type Outcome = std::result::Result<bool, Failure>;

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Qp(a) => cmd_qp(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Scenario with command-line overrides applied.
fn load(args: &ScenarioArgs) -> std::result::Result<Scenario, Failure> {
    let mut s = Scenario::resolve(&args.scenario)?;
    if let Some(v) = args.nx {
        s.grid.n_space = v;
    }
    if let Some(v) = args.nt {
        s.grid.n_time = v;
    }
    if let Some(v) = args.length {
        s.geometry.length = v;
    }
    if let Some(v) = args.n_paths {
        s.monte_carlo.n_paths = v;
    }
    if let Some(v) = args.dt {
        s.monte_carlo.dt = v;
    }
    if args.seed.is_some() {
        s.monte_carlo.seed = args.seed;
    }
    Ok(s)
}

fn out_dir(args: &ScenarioArgs, s: &Scenario) -> std::io::Result<PathBuf> {
    let dir = args.out_dir.clone().unwrap_or_else(|| PathBuf::from(s.output_dir()));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: PathBuf) -> std::io::Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new)
}

/// Short decimal form: at most 12 significant decimals, trailing zeros dropped.
fn short(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn cmd_qp(a: &QpArgs) -> Outcome {
    let eval = match a.mode {
        Mode::Linear => solve_linear(&a.p, a.floor)?,
        Mode::Quadratic => {
            let w = a.weights.clone().unwrap_or_else(|| vec![1.0; a.p.len()]);
            solve_quadratic(&a.p, &w, a.floor)?
        }
    };
    let alpha: Vec<String> = eval.argmin.iter().map(|&x| short(x)).collect();
    println!("alpha=[{}]", alpha.join(","));
    println!("H0={}", short(eval.value));
    Ok(true)
}

/// Prints warnings for failed compatibility, which solve/simulate/verify tolerate.
fn prepare(s: &Scenario) -> std::result::Result<ControlProblem, Failure> {
    let problem = s.problem()?;
    let report = validate_problem(&problem, s.grid.n_space)?;
    for c in report.checks.iter().filter(|c| c.status != CheckStatus::Pass) {
        eprintln!("warning: {} ({})", c.name, c.detail);
    }
    Ok(problem)
}

fn cmd_validate(args: &ScenarioArgs) -> Outcome {
    let s = load(args)?;
    let problem = s.problem()?;
    let report = validate_problem(&problem, s.grid.n_space)?;
    for c in &report.checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Warn => "WARN",
            CheckStatus::Fail => "FAIL",
        };
        println!("[{tag}] {:<22} {}", c.name, c.detail);
    }
    Ok(report.passed())
}

fn solve(s: &Scenario, problem: &ControlProblem) -> std::result::Result<(ValueGrid, FeedbackPolicy), Failure> {
    let vg = solve_backward(problem, s.grid()?)?;
    let policy = extract_policy(problem, &vg)?;
    Ok((vg, policy))
}

fn cmd_solve(args: &ScenarioArgs) -> Outcome {
    let s = load(args)?;
    let problem = prepare(&s)?;
    let (vg, policy) = solve(&s, &problem)?;
    let dir = out_dir(args, &s)?;
    let mut w = create(dir.join("value_grid.csv"))?;
    write_value_csv(&vg, &mut w)?;
    w.flush()?;
    let mut w = create(dir.join("junction.csv"))?;
    write_junction_csv(&vg, &problem.junction_hamiltonian(), &mut w)?;
    w.flush()?;
    let residual = vg.max_junction_residual();
    println!("u(t0, 0) = {:.10}", vg.junction_value(0));
    println!("max junction residual = {residual:e}");
    println!("clipped edge controls = {}", policy.clip_count);
    println!("wrote {}", dir.display());
    Ok(residual <= crate::pde::JUNCTION_TOL)
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome {
    let s = load(&args.common)?;
    let params = s.mc_params()?;
    let start = s.start_point()?;
    let problem = prepare(&s)?;
    let (vg, policy) = solve(&s, &problem)?;
    let config = SimulationConfig::new(vg.initial_time(), params.dt);
    let ensemble = if args.sequential {
        simulate_ensemble_sequential(&problem, &policy, start, &config, params.n_paths, params.seed)?
    } else {
        simulate_ensemble(&problem, &policy, start, &config, params.n_paths, params.seed)?
    };
    let dir = out_dir(&args.common, &s)?;
    let mut w = create(dir.join("ensemble.csv"))?;
    write_ensemble_csv(&ensemble, &mut w)?;
    w.flush()?;
    if let Some(n) = args.trace {
        let traced = simulate_ensemble_sequential(
            &problem,
            &policy,
            start,
            &config.clone().with_trace(),
            n.min(params.n_paths).max(1),
            params.seed,
        )?;
        let mut w = create(dir.join("trace.csv"))?;
        write_trace_csv(&traced.paths, &mut w)?;
        w.flush()?;
    }
    let (mean, se) = ensemble.mean_and_se(|p| p.total);
    let (l_mean, l_se) = ensemble.mean_and_se(|p| p.local_time);
    println!("mean cost = {mean:.6} +- {se:.6}");
    println!("mean local time = {l_mean:.6} +- {l_se:.6}");
    println!("wrote {}", dir.display());
    Ok(true)
}

fn cmd_verify(args: &ScenarioArgs) -> Outcome {
    let s = load(args)?;
    let params = s.mc_params()?;
    let start = s.start_point()?;
    let problem = prepare(&s)?;
    let (vg, policy) = solve(&s, &problem)?;
    let report = verify(&problem, &vg, &policy, start, params)?;
    let dir = out_dir(args, &s)?;
    let text = report.to_text();
    print!("{text}");
    fs::write(dir.join("verification.txt"), &text)?;
    let mut w = create(dir.join("verification.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(report.passed())
}
