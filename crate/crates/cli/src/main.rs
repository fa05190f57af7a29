//! `emin`: assemble model problems, build and measure hierarchies, run
//! parameter sweeps and dense diagnostics.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use emin_amg::coarsening::{cf_split, pattern_distance_k, strength_graph};
use emin_amg::energymin::{energy_min_interpolation, prepare_candidates, CandidateSet, CgControl};
use emin_amg::experiments::{
    build_candidates, convergence_report, run_experiment_to_file, ExperimentConfig,
    CF_ITERATIONS,
};
use emin_amg::hierarchy::{setup, solve, stationary_history, Accel, Mode};
use emin_amg::problems::{assemble, ProblemKind, ProblemSpec};
use emin_amg::smoothing::{BoundRelaxation, Relaxation, SpectralEquivalence};
use emin_amg::sparse::{read_matrix_market_file, write_matrix_market, write_matrix_market_file, MmSymmetry, SparseMatrix};
use emin_amg::sylvester::{sylvester_cg, MatrixEquation};
use emin_amg::theory::{theory_report, MAX_DENSE_N};
use emin_amg::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "emin", version, about = "Energy-minimization AMG experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a model problem and write it in Matrix Market format.
    Assemble(ProblemArgs),
    /// Build one hierarchy, measure its convergence and solve a random system.
    Solve(SolveArgs),
    /// Run a parameter sweep and write one CSV row per grid point.
    Sweep(SweepArgs),
    /// Dense two-grid diagnostics for a small Matrix Market operator.
    Theory(TheoryArgs),
    /// Solve `A W B + C W D = F` read from Matrix Market files.
    Sylvester(SylvesterArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Experiment configuration (JSON); its `problem` is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    problem: Option<ProblemKind>,
    /// Cells per side of the unit square.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Coefficient contrast of the oscillatory problem.
    #[arg(long = "k")]
    k: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SetupArgs {
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    tau: Option<f64>,
    /// Energy-minimization iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    setup: SetupArgs,
    /// Relative residual target of the CG-accelerated solve.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    setup: SetupArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Symmetric positive definite operator with at most 500 rows.
    matrix: PathBuf,
    #[command(flatten)]
    setup: SetupArgs,
    #[arg(long, default_value_t = 2)]
    degree: usize,
}

#[derive(Args)]
struct SylvesterArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    d: PathBuf,
    #[arg(long)]
    f: PathBuf,
    /// Defaults to the identity.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Defaults to the identity.
    #[arg(long)]
    c: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Where to write `W`; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Diverged(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch(_)
            | Error::MatrixMarket { .. }
            | Error::Json(_)
            | Error::NotSymmetric { .. } => Failure::Config(e.to_string()),
            Error::NoConvergence | Error::Indefinite { .. } | Error::Breakdown { .. } => {
                Failure::Diverged(e.to_string())
            }
            _ => Failure::Other(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn parse_kind(s: &str) -> std::result::Result<ProblemKind, String> {
    match s {
        "rotated_anisotropic" => Ok(ProblemKind::RotatedAnisotropic),
        "oscillatory" => Ok(ProblemKind::Oscillatory),
        _ => Err(format!("unknown problem `{s}` (rotated_anisotropic | oscillatory)")),
    }
}

fn load_config(path: &Path) -> std::result::Result<ExperimentConfig, Failure> {
    ExperimentConfig::from_json_file(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn problem_spec(args: &ProblemArgs) -> std::result::Result<ProblemSpec, Failure> {
    let base = match &args.config {
        Some(p) => Some(load_config(p)?.problem),
        None => None,
    };
    let kind = args
        .problem
        .or(base.map(|b| b.kind))
        .ok_or_else(|| Failure::Config("give --problem or --config".into()))?;
    let n = args
        .n
        .or(base.map(|b| b.n))
        .ok_or_else(|| Failure::Config("give --n or --config".into()))?;
    let mut spec = match kind {
        ProblemKind::RotatedAnisotropic => ProblemSpec::rotated_anisotropic(n, 1.0, emin_amg::problems::DEFAULT_THETA),
        ProblemKind::Oscillatory => ProblemSpec::oscillatory(n, 1.0),
    };
    if let Some(b) = base.filter(|b| b.kind == kind) {
        spec = ProblemSpec { n, ..b };
    }
    if let Some(e) = args.epsilon {
        spec.epsilon = e;
    }
    if let Some(t) = args.theta {
        spec.theta = t;
    }
    if let Some(k) = args.k {
        spec.k = k;
    }
    spec.validate()?;
    Ok(spec)
}

fn apply_setup_overrides(cfg: &mut ExperimentConfig, s: &SetupArgs) {
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    if let Some(it) = s.iters {
        cfg.emin_iters = vec![it];
    }
    match s.mode {
        Some(Mode::Weighted) => {
            cfg.constrained = false;
            if let Some(t) = s.tau {
                cfg.weighted_taus = vec![t];
            }
        }
        Some(Mode::Constrained) => {
            cfg.constrained = true;
            cfg.weighted_taus.clear();
        }
        None => {
            if let Some(t) = s.tau {
                cfg.weighted_taus = vec![t];
            }
        }
    }
}

fn write_or_print(out: Option<&Path>, a: &SparseMatrix, sym: MmSymmetry) -> emin_amg::Result<()> {
    match out {
        Some(p) => write_matrix_market_file(p, a, sym),
        None => write_matrix_market(std::io::stdout().lock(), a, sym),
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn cmd_assemble(args: &ProblemArgs) -> CliResult {
    let spec = problem_spec(args)?;
    let problem = assemble(&spec)?;
    write_or_print(args.out.as_deref(), &problem.matrix, MmSymmetry::Symmetric)?;
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> CliResult {
    let spec = problem_spec(&args.problem)?;
    let mut cfg = match &args.problem.config {
        Some(p) => load_config(p)?,
        None => {
            let mut c = ExperimentConfig::default_sweep(spec);
            c.emin_iters = vec![5];
            c.weighted_taus.clear();
            c.pattern_degree = 2;
            c
        }
    };
    cfg.problem = spec;
    apply_setup_overrides(&mut cfg, &args.setup);
    cfg.validate()?;
    let point = cfg.grid()[0];
    let problem = assemble(&cfg.problem)?;
    let scfg = cfg.setup_config(&point);
    let cands = build_candidates(&problem, &cfg, &scfg)?;
    let h = setup(&problem.matrix, &scfg, &cands.vectors)?;
    let history = stationary_history(&h, CF_ITERATIONS, cfg.seed)?;
    let report = convergence_report(&h, &history)?;

    let n = problem.matrix.nrows();
    let x_true: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let b = problem.matrix.spmv(&x_true)?;
    let out = solve(&h, &b, None, args.tol, args.max_iters, Accel::Cg)?;
    print_json(&serde_json::json!({
        "problem": cfg.problem,
        "mode": point.mode.name(),
        "tau": point.tau,
        "emin_iters": point.emin_iters,
        "levels": h.sizes(),
        "report": report,
        "cg_iterations": out.iterations,
        "cg_converged": out.converged,
        "final_relative_residual": out.residual_history.last().copied().unwrap_or(0.0) / out.residual_history[0].max(f64::MIN_POSITIVE),
    }));
    if !report.converged || out.diverged {
        return Err(Failure::Diverged(format!("convergence factor {:.3}", report.cf)));
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let mut cfg = load_config(&args.config)?;
    apply_setup_overrides(&mut cfg, &args.setup);
    cfg.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Failure::Config("no output path: give --out or set `output`".into()))?;
    let rows = run_experiment_to_file(&cfg, Some(&out))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_theory(args: &TheoryArgs) -> CliResult {
    let a = read_matrix_market_file(&args.matrix)?;
    if a.nrows() > MAX_DENSE_N {
        return Err(Failure::Config(format!(
            "{} has {} rows; the dense diagnostics accept at most {MAX_DENSE_N}",
            args.matrix.display(),
            a.nrows()
        )));
    }
    if !a.is_symmetric(1e-12 * a.max_abs()) {
        return Err(Failure::Config("operator is not symmetric".into()));
    }
    let graph = strength_graph(&a, 0.25)?;
    let split = cf_split(&graph);
    let pattern = Arc::new(pattern_distance_k(&graph, &split, args.degree)?);
    let cands = prepare_candidates(&a, &CandidateSet::constant(a.nrows()).vectors)?;
    let mode = match args.setup.mode.unwrap_or(Mode::Constrained) {
        Mode::Constrained => emin_amg::energymin::EminMode::Constrained,
        Mode::Weighted => emin_amg::energymin::EminMode::Weighted {
            tau: args.setup.tau.unwrap_or(1e-7),
        },
    };
    let ctl = CgControl {
        max_iters: args.setup.iters.unwrap_or(5),
        ..CgControl::default()
    };
    let x = SpectralEquivalence::default();
    let (interp, _) = energy_min_interpolation(&a, &split, &cands, pattern, mode, &x, ctl)?;
    let ad = a.to_dense();
    let m = BoundRelaxation::new(Relaxation::jacobi(1.0, 1), &a, true)?
        .as_relaxation()
        .dense_m(&ad);
    let report = theory_report(&ad, &m, &x, &split, &interp.p.to_dense())?;
    print_json(&serde_json::json!({
        "n": a.nrows(),
        "nc": split.nc(),
        "report": report,
    }));
    Ok(())
}

fn read_dense(path: &Path) -> std::result::Result<emin_amg::sparse::DenseMatrix, Failure> {
    Ok(read_matrix_market_file(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        .to_dense())
}

fn cmd_sylvester(args: &SylvesterArgs) -> CliResult {
    let a = read_dense(&args.a)?;
    let d = read_dense(&args.d)?;
    let f = read_dense(&args.f)?;
    let (n, m) = f.shape();
    let b = match &args.b {
        Some(p) => read_dense(p)?,
        None => emin_amg::sparse::DenseMatrix::identity(m),
    };
    let c = match &args.c {
        Some(p) => read_dense(p)?,
        None => emin_amg::sparse::DenseMatrix::identity(n),
    };
    let eq = MatrixEquation::new(a, b, c, d, f)?;
    let out = sylvester_cg(&eq, args.max_iters, args.tol)?;
    write_or_print(args.out.as_deref(), &SparseMatrix::from_dense(&out.w), MmSymmetry::General)?;
    eprintln!(
        "iterations {} residual {:e} converged {}",
        out.iterations,
        out.residual_history.last().copied().unwrap_or(0.0),
        out.converged
    );
    if !out.converged {
        return Err(Failure::Diverged(format!("no convergence in {} iterations", args.max_iters)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Assemble(a) => cmd_assemble(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Sylvester(a) => cmd_sylvester(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Diverged(msg)) => {
            eprintln!("diverged: {msg}");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
