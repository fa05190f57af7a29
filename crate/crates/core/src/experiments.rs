//! Convergence metrics, adaptive candidates and the parameter-sweep harness.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energymin::CandidateSet;
use crate::error::{Error, Result};
use crate::hierarchy::{setup, stationary_history, Hierarchy, Mode, SetupConfig};
use crate::problems::{assemble, Problem, ProblemKind, ProblemSpec};
use crate::smoothing::BoundRelaxation;
use crate::sparse::{norm2, DenseMatrix, SparseMatrix};

/// Stationary iterations run for a convergence measurement.
pub const CF_ITERATIONS: usize = 30;
/// Trailing residual ratios averaged into the convergence factor.
pub const CF_WINDOW: usize = 10;

pub const CSV_HEADER: &str = "problem,n,epsilon,theta,K,mode,tau,pattern_degree,emin_iters,n_vecs,imp_iters,seed,levels,oc,cc,cf,wpd,converged";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub cf: f64,
    pub oc: f64,
    pub cc: f64,
    /// Work units per digit; infinite when `cf >= 1`.
    pub wpd: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Metrics from a residual history and the complexities of a hierarchy.
pub fn convergence_report(h: &Hierarchy, history: &[f64]) -> Result<ConvergenceReport> {
    report_from_parts(h.operator_complexity(), h.cycle_complexity(), history)
}

/// `cf` is the geometric mean of the last [`CF_WINDOW`] residual ratios and
/// `wpd = -cc / log10(cf)`.
pub fn report_from_parts(oc: f64, cc: f64, history: &[f64]) -> Result<ConvergenceReport> {
    let needed = CF_WINDOW + 2;
    if history.len() < needed {
        return Err(Error::HistoryTooShort {
            needed,
            got: history.len(),
        });
    }
    let last = history[history.len() - 1];
    let first = history[history.len() - 1 - CF_WINDOW];
    let cf = if first == 0.0 || last == 0.0 {
        0.0
    } else {
        (last / first).powf(1.0 / CF_WINDOW as f64)
    };
    let converged = cf.is_finite() && cf < 1.0;
    let wpd = if cf == 0.0 {
        0.0
    } else if converged {
        -cc / cf.log10()
    } else {
        f64::INFINITY
    };
    Ok(ConvergenceReport {
        cf,
        oc,
        cc,
        wpd,
        iterations: history.len() - 1,
        converged,
    })
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn normalize(v: &mut [f64]) {
    let nrm = norm2(v);
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// Improves `v` towards the near-kernel of `a` by relaxing `A x = 0`.
///
/// Candidate 0 uses `iters` Jacobi sweeps; later candidates use `iters`
/// V-cycles of `hierarchy`, which must then be present.
pub fn improve_candidate(
    a: &SparseMatrix,
    hierarchy: Option<&Hierarchy>,
    index: usize,
    mut v: Vec<f64>,
    iters: usize,
    cfg: &SetupConfig,
) -> Result<Vec<f64>> {
    let zero = vec![0.0; a.nrows()];
    if index == 0 {
        let mut rel = cfg.relaxation;
        rel.sweeps = 1;
        let jacobi = BoundRelaxation::new(rel, a, cfg.spectral_scaling)?;
        for _ in 0..iters {
            jacobi.apply(a, &mut v, &zero);
        }
    } else {
        let h = hierarchy.ok_or(Error::MissingHierarchy(index))?;
        for _ in 0..iters {
            v = h.vcycle(0, &v, &zero)?;
        }
    }
    normalize(&mut v);
    Ok(v)
}

/// Builds `n_vecs` candidates: a Jacobi-improved random vector, then each
/// further random vector improved by V-cycles of the hierarchy built from
/// the candidates so far. `existing`, when given, replaces the hierarchy
/// that would be built from the first candidate.
pub fn adaptive_constraints(
    a: &SparseMatrix,
    existing: Option<&Hierarchy>,
    n_vecs: usize,
    improvement_iters: usize,
    seed: u64,
    cfg: &SetupConfig,
) -> Result<CandidateSet> {
    if n_vecs == 0 {
        return Err(Error::InvalidParameter("n_vecs must be at least 1".into()));
    }
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n_vecs);
    let mut built: Option<Hierarchy>;
    for k in 0..n_vecs {
        let v = random_vector(&mut rng, n);
        let h = if k == 0 {
            None
        } else if k == 1 && existing.is_some() {
            existing
        } else {
            built = Some(setup(a, cfg, &DenseMatrix::from_columns(&vecs))?);
            built.as_ref()
        };
        vecs.push(improve_candidate(a, h, k, v, improvement_iters, cfg)?);
    }
    CandidateSet::new(DenseMatrix::from_columns(&vecs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    Constant,
    /// The constant vector after `candidate_sweeps` Jacobi sweeps on `A x = 0`.
    SmoothedConstant,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub weighted_taus: Vec<f64>,
    #[serde(default)]
    pub constrained: bool,
    pub emin_iters: Vec<usize>,
    pub pattern_degree: usize,
    #[serde(default = "one")]
    pub n_constraint_vectors: usize,
    #[serde(default)]
    pub improvement_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "smoothed_kind")]
    pub candidates: CandidateKind,
    #[serde(default = "default_candidate_sweeps")]
    pub candidate_sweeps: usize,
    #[serde(default = "yes")]
    pub precondition: bool,
    #[serde(default = "default_max_levels")]
    pub max_levels: usize,
    #[serde(default = "default_max_coarse")]
    pub max_coarse: usize,
    #[serde(default = "default_theta_strength")]
    pub theta_strength: f64,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn smoothed_kind() -> CandidateKind {
    CandidateKind::SmoothedConstant
}

fn default_candidate_sweeps() -> usize {
    5
}

fn default_max_levels() -> usize {
    SetupConfig::default().max_levels
}

fn default_max_coarse() -> usize {
    SetupConfig::default().max_coarse
}

fn default_theta_strength() -> f64 {
    SetupConfig::default().theta_strength
}

impl ExperimentConfig {
    /// The weighted-versus-constrained sweep: τ in {1e-1, 1e-4, 1e-7} and
    /// 1 to 19 iterations, pattern degree 4 for the rotated problem and 3
    /// for the oscillatory one.
    pub fn default_sweep(problem: ProblemSpec) -> Self {
        let pattern_degree = match problem.kind {
            ProblemKind::RotatedAnisotropic => 4,
            ProblemKind::Oscillatory => 3,
        };
        ExperimentConfig {
            problem,
            weighted_taus: vec![1e-1, 1e-4, 1e-7],
            constrained: true,
            emin_iters: (1..=19).collect(),
            pattern_degree,
            n_constraint_vectors: 1,
            improvement_iters: 0,
            seed: 0,
            output: None,
            candidates: CandidateKind::SmoothedConstant,
            candidate_sweeps: default_candidate_sweeps(),
            precondition: true,
            max_levels: default_max_levels(),
            max_coarse: default_max_coarse(),
            theta_strength: default_theta_strength(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.emin_iters.is_empty() {
            return Err(Error::InvalidParameter("emin_iters grid is empty".into()));
        }
        if self.weighted_taus.is_empty() && !self.constrained {
            return Err(Error::InvalidParameter(
                "no modes selected: give weighted_taus or constrained = true".into(),
            ));
        }
        if self.candidates == CandidateKind::Adaptive && self.n_constraint_vectors == 0 {
            return Err(Error::InvalidParameter("n_constraint_vectors must be at least 1".into()));
        }
        for &t in &self.weighted_taus {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParameter(format!("tau = {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Grid points in emission order: weighted rows by tau, then constrained rows.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut g = Vec::new();
        for &tau in &self.weighted_taus {
            for &iters in &self.emin_iters {
                g.push(GridPoint {
                    mode: Mode::Weighted,
                    tau: Some(tau),
                    emin_iters: iters,
                });
            }
        }
        if self.constrained {
            for &iters in &self.emin_iters {
                g.push(GridPoint {
                    mode: Mode::Constrained,
                    tau: None,
                    emin_iters: iters,
                });
            }
        }
        g
    }

    pub fn setup_config(&self, point: &GridPoint) -> SetupConfig {
        SetupConfig {
            mode: point.mode,
            tau: point.tau.unwrap_or(SetupConfig::default().tau),
            pattern_degree: self.pattern_degree,
            emin_iters: point.emin_iters,
            precondition: self.precondition,
            max_levels: self.max_levels,
            max_coarse: self.max_coarse,
            theta_strength: self.theta_strength,
            ..SetupConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub mode: Mode,
    pub tau: Option<f64>,
    pub emin_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub problem: String,
    pub n: usize,
    pub epsilon: f64,
    pub theta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub mode: String,
    pub tau: Option<f64>,
    pub pattern_degree: usize,
    pub emin_iters: usize,
    pub n_vecs: usize,
    pub imp_iters: usize,
    pub seed: u64,
    pub levels: usize,
    pub oc: f64,
    pub cc: f64,
    pub cf: f64,
    pub wpd: f64,
    pub converged: bool,
}

/// Candidates for one grid point.
pub fn build_candidates(
    problem: &Problem,
    cfg: &ExperimentConfig,
    setup_cfg: &SetupConfig,
) -> Result<CandidateSet> {
    match cfg.candidates {
        CandidateKind::Constant => Ok(CandidateSet::constant(problem.matrix.nrows())),
        CandidateKind::SmoothedConstant => {
            let n = problem.matrix.nrows();
            let v = improve_candidate(&problem.matrix, None, 0, vec![1.0; n], cfg.candidate_sweeps, setup_cfg)?;
            CandidateSet::new(DenseMatrix::from_columns(&[v]))
        }
        CandidateKind::Adaptive => adaptive_constraints(
            &problem.matrix,
            None,
            cfg.n_constraint_vectors,
            cfg.improvement_iters,
            cfg.seed,
            setup_cfg,
        ),
    }
}

/// Sets up and measures one grid point.
pub fn run_point(problem: &Problem, cfg: &ExperimentConfig, point: &GridPoint) -> Result<(Hierarchy, ConvergenceReport)> {
    let scfg = cfg.setup_config(point);
    let cands = build_candidates(problem, cfg, &scfg)?;
    let h = setup(&problem.matrix, &scfg, &cands.vectors)?;
    let history = stationary_history(&h, CF_ITERATIONS, cfg.seed)?;
    let report = convergence_report(&h, &history)?;
    Ok((h, report))
}

/// Runs every grid point (in parallel) and returns rows in grid order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let problem = assemble(&cfg.problem)?;
    let grid = cfg.grid();
    let (n_vecs, imp_iters) = match cfg.candidates {
        CandidateKind::Constant => (1, 0),
        CandidateKind::SmoothedConstant => (1, cfg.candidate_sweeps),
        CandidateKind::Adaptive => (cfg.n_constraint_vectors, cfg.improvement_iters),
    };
    grid.par_iter()
        .map(|point| {
            let (h, rep) = run_point(&problem, cfg, point)?;
            Ok(ExperimentRow {
                problem: cfg.problem.kind.name().to_string(),
                n: cfg.problem.n,
                epsilon: cfg.problem.epsilon,
                theta: cfg.problem.theta,
                k: cfg.problem.k,
                mode: point.mode.name().to_string(),
                tau: point.tau,
                pattern_degree: cfg.pattern_degree,
                emin_iters: point.emin_iters,
                n_vecs,
                imp_iters,
                seed: cfg.seed,
                levels: h.n_levels(),
                oc: rep.oc,
                cc: rep.cc,
                cf: rep.cf,
                wpd: rep.wpd,
                converged: rep.converged,
            })
        })
        .collect()
}

/// Writes rows as CSV under [`CSV_HEADER`].
pub fn write_csv<W: std::io::Write>(w: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Measurement conventions recorded next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a> {
    pub config: &'a ExperimentConfig,
    pub cycle_complexity: &'static str,
    pub convergence_factor: &'static str,
    pub emin_iters: &'static str,
    pub relaxation: &'static str,
    pub candidates: &'static str,
}

pub fn metadata(cfg: &ExperimentConfig) -> RunMetadata<'_> {
    RunMetadata {
        config: cfg,
        cycle_complexity: "sum over levels of (pre + post + 1) * nnz(A_l) / nnz(A_0), with 2 pre and 2 post sweeps",
        convergence_factor: "b = 0, seeded random x0, 30 stationary V-cycles; geometric mean of the last 10 residual ratios",
        emin_iters: "iterations after the constraint-satisfying initial guess, which is not counted",
        relaxation: "Jacobi, omega = 1 divided by an estimate of rho(D^-1 A) per level",
        candidates: "smoothed_constant: the constant vector after candidate_sweeps Jacobi sweeps on A x = 0, normalized",
    }
}

/// Path of the metadata file written beside `csv_path`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Runs the sweep and writes CSV plus metadata to `out` (or `cfg.output`).
pub fn run_experiment_to_file(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<ExperimentRow>> {
    let path = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::InvalidParameter("no output path given".into()))?;
    let rows = run_experiment(cfg)?;
    let f = std::fs::File::create(&path)?;
    write_csv(std::io::BufWriter::new(f), &rows)?;
    let meta = serde_json::to_string_pretty(&metadata(cfg))?;
    std::fs::write(metadata_path(&path), meta + "\n")?;
    Ok(rows)
}
