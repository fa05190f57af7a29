//! Multilevel setup, V-cycles and the outer solve loop.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarsening::{cf_split, pattern_distance_k, strength_graph, BlockSplit};
use crate::energymin::{energy_min_interpolation, prepare_candidates, CandidateSet, CgControl, EminMode};
use crate::error::{dim_mismatch, Error, Result};
use crate::smoothing::{BoundRelaxation, Relaxation, SpectralEquivalence, XOperator};
use crate::sparse::{dot, norm2, Cholesky, DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Weighted,
    Constrained,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Weighted => "weighted",
            Mode::Constrained => "constrained",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(Mode::Weighted),
            "constrained" => Ok(Mode::Constrained),
            _ => Err(Error::InvalidParameter(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetupConfig {
    pub mode: Mode,
    /// Energy weight of the weighted functional; unused in constrained mode.
    pub tau: f64,
    pub c2: f64,
    pub x: XOperator,
    pub pattern_degree: usize,
    pub emin_iters: usize,
    pub emin_tol: f64,
    /// Hadamard diagonal preconditioning inside the energy minimization.
    pub precondition: bool,
    pub theta_strength: f64,
    pub max_coarse: usize,
    pub max_levels: usize,
    pub relaxation: Relaxation,
    /// Divide the Jacobi weight by `ρ(D⁻¹A)` on each level.
    pub spectral_scaling: bool,
}

impl Default for SetupConfig {
    fn default() -> Self {
        SetupConfig {
            mode: Mode::Constrained,
            tau: 1e-7,
            c2: 1.0,
            x: XOperator::Diagonal,
            pattern_degree: 2,
            emin_iters: 5,
            emin_tol: 1e-10,
            precondition: true,
            theta_strength: 0.25,
            max_coarse: 100,
            max_levels: 25,
            relaxation: Relaxation::jacobi(1.0, 2),
            spectral_scaling: true,
        }
    }
}

impl SetupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_coarse < 1 {
            return Err(Error::InvalidParameter("max_coarse must be at least 1".into()));
        }
        if self.max_levels < 1 {
            return Err(Error::InvalidParameter("max_levels must be at least 1".into()));
        }
        if self.pattern_degree < 1 {
            return Err(Error::InvalidParameter("pattern_degree must be at least 1".into()));
        }
        if self.mode == Mode::Weighted && !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidParameter(format!("tau = {} outside [0, 1]", self.tau)));
        }
        self.relaxation.validate()?;
        self.equivalence().validate()
    }

    pub fn emin_mode(&self) -> EminMode {
        match self.mode {
            Mode::Weighted => EminMode::Weighted { tau: self.tau },
            Mode::Constrained => EminMode::Constrained,
        }
    }

    pub fn equivalence(&self) -> SpectralEquivalence {
        SpectralEquivalence {
            x: self.x,
            c1: self.c2.min(1.0),
            c2: self.c2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Level {
    pub a: SparseMatrix,
    /// Interpolation to this level from the next; absent on the coarsest.
    pub p: Option<SparseMatrix>,
    pt: Option<SparseMatrix>,
    pub split: Option<BlockSplit>,
    pub relaxation: Option<BoundRelaxation>,
    /// Residual history of the energy minimization that produced `p`.
    pub emin_residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    coarsest: Cholesky,
    pub config: SetupConfig,
}

/// `PᵀAP`, averaged with its transpose when `A` is symmetric.
pub fn galerkin_product(p: &SparseMatrix, a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.ncols() != p.nrows() || a.nrows() != p.nrows() {
        return Err(dim_mismatch(format!(
            "galerkin_product: A is {}x{}, P is {}x{}",
            a.nrows(),
            a.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    let ap = a.matmul(p)?;
    let ac = p.transpose().matmul(&ap)?;
    if a.is_symmetric(1e-12 * a.max_abs()) && ac.skew() > 0.0 {
        Ok(ac.symmetrized())
    } else {
        Ok(ac)
    }
}

/// Builds a hierarchy whose interpolation preserves the given candidates
/// (columns of `raw_candidates`, one entry per unknown of `a`).
pub fn setup(a: &SparseMatrix, cfg: &SetupConfig, raw_candidates: &DenseMatrix) -> Result<Hierarchy> {
    cfg.validate()?;
    if a.nrows() != a.ncols() {
        return Err(dim_mismatch("setup: operator must be square"));
    }
    if raw_candidates.nrows() != a.nrows() || raw_candidates.ncols() == 0 {
        return Err(dim_mismatch("setup: candidates must have one row per unknown"));
    }
    let mut levels = Vec::new();
    let mut a_l = a.clone();
    let mut raw = raw_candidates.clone();
    loop {
        let n = a_l.nrows();
        if n <= cfg.max_coarse || levels.len() + 1 >= cfg.max_levels {
            break;
        }
        let level_index = levels.len();
        let (graph, split) = split_with_retries(&a_l, cfg.theta_strength, level_index)?;
        let pattern = Arc::new(pattern_distance_k(&graph, &split, cfg.pattern_degree)?);
        let cands = prepare_candidates(&a_l, &raw)?;
        let ctl = CgControl {
            max_iters: cfg.emin_iters,
            tol: cfg.emin_tol,
            precondition: cfg.precondition,
        };
        let (interp, outcome) =
            energy_min_interpolation(&a_l, &split, &cands, pattern, cfg.emin_mode(), &cfg.equivalence(), ctl)?;
        let a_c = galerkin_product(&interp.p, &a_l)?;
        let relaxation = BoundRelaxation::new(cfg.relaxation, &a_l, cfg.spectral_scaling)?;
        raw = cands.coarse(&split).vectors;
        levels.push(Level {
            pt: Some(interp.p.transpose()),
            p: Some(interp.p),
            a: std::mem::replace(&mut a_l, a_c),
            split: Some(split),
            relaxation: Some(relaxation),
            emin_residuals: outcome.residual_history,
        });
    }
    let coarsest = a_l.to_dense().symmetrized().cholesky()?;
    levels.push(Level {
        a: a_l,
        p: None,
        pt: None,
        split: None,
        relaxation: None,
        emin_residuals: Vec::new(),
    });
    Ok(Hierarchy {
        levels,
        coarsest,
        config: *cfg,
    })
}

/// Constant-candidate convenience wrapper around [`setup`].
pub fn setup_constant(a: &SparseMatrix, cfg: &SetupConfig) -> Result<Hierarchy> {
    setup(a, cfg, &CandidateSet::constant(a.nrows()).vectors)
}

/// Splits `a`; when every point comes out C, retries twice with a halved
/// strength threshold before giving up.
fn split_with_retries(
    a: &SparseMatrix,
    theta: f64,
    level: usize,
) -> Result<(crate::coarsening::StrengthGraph, BlockSplit)> {
    let mut theta = theta;
    for _ in 0..3 {
        let graph = strength_graph(a, theta)?;
        let split = cf_split(&graph);
        if split.nc() < split.n() {
            return Ok((graph, split));
        }
        theta *= 0.5;
    }
    Err(Error::CoarseningStagnation { level, n: a.nrows() })
}

impl Hierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.nrows()).collect()
    }

    pub fn operator_complexity(&self) -> f64 {
        let nnz0 = self.levels[0].a.nnz() as f64;
        self.levels.iter().map(|l| l.a.nnz() as f64).sum::<f64>() / nnz0
    }

    /// Work per V-cycle in units of one fine-grid matvec: each level costs
    /// `pre + post + 1` matvecs of its own operator.
    pub fn cycle_complexity(&self) -> f64 {
        let s = self.config.relaxation.sweeps as f64;
        let units = 2.0 * s + 1.0;
        units * self.operator_complexity()
    }

    /// One V(ν,ν)-cycle on `level` starting from `x`.
    pub fn vcycle(&self, level: usize, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let lv = self
            .levels
            .get(level)
            .ok_or_else(|| Error::InvalidParameter(format!("level {level} does not exist")))?;
        let n = lv.a.nrows();
        if x.len() != n || b.len() != n {
            return Err(dim_mismatch(format!("vcycle: level {level} has size {n}")));
        }
        Ok(self.cycle(level, x.to_vec(), b))
    }

    fn cycle(&self, level: usize, mut x: Vec<f64>, b: &[f64]) -> Vec<f64> {
        let lv = &self.levels[level];
        let (Some(p), Some(pt), Some(relax)) = (&lv.p, &lv.pt, &lv.relaxation) else {
            return self.coarsest.solve(b);
        };
        relax.apply(&lv.a, &mut x, b);
        let r = lv.a.residual(&x, b);
        let rc = pt.spmv(&r).expect("conforming");
        let ec = self.cycle(level + 1, vec![0.0; rc.len()], &rc);
        let e = p.spmv(&ec).expect("conforming");
        x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
        relax.apply(&lv.a, &mut x, b);
        x
    }

    /// V-cycle from zero: the preconditioner action `B r`.
    pub fn precondition(&self, r: &[f64]) -> Vec<f64> {
        self.cycle(0, vec![0.0; r.len()], r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accel {
    Stationary,
    Cg,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// Two-norm residuals, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the residual grew over 10 consecutive iterations.
    pub diverged: bool,
}

const DIVERGENCE_RUN: usize = 10;

/// Iterates to relative residual `tol` or `max_iters` cycles.
pub fn solve(
    h: &Hierarchy,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
    accel: Accel,
) -> Result<SolveOutcome> {
    let a = &h.levels[0].a;
    let n = a.nrows();
    if b.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(dim_mismatch(format!("solve: operator has size {n}")));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = a.residual(&x, b);
    let r0 = norm2(&r);
    let bnorm = norm2(b);
    let reference = if bnorm > 0.0 { bnorm } else { r0 };
    let mut history = vec![r0];
    let mut growth_run = 0;
    let mut diverged = false;
    let done = |rn: f64| rn <= tol * reference || rn == 0.0;
    let mut converged = done(r0);
    let mut iterations = 0;

    let mut p = Vec::new();
    let mut rz = 0.0;
    while !converged && iterations < max_iters {
        match accel {
            Accel::Stationary => {
                let e = h.precondition(&r);
                x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
                r = a.residual(&x, b);
            }
            Accel::Cg => {
                let z = h.precondition(&r);
                let rz_new = dot(&r, &z);
                if iterations == 0 {
                    p = z;
                } else {
                    let beta = rz_new / rz;
                    p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
                }
                rz = rz_new;
                let q = a.spmv(&p)?;
                let pq = dot(&p, &q);
                if !(pq > 0.0) {
                    break;
                }
                let alpha = rz / pq;
                x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
                r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
            }
        }
        iterations += 1;
        let rn = norm2(&r);
        if !rn.is_finite() {
            history.push(rn);
            diverged = true;
            break;
        }
        if rn > *history.last().unwrap() {
            growth_run += 1;
            if growth_run >= DIVERGENCE_RUN {
                diverged = true;
            }
        } else {
            growth_run = 0;
        }
        history.push(rn);
        converged = done(rn);
    }
    Ok(SolveOutcome {
        x,
        residual_history: history,
        iterations,
        converged,
        diverged,
    })
}

/// Stationary iterations on `A x = 0` from a seeded random start; the
/// residual history feeds the convergence-factor measurement.
pub fn stationary_history(h: &Hierarchy, iters: usize, seed: u64) -> Result<Vec<f64>> {
    let n = h.levels[0].a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = vec![0.0; n];
    Ok(solve(h, &b, Some(&x0), 0.0, iters, Accel::Stationary)?.residual_history)
}
