//! Interpolation weights by energy minimization.
//!
//! Interpolation is `P = [W; I]` in C/F ordering. `W` lives in the space of
//! `nf x nc` matrices supported on a fixed pattern, with the Frobenius inner
//! product. Two formulations are provided:
//!
//! * weighted: minimize `τ tr(PᵀAP) + c2 (1-τ) ‖X_ff^{1/2}(W B_c - B_f)‖²_F`
//!   by preconditioned CG on the normal equations `𝓛̂W = 𝓑̂`, preconditioned
//!   by a Hadamard product with the diagonal of `𝓛̂`;
//! * constrained: minimize `tr(PᵀAP)` subject to `W B_c = B_f` exactly, by
//!   projected CG whose search directions satisfy `Z B_c = 0` row by row.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarsening::{BlockSplit, Side};
use crate::error::{dim_mismatch, Error, Result};
use crate::smoothing::SpectralEquivalence;
use crate::sparse::{pattern_inner, DenseMatrix, PatternMatrix, SparseMatrix, SparsityPattern};

/// Below this many pattern entries rows are processed on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

/// Near-kernel candidate vectors, stored as the columns of an `n x nb` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub vectors: DenseMatrix,
}

impl CandidateSet {
    pub fn new(vectors: DenseMatrix) -> Result<Self> {
        if vectors.ncols() == 0 {
            return Err(Error::InvalidParameter("candidate set is empty".into()));
        }
        Ok(CandidateSet { vectors })
    }

    pub fn constant(n: usize) -> Self {
        CandidateSet {
            vectors: DenseMatrix::from_fn(n, 1, |_, _| 1.0),
        }
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn n_vecs(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn b_f(&self, split: &BlockSplit) -> DenseMatrix {
        self.vectors.select(split.f_points(), &(0..self.n_vecs()).collect::<Vec<_>>())
    }

    pub fn b_c(&self, split: &BlockSplit) -> DenseMatrix {
        self.vectors.select(split.c_points(), &(0..self.n_vecs()).collect::<Vec<_>>())
    }

    /// Candidates for the next level: their C-point rows.
    pub fn coarse(&self, split: &BlockSplit) -> CandidateSet {
        CandidateSet {
            vectors: self.b_c(split),
        }
    }
}

fn a_inner(a: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
    let ax = a.spmv(x).expect("conforming");
    ax.iter().zip(y).map(|(u, v)| u * v).sum()
}

/// Modified Gram-Schmidt in the `A` inner product.
pub fn prepare_candidates(a: &SparseMatrix, raw: &DenseMatrix) -> Result<CandidateSet> {
    if raw.nrows() != a.nrows() {
        return Err(dim_mismatch("candidate length differs from operator size"));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(raw.ncols());
    for k in 0..raw.ncols() {
        let mut v = raw.column(k);
        let norm0 = a_inner(a, &v, &v).max(0.0).sqrt();
        // two passes keep the Gram matrix at round-off level
        for _ in 0..2 {
            for q in &cols {
                let c = a_inner(a, &v, q);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = a_inner(a, &v, &v).max(0.0).sqrt();
        if !(norm > 1e-13 * norm0.max(f64::MIN_POSITIVE)) || norm0 == 0.0 {
            return Err(Error::DependentCandidate(k));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    CandidateSet::new(DenseMatrix::from_columns(&cols))
}

/// Splits `values` into per-row slices following `pattern`.
fn rows_mut<'a>(pattern: &SparsityPattern, mut values: &'a mut [f64]) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(pattern.nrows());
    for i in 0..pattern.nrows() {
        let (head, tail) = values.split_at_mut(pattern.row_range(i).len());
        out.push(head);
        values = tail;
    }
    out
}

/// Fills every row of `out` with `f(i, row)`; rows run in parallel on large patterns.
fn fill_rows<F>(out: &mut PatternMatrix, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    fill_rows_with(out, || (), |_, i, r| f(i, r));
}

/// [`fill_rows`] with a scratch value per worker.
fn fill_rows_with<S, I, F>(out: &mut PatternMatrix, init: I, f: F)
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [f64]) + Sync,
{
    let pattern = out.pattern().clone();
    let nnz = pattern.nnz();
    let rows = rows_mut(&pattern, out.values_mut());
    if nnz >= PAR_THRESHOLD {
        rows.into_par_iter().enumerate().for_each_init(&init, |s, (i, r)| f(s, i, r));
    } else {
        let mut s = init();
        rows.into_iter().enumerate().for_each(|(i, r)| f(&mut s, i, r));
    }
}

/// `(A_ff W)` restricted to the pattern of `W`.
fn aff_times_restricted(a_ff: &SparseMatrix, w: &PatternMatrix, out: &mut PatternMatrix) {
    let pattern = w.pattern().clone();
    let nc = pattern.ncols();
    fill_rows_with(
        out,
        || (vec![0.0; nc], vec![false; nc]),
        |(acc, keep), i, row| {
            let cols = pattern.row(i);
            if cols.is_empty() {
                return;
            }
            // accumulate only over the columns that survive restriction
            for &j in cols {
                keep[j] = true;
            }
            let (acols, avals) = a_ff.row(i);
            for (&k, &aik) in acols.iter().zip(avals) {
                let (wc, wv) = w.row(k);
                for (&j, &wkj) in wc.iter().zip(wv) {
                    if keep[j] {
                        acc[j] += aik * wkj;
                    }
                }
            }
            for (slot, &j) in row.iter_mut().zip(cols) {
                *slot = acc[j];
                acc[j] = 0.0;
                keep[j] = false;
            }
        },
    );
}

/// `W B_c` as a dense `nf x nb` matrix.
fn w_times_bc(w: &PatternMatrix, bc: &DenseMatrix) -> DenseMatrix {
    let nb = bc.ncols();
    let mut out = DenseMatrix::zeros(w.shape().0, nb);
    for i in 0..w.shape().0 {
        let (cols, vals) = w.row(i);
        let orow = out.row_mut(i);
        for (&j, &v) in cols.iter().zip(vals) {
            for (o, b) in orow.iter_mut().zip(bc.row(j)) {
                *o += v * b;
            }
        }
    }
    out
}

/// The weighted normal equations `𝓛̂W = 𝓑̂` and their diagonal preconditioner.
#[derive(Debug, Clone)]
pub struct WeightedSystem {
    pub tau: f64,
    pub c2: f64,
    pub a_ff: SparseMatrix,
    pub a_fc: SparseMatrix,
    pub x_ff_diag: Vec<f64>,
    /// `B_c`; the product `B_c B_cᵀ` is applied through this factor.
    pub b_c: DenseMatrix,
    pub bhat: PatternMatrix,
    pub dprec: PatternMatrix,
    pub pattern: Arc<SparsityPattern>,
}

pub fn build_weighted_system(
    a: &SparseMatrix,
    split: &BlockSplit,
    cands: &CandidateSet,
    x: &SpectralEquivalence,
    tau: f64,
    pattern: Arc<SparsityPattern>,
) -> Result<WeightedSystem> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside [0, 1]")));
    }
    x.validate()?;
    if a.nrows() != split.n() || cands.n() != split.n() {
        return Err(dim_mismatch("operator, split and candidates sizes differ"));
    }
    if pattern.shape() != (split.nf(), split.nc()) {
        return Err(dim_mismatch(format!(
            "pattern is {:?}, split needs ({}, {})",
            pattern.shape(),
            split.nf(),
            split.nc()
        )));
    }
    let (a_ff, a_fc, _, _) = split.blocks(a);
    let x_ff_diag = x.x_diag(a, split.f_points());
    let b_c = cands.b_c(split);
    let b_f = cands.b_f(split);
    let c2 = x.c2;
    let wb = c2 * (1.0 - tau);
    let bcbct_diag: Vec<f64> = (0..b_c.nrows()).map(|j| b_c.row(j).iter().map(|v| v * v).sum()).collect();
    let aff_diag = a_ff.diagonal();

    let mut bhat = PatternMatrix::zeros(pattern.clone());
    let mut dprec = PatternMatrix::zeros(pattern.clone());
    for i in 0..pattern.nrows() {
        let cols = pattern.row(i);
        let (fc_cols, fc_vals) = a_fc.row(i);
        let bvals = bhat.row_values_mut(i);
        for (slot, &j) in bvals.iter_mut().zip(cols) {
            let bfbc: f64 = b_f.row(i).iter().zip(b_c.row(j)).map(|(u, v)| u * v).sum();
            let afc = fc_cols.binary_search(&j).map_or(0.0, |k| fc_vals[k]);
            *slot = wb * x_ff_diag[i] * bfbc - tau * afc;
        }
        let dvals = dprec.row_values_mut(i);
        for (slot, &j) in dvals.iter_mut().zip(cols) {
            let denom = tau * aff_diag[i] + wb * bcbct_diag[j] * x_ff_diag[i];
            if !(denom > 0.0 && denom.is_finite()) {
                return Err(Error::DegenerateWeight { row: i, col: j });
            }
            *slot = 1.0 / denom;
        }
    }
    Ok(WeightedSystem {
        tau,
        c2,
        a_ff,
        a_fc,
        x_ff_diag,
        b_c,
        bhat,
        dprec,
        pattern,
    })
}

impl WeightedSystem {
    /// `𝓛̂W`.
    pub fn apply(&self, w: &PatternMatrix) -> PatternMatrix {
        let mut out = PatternMatrix::zeros(self.pattern.clone());
        self.apply_into(w, &mut out);
        out
    }

    fn apply_into(&self, w: &PatternMatrix, out: &mut PatternMatrix) {
        if self.tau > 0.0 {
            aff_times_restricted(&self.a_ff, w, out);
            out.values_mut().iter_mut().for_each(|v| *v *= self.tau);
        } else {
            out.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let wb = self.c2 * (1.0 - self.tau);
        if wb == 0.0 {
            return;
        }
        let wbc = w_times_bc(w, &self.b_c);
        let pattern = self.pattern.clone();
        fill_rows(out, |i, row| {
            let s = wb * self.x_ff_diag[i];
            for (slot, &j) in row.iter_mut().zip(pattern.row(i)) {
                let v: f64 = wbc.row(i).iter().zip(self.b_c.row(j)).map(|(u, b)| u * b).sum();
                *slot += s * v;
            }
        });
    }

    /// `𝓕̂(W) = ½⟨𝓛̂W, W⟩ - ⟨𝓑̂, W⟩`.
    pub fn functional(&self, w: &PatternMatrix) -> f64 {
        let lw = self.apply(w);
        0.5 * pattern_inner(&lw, w).unwrap() - pattern_inner(&self.bhat, w).unwrap()
    }
}

/// Result of a Frobenius-space CG run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub w: PatternMatrix,
    /// Preconditioned residual norms `sqrt⟨r, D∘r⟩`, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// Objective value at each iterate, starting with the initial one.
    pub functional_history: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgControl {
    pub max_iters: usize,
    /// Relative to the preconditioned norm of the right-hand side.
    pub tol: f64,
    pub precondition: bool,
}

impl Default for CgControl {
    fn default() -> Self {
        CgControl {
            max_iters: 100,
            tol: 1e-10,
            precondition: true,
        }
    }
}

/// Preconditioned CG for `𝓛̂W = 𝓑̂` in the pattern Hilbert space.
pub fn pcg_frobenius(sys: &WeightedSystem, w0: &PatternMatrix, ctl: CgControl) -> Result<CgOutcome> {
    if !w0.same_pattern(&sys.bhat) {
        return Err(dim_mismatch("initial guess does not conform to the system pattern"));
    }
    let precond = |r: &PatternMatrix| -> PatternMatrix {
        if ctl.precondition {
            r.hadamard(&sys.dprec)
        } else {
            r.clone()
        }
    };
    let inner = |x: &PatternMatrix, y: &PatternMatrix| pattern_inner(x, y).expect("same pattern");

    let mut w = w0.clone();
    let mut q = PatternMatrix::zeros(sys.pattern.clone());
    sys.apply_into(&w, &mut q);
    let mut r = sys.bhat.clone();
    r.axpy(-1.0, &q);
    let mut z = precond(&r);
    let mut rz = inner(&r, &z);
    let scale = inner(&sys.bhat, &precond(&sys.bhat)).sqrt();
    let mut functional = 0.5 * (inner(&q, &w)) - inner(&sys.bhat, &w);
    let mut residual_history = vec![rz.max(0.0).sqrt()];
    let mut functional_history = vec![functional];
    let target = if scale > 0.0 { ctl.tol * scale } else { 0.0 };
    let mut p = z.clone();
    let mut iterations = 0;

    while iterations < ctl.max_iters && rz.sqrt() > target {
        sys.apply_into(&p, &mut q);
        let pq = inner(&p, &q);
        if !pq.is_finite() || !rz.is_finite() {
            return Err(Error::Breakdown { iteration: iterations });
        }
        if pq <= 0.0 {
            // curvature lost to round-off at convergence
            break;
        }
        let alpha = rz / pq;
        // 𝓕̂(W + αp) = 𝓕̂(W) - α⟨r,p⟩ + ½α²⟨𝓛̂p,p⟩, and ⟨r,p⟩ = ⟨r,z⟩
        functional += -alpha * rz + 0.5 * alpha * alpha * pq;
        w.axpy(alpha, &p);
        r.axpy(-alpha, &q);
        z = precond(&r);
        let rz_new = inner(&r, &z);
        iterations += 1;
        if !rz_new.is_finite() || w.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Breakdown { iteration: iterations });
        }
        residual_history.push(rz_new.max(0.0).sqrt());
        functional_history.push(functional);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pv, zv) in p.values_mut().iter_mut().zip(z.values()) {
            *pv = zv + beta * *pv;
        }
    }
    Ok(CgOutcome {
        w,
        residual_history,
        functional_history,
        iterations,
    })
}

/// Per-row affine constraint `w · C = b` with `C = B_c[cols, :]`.
#[derive(Debug, Clone)]
struct RowConstraint {
    /// Orthonormal basis of the column space of `C`, `m x rank`, row-major.
    q: Vec<f64>,
    rank: usize,
    /// `QᵀC`, `rank x nb`, row-major.
    r: Vec<f64>,
}

impl RowConstraint {
    fn new(c: &[Vec<f64>]) -> Self {
        let m = c.first().map_or(0, |row| row.len());
        let nb = c.len();
        let scale = c
            .iter()
            .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for col in c {
            let mut v = col.clone();
            for _ in 0..2 {
                for q in &basis {
                    let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-12 * scale && nrm > 0.0 {
                v.iter_mut().for_each(|x| *x /= nrm);
                basis.push(v);
            }
        }
        let rank = basis.len();
        let mut q = vec![0.0; m * rank];
        for (k, b) in basis.iter().enumerate() {
            for i in 0..m {
                q[i * rank + k] = b[i];
            }
        }
        let mut r = vec![0.0; rank * nb];
        for (k, b) in basis.iter().enumerate() {
            for (l, col) in c.iter().enumerate() {
                r[k * nb + l] = b.iter().zip(col).map(|(x, y)| x * y).sum();
            }
        }
        RowConstraint { q, rank, r }
    }

    /// `z <- z - Q Qᵀ z`.
    fn project(&self, z: &mut [f64]) {
        let rank = self.rank;
        if rank == 0 {
            return;
        }
        let mut coef = vec![0.0; rank];
        for (i, zi) in z.iter().enumerate() {
            for k in 0..rank {
                coef[k] += self.q[i * rank + k] * zi;
            }
        }
        for (i, zi) in z.iter_mut().enumerate() {
            for k in 0..rank {
                *zi -= self.q[i * rank + k] * coef[k];
            }
        }
    }

    /// Minimal-norm `w` with `w · C = b`, or `None` when no such `w` exists.
    fn min_norm_solution(&self, b: &[f64]) -> Option<Vec<f64>> {
        let rank = self.rank;
        let nb = b.len();
        let m = if rank == 0 { 0 } else { self.q.len() / rank };
        let bnorm = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if rank == 0 {
            return if bnorm == 0.0 { Some(Vec::new()) } else { None };
        }
        // w = Q y with Rᵀ y = b: least squares through (R Rᵀ) y = R b
        let mut g = DenseMatrix::zeros(rank, rank);
        let mut rhs = DenseMatrix::zeros(rank, 1);
        for k in 0..rank {
            for l in 0..rank {
                g[(k, l)] = (0..nb).map(|t| self.r[k * nb + t] * self.r[l * nb + t]).sum();
            }
            rhs[(k, 0)] = (0..nb).map(|t| self.r[k * nb + t] * b[t]).sum();
        }
        let y = g.solve(&rhs).ok()?;
        for t in 0..nb {
            let bt: f64 = (0..rank).map(|k| self.r[k * nb + t] * y[(k, 0)]).sum();
            if (bt - b[t]).abs() > 1e-10 * bnorm.max(1e-300) {
                return None;
            }
        }
        Some((0..m).map(|i| (0..rank).map(|k| self.q[i * rank + k] * y[(k, 0)]).sum()).collect())
    }
}

fn row_constraints(pattern: &SparsityPattern, b_c: &DenseMatrix) -> Vec<RowConstraint> {
    let build = |i: usize| {
        let cols = pattern.row(i);
        let c: Vec<Vec<f64>> = (0..b_c.ncols())
            .map(|l| cols.iter().map(|&j| b_c[(j, l)]).collect())
            .collect();
        RowConstraint::new(&c)
    };
    if pattern.nnz() >= PAR_THRESHOLD {
        (0..pattern.nrows()).into_par_iter().map(build).collect()
    } else {
        (0..pattern.nrows()).map(build).collect()
    }
}

/// Per F-row minimal-norm solution of `W B_c = B_f` on the pattern.
pub fn initial_guess(
    split: &BlockSplit,
    cands: &CandidateSet,
    pattern: Arc<SparsityPattern>,
) -> Result<PatternMatrix> {
    if pattern.shape() != (split.nf(), split.nc()) || cands.n() != split.n() {
        return Err(dim_mismatch("initial_guess: pattern, split and candidates disagree"));
    }
    let b_c = cands.b_c(split);
    let b_f = cands.b_f(split);
    let cons = row_constraints(&pattern, &b_c);
    let mut w = PatternMatrix::zeros(pattern);
    for (i, rc) in cons.iter().enumerate() {
        let sol = rc.min_norm_solution(b_f.row(i)).ok_or(Error::InfeasibleConstraint(split.f_points()[i]))?;
        w.row_values_mut(i).copy_from_slice(&sol);
    }
    Ok(w)
}

/// `P` in the original ordering: identity rows at C-points, `W` rows at F-points.
pub fn assemble_p(w: &PatternMatrix, split: &BlockSplit) -> Result<SparseMatrix> {
    if w.shape() != (split.nf(), split.nc()) {
        return Err(dim_mismatch(format!(
            "W is {:?}, split needs ({}, {})",
            w.shape(),
            split.nf(),
            split.nc()
        )));
    }
    let n = split.n();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(w.values().len() + split.nc());
    let mut values = Vec::with_capacity(col_indices.capacity());
    row_offsets.push(0);
    for i in 0..n {
        match split.side(i) {
            (Side::C, c) => {
                col_indices.push(c);
                values.push(1.0);
            }
            (Side::F, f) => {
                let (cols, vals) = w.row(f);
                col_indices.extend_from_slice(cols);
                values.extend_from_slice(vals);
            }
        }
        row_offsets.push(col_indices.len());
    }
    SparseMatrix::from_csr(n, split.nc(), row_offsets, col_indices, values)
}

#[derive(Debug, Clone)]
pub struct Interpolation {
    pub w: PatternMatrix,
    pub split: BlockSplit,
    pub p: SparseMatrix,
}

impl Interpolation {
    pub fn new(w: PatternMatrix, split: BlockSplit) -> Result<Self> {
        let p = assemble_p(&w, &split)?;
        Ok(Interpolation { w, split, p })
    }
}

/// Constrained minimization of `tr(PᵀAP)` over `{W on pattern : W B_c = B_f}`.
///
/// Starts from [`initial_guess`] and runs `ctl.max_iters` projected CG steps,
/// preconditioned by `diag(A_ff)⁻¹` applied row-wise (it commutes with the
/// row projectors).
pub fn constrained_energymin(
    a: &SparseMatrix,
    split: &BlockSplit,
    cands: &CandidateSet,
    pattern: Arc<SparsityPattern>,
    ctl: CgControl,
) -> Result<(Interpolation, CgOutcome)> {
    if a.nrows() != split.n() {
        return Err(dim_mismatch("operator and split sizes differ"));
    }
    let (a_ff, a_fc, _, _) = split.blocks(a);
    let b_c = cands.b_c(split);
    let cons = row_constraints(&pattern, &b_c);
    let w0 = initial_guess(split, cands, pattern.clone())?;
    let dinv: Vec<f64> = a_ff
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| if d > 0.0 { Ok(1.0 / d) } else { Err(Error::NonpositiveDiagonal(split.f_points()[i])) })
        .collect::<Result<_>>()?;
    let afc_r = {
        let mut m = PatternMatrix::zeros(pattern.clone());
        for i in 0..pattern.nrows() {
            let (cols, vals) = a_fc.row(i);
            let pcols = pattern.row(i);
            for (slot, &j) in m.row_values_mut(i).iter_mut().zip(pcols) {
                *slot = cols.binary_search(&j).map_or(0.0, |k| vals[k]);
            }
        }
        m
    };
    let inner = |x: &PatternMatrix, y: &PatternMatrix| pattern_inner(x, y).expect("same pattern");
    // projected gradient g and preconditioned direction z = D⁻¹g; the row
    // scaling commutes with the row projection
    let project_precond = |r: &PatternMatrix| -> (PatternMatrix, PatternMatrix) {
        let mut g = r.clone();
        fill_rows(&mut g, |i, row| cons[i].project(row));
        let mut z = g.clone();
        if ctl.precondition {
            fill_rows(&mut z, |i, row| row.iter_mut().for_each(|v| *v *= dinv[i]));
        }
        (g, z)
    };

    let mut w = w0;
    let mut q = PatternMatrix::zeros(pattern.clone());
    aff_times_restricted(&a_ff, &w, &mut q);
    // functional ½⟨A_ff W, W⟩ + ⟨A_fc, W⟩ and its negative gradient
    let mut functional = 0.5 * inner(&q, &w) + inner(&afc_r, &w);
    let mut r = afc_r.clone();
    r.axpy(1.0, &q);
    r.values_mut().iter_mut().for_each(|v| *v = -*v);
    // below this the projected gradient is rounding noise of the full one
    let floor = {
        let mut sr = r.clone();
        if ctl.precondition {
            fill_rows(&mut sr, |i, row| row.iter_mut().for_each(|v| *v *= dinv[i]));
        }
        1e-28 * inner(&r, &sr)
    };
    let (_, mut z) = project_precond(&r);
    let mut rz = {
        let (g, _) = project_precond(&r);
        inner(&g, &z)
    };
    let rz0 = rz;
    let mut residual_history = vec![rz.max(0.0).sqrt()];
    let mut functional_history = vec![functional];
    let mut p = z.clone();
    let mut iterations = 0;
    while iterations < ctl.max_iters && rz > floor && rz.sqrt() > ctl.tol * rz0.sqrt() {
        aff_times_restricted(&a_ff, &p, &mut q);
        let pq = inner(&p, &q);
        if !pq.is_finite() || !rz.is_finite() {
            return Err(Error::Breakdown { iteration: iterations });
        }
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        functional += -alpha * rz + 0.5 * alpha * alpha * pq;
        w.axpy(alpha, &p);
        r.axpy(-alpha, &q);
        let (g, z_new) = project_precond(&r);
        z = z_new;
        let rz_new = inner(&g, &z);
        iterations += 1;
        if !rz_new.is_finite() {
            return Err(Error::Breakdown { iteration: iterations });
        }
        residual_history.push(rz_new.max(0.0).sqrt());
        functional_history.push(functional);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pv, zv) in p.values_mut().iter_mut().zip(z.values()) {
            *pv = zv + beta * *pv;
        }
    }
    let outcome = CgOutcome {
        w: w.clone(),
        residual_history,
        functional_history,
        iterations,
    };
    Ok((Interpolation::new(w, split.clone())?, outcome))
}

/// Which energy functional determines `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EminMode {
    Weighted { tau: f64 },
    Constrained,
}

/// Weighted or constrained interpolation, both started from [`initial_guess`].
pub fn energy_min_interpolation(
    a: &SparseMatrix,
    split: &BlockSplit,
    cands: &CandidateSet,
    pattern: Arc<SparsityPattern>,
    mode: EminMode,
    x: &SpectralEquivalence,
    ctl: CgControl,
) -> Result<(Interpolation, CgOutcome)> {
    match mode {
        EminMode::Constrained => constrained_energymin(a, split, cands, pattern, ctl),
        EminMode::Weighted { tau } => {
            let sys = build_weighted_system(a, split, cands, x, tau, pattern.clone())?;
            let w0 = initial_guess(split, cands, pattern)?;
            let out = pcg_frobenius(&sys, &w0, ctl)?;
            Ok((Interpolation::new(out.w.clone(), split.clone())?, out))
        }
    }
}
