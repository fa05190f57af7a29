//! Relaxation: sparse Jacobi and Gauss-Seidel sweeps, and the dense
//! symmetrized-relaxation operator used by the two-grid diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::sparse::{dense_sym_eig, norm2, DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationKind {
    Jacobi,
    GaussSeidel,
}

/// Stationary relaxation `x <- x + M⁻¹(b - A x)`.
///
/// Jacobi uses `M = diag(A)/omega`; Gauss-Seidel uses the lower triangle of
/// `A` (forward order) and ignores `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub kind: RelaxationKind,
    pub omega: f64,
    pub sweeps: usize,
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation::jacobi(1.0, 2)
    }
}

impl Relaxation {
    pub fn jacobi(omega: f64, sweeps: usize) -> Self {
        Relaxation {
            kind: RelaxationKind::Jacobi,
            omega,
            sweeps,
        }
    }

    pub fn gauss_seidel(sweeps: usize) -> Self {
        Relaxation {
            kind: RelaxationKind::GaussSeidel,
            omega: 1.0,
            sweeps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega = {} must be positive", self.omega)));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidParameter("sweeps must be at least 1".into()));
        }
        Ok(())
    }

    /// The dense single-sweep operator `M`.
    pub fn dense_m(&self, a: &DenseMatrix) -> DenseMatrix {
        match self.kind {
            RelaxationKind::Jacobi => {
                DenseMatrix::from_diagonal(&a.diagonal().iter().map(|d| d / self.omega).collect::<Vec<_>>())
            }
            RelaxationKind::GaussSeidel => {
                DenseMatrix::from_fn(a.nrows(), a.ncols(), |i, j| if j <= i { a[(i, j)] } else { 0.0 })
            }
        }
    }
}

fn check_diagonal(a: &SparseMatrix) -> Result<Vec<f64>> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    Ok(d)
}

/// Applies `rel.sweeps` relaxation passes to `x` for `A x = b`.
pub fn relax_sweep(rel: &Relaxation, a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    rel.validate()?;
    if a.nrows() != a.ncols() || x.len() != a.ncols() || b.len() != a.nrows() {
        return Err(dim_mismatch("relax_sweep: A, x and b do not conform"));
    }
    let d = check_diagonal(a)?;
    let mut x = x.to_vec();
    match rel.kind {
        RelaxationKind::Jacobi => {
            let scale: Vec<f64> = d.iter().map(|di| rel.omega / di).collect();
            jacobi_in_place(a, &scale, &mut x, b, rel.sweeps);
        }
        RelaxationKind::GaussSeidel => gauss_seidel_in_place(a, &d, &mut x, b, rel.sweeps),
    }
    Ok(x)
}

fn jacobi_in_place(a: &SparseMatrix, scale: &[f64], x: &mut [f64], b: &[f64], sweeps: usize) {
    let mut r = vec![0.0; x.len()];
    for _ in 0..sweeps {
        a.mul_vec_into(x, &mut r);
        for i in 0..x.len() {
            x[i] += scale[i] * (b[i] - r[i]);
        }
    }
}

fn gauss_seidel_in_place(a: &SparseMatrix, d: &[f64], x: &mut [f64], b: &[f64], sweeps: usize) {
    for _ in 0..sweeps {
        for i in 0..x.len() {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    s -= v * x[j];
                }
            }
            x[i] = s / d[i];
        }
    }
}

/// A relaxation bound to one operator, with its diagonal scaling cached.
///
/// For Jacobi, `omega` is divided by an estimate of `ρ(D⁻¹A)` so that the
/// sweep damps the whole spectrum (`omega = 1` then gives `M = ρ(D⁻¹A) D`).
#[derive(Debug, Clone)]
pub struct BoundRelaxation {
    pub relaxation: Relaxation,
    pub effective_omega: f64,
    inv_scale: Vec<f64>,
    diag: Vec<f64>,
}

impl BoundRelaxation {
    pub fn new(rel: Relaxation, a: &SparseMatrix, spectral_scaling: bool) -> Result<Self> {
        rel.validate()?;
        let diag = check_diagonal(a)?;
        let effective_omega = match (rel.kind, spectral_scaling) {
            (RelaxationKind::Jacobi, true) => rel.omega / diag_scaled_spectral_radius(a)?,
            _ => rel.omega,
        };
        let inv_scale = diag.iter().map(|d| effective_omega / d).collect();
        Ok(BoundRelaxation {
            relaxation: rel,
            effective_omega,
            inv_scale,
            diag,
        })
    }

    pub fn apply(&self, a: &SparseMatrix, x: &mut [f64], b: &[f64]) {
        match self.relaxation.kind {
            RelaxationKind::Jacobi => {
                jacobi_in_place(a, &self.inv_scale, x, b, self.relaxation.sweeps)
            }
            RelaxationKind::GaussSeidel => {
                gauss_seidel_in_place(a, &self.diag, x, b, self.relaxation.sweeps)
            }
        }
    }

    /// The relaxation with the effective weight baked in, for dense analysis.
    pub fn as_relaxation(&self) -> Relaxation {
        Relaxation {
            omega: self.effective_omega,
            ..self.relaxation
        }
    }
}

const POWER_ITERS: usize = 50;

fn power_start(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..n).map(|_| rng.gen_range(0.5..1.5)).collect()
}

/// Power-iteration estimate of the largest eigenvalue of a symmetric
/// positive semidefinite operator given by `apply`.
fn power_estimate(n: usize, mut apply: impl FnMut(&[f64], &mut [f64])) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = power_start(n);
    let mut w = vec![0.0; n];
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERS {
        apply(&v, &mut w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let done = lambda > 0.0 && ((next - lambda) / next).abs() < 1e-6;
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// `‖A‖₂` for symmetric positive semidefinite `A`, by power iteration.
pub fn spectral_norm_estimate(a: &SparseMatrix) -> f64 {
    power_estimate(a.nrows(), |x, y| a.mul_vec_into(x, y))
}

/// `ρ(D⁻¹A)` computed on the similar matrix `D^{-1/2} A D^{-1/2}`.
pub fn diag_scaled_spectral_radius(a: &SparseMatrix) -> Result<f64> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&v| v <= 0.0) {
        return Err(Error::NonpositiveDiagonal(i));
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut t = vec![0.0; a.nrows()];
    Ok(power_estimate(a.nrows(), |x, y| {
        for i in 0..x.len() {
            t[i] = s[i] * x[i];
        }
        a.mul_vec_into(&t, y);
        for i in 0..y.len() {
            y[i] *= s[i];
        }
    }))
}

/// Choice of the operator `X` spectrally equivalent to the symmetrized smoother.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XOperator {
    Diagonal,
    ScaledIdentity(f64),
}

/// `c1 ⟨Xv,v⟩ ≤ ⟨M̃v,v⟩ ≤ c2 ⟨Xv,v⟩`; only `X` and `c2` enter the weighted functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEquivalence {
    pub x: XOperator,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SpectralEquivalence {
    fn default() -> Self {
        SpectralEquivalence {
            x: XOperator::Diagonal,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

impl SpectralEquivalence {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 <= self.c2 && self.c2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < c1 <= c2, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if let XOperator::ScaledIdentity(s) = self.x {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter("identity scale must be positive".into()));
            }
        }
        Ok(())
    }

    /// Diagonal of `X` restricted to the given rows of `A`.
    pub fn x_diag(&self, a: &SparseMatrix, rows: &[usize]) -> Vec<f64> {
        match self.x {
            XOperator::Diagonal => rows.iter().map(|&i| a.get(i, i)).collect(),
            XOperator::ScaledIdentity(s) => vec![s; rows.len()],
        }
    }

    pub fn dense_x(&self, a: &DenseMatrix) -> DenseMatrix {
        match self.x {
            XOperator::Diagonal => DenseMatrix::from_diagonal(&a.diagonal()),
            XOperator::ScaledIdentity(s) => DenseMatrix::identity(a.nrows()).scale(s),
        }
    }
}

/// `M̃ = Mᵀ (M + Mᵀ - A)⁻¹ M`.
pub fn symmetrized_mtilde(a: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    if a.shape() != m.shape() || !a.is_square() {
        return Err(dim_mismatch("symmetrized_mtilde: A and M must be square and equal size"));
    }
    let s = m.add(&m.transpose()).sub(a);
    let y = s.lu()?.solve_matrix(m);
    Ok(m.transpose().matmul(&y).symmetrized())
}

/// Whether `M + Mᵀ - A` is positive definite, i.e. relaxation with `M`
/// contracts in the `A`-norm.
pub fn is_a_convergent(a: &DenseMatrix, m: &DenseMatrix) -> bool {
    if a.shape() != m.shape() {
        return false;
    }
    let s = m.add(&m.transpose()).sub(a).symmetrized();
    let anorm = match dense_sym_eig(&a.symmetrized(), None) {
        Ok(e) => e.min().abs().max(e.max().abs()),
        Err(_) => return false,
    };
    match dense_sym_eig(&s, None) {
        Ok(e) => e.min() > 1e-12 * anorm,
        Err(_) => false,
    }
}
