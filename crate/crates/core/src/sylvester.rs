//! Diagonally preconditioned CG for matrix equations `A W B + C W D = F`.
//!
//! Covers Sylvester (`B = C = I`) and Lyapunov (`D = Aᵀ` as well) equations
//! whenever the operator `W ↦ AWB + CWD` is self-adjoint and positive
//! definite in the Frobenius inner product.

use crate::error::{dim_mismatch, Error, Result};
use crate::sparse::DenseMatrix;

/// `A W B + C W D = F` with `A, C: n x n`, `B, D: m x m`, `F, W: n x m`.
#[derive(Debug, Clone)]
pub struct MatrixEquation {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub d: DenseMatrix,
    pub f: DenseMatrix,
    diagonal: bool,
}

impl MatrixEquation {
    pub fn new(
        a: DenseMatrix,
        b: DenseMatrix,
        c: DenseMatrix,
        d: DenseMatrix,
        f: DenseMatrix,
    ) -> Result<Self> {
        let (n, m) = f.shape();
        for (name, mat, dim) in [("A", &a, n), ("B", &b, m), ("C", &c, n), ("D", &d, m)] {
            if mat.shape() != (dim, dim) {
                return Err(dim_mismatch(format!(
                    "{name} is {:?}, expected {dim}x{dim} for F of shape {n}x{m}",
                    mat.shape()
                )));
            }
        }
        let diagonal = a.is_diagonal() && b.is_diagonal() && c.is_diagonal() && d.is_diagonal();
        Ok(MatrixEquation {
            a,
            b,
            c,
            d,
            f,
            diagonal,
        })
    }

    /// `A W + W D = F`.
    pub fn sylvester(a: DenseMatrix, d: DenseMatrix, f: DenseMatrix) -> Result<Self> {
        let (n, m) = f.shape();
        Self::new(a, DenseMatrix::identity(m), DenseMatrix::identity(n), d, f)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.f.shape()
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// `A W B + C W D`.
    pub fn apply(&self, w: &DenseMatrix) -> DenseMatrix {
        if self.diagonal {
            let (a, b, c, d) = (self.a.diagonal(), self.b.diagonal(), self.c.diagonal(), self.d.diagonal());
            return DenseMatrix::from_fn(w.nrows(), w.ncols(), |i, j| (a[i] * b[j] + c[i] * d[j]) * w[(i, j)]);
        }
        self.a
            .matmul(w)
            .matmul(&self.b)
            .add(&self.c.matmul(w).matmul(&self.d))
    }

    /// Dense operator on column-major `vec(W)`: `Bᵀ⊗A + Dᵀ⊗C`.
    pub fn kronecker_operator(&self) -> DenseMatrix {
        self.b
            .transpose()
            .kron(&self.a)
            .add(&self.d.transpose().kron(&self.c))
    }
}

/// Entry `(i, j)` is `1 / (B_jj A_ii + D_jj C_ii)`, the inverse diagonal of
/// the operator; it is applied by Hadamard product.
pub fn hadamard_diag_preconditioner(eq: &MatrixEquation) -> Result<DenseMatrix> {
    let (n, m) = eq.shape();
    let (a, b, c, d) = (eq.a.diagonal(), eq.b.diagonal(), eq.c.diagonal(), eq.d.diagonal());
    let mut out = DenseMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let denom = b[j] * a[i] + d[j] * c[i];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::SingularPreconditioner { row: i, col: j });
            }
            out[(i, j)] = 1.0 / denom;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SylvesterOutcome {
    pub w: DenseMatrix,
    /// `‖F - (AWB + CWD)‖_F` at each iterate, starting from `W = 0`.
    pub residual_history: Vec<f64>,
    /// `½⟨𝓛W, W⟩ - ⟨F, W⟩` at each iterate.
    pub functional_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn frob(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum()
}

fn hadamard(x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * y[(i, j)])
}

/// Preconditioned CG from `W = 0`; stops when `‖R‖_F ≤ tol ‖F‖_F`.
pub fn sylvester_cg(eq: &MatrixEquation, max_iters: usize, tol: f64) -> Result<SylvesterOutcome> {
    let dprec = hadamard_diag_preconditioner(eq)?;
    let (n, m) = eq.shape();
    let fnorm = eq.f.frobenius_norm();
    let mut w = DenseMatrix::zeros(n, m);
    let mut r = eq.f.clone();
    let mut z = hadamard(&r, &dprec);
    let mut p = z.clone();
    let mut rz = frob(&r, &z);
    let mut functional = 0.0;
    let mut residual_history = vec![fnorm];
    let mut functional_history = vec![0.0];
    let mut iterations = 0;
    let target = tol * fnorm;
    let mut converged = fnorm <= target || fnorm == 0.0;
    while !converged && iterations < max_iters {
        let q = eq.apply(&p);
        let pq = frob(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Indefinite {
                iteration: iterations,
                curvature: pq,
            });
        }
        let alpha = rz / pq;
        functional += -alpha * rz + 0.5 * alpha * alpha * pq;
        w = w.add(&p.scale(alpha));
        r = r.sub(&q.scale(alpha));
        iterations += 1;
        let rnorm = r.frobenius_norm();
        if !rnorm.is_finite() {
            return Err(Error::Breakdown { iteration: iterations });
        }
        residual_history.push(rnorm);
        functional_history.push(functional);
        if rnorm <= target {
            converged = true;
            break;
        }
        z = hadamard(&r, &dprec);
        let rz_new = frob(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.add(&p.scale(beta));
    }
    Ok(SylvesterOutcome {
        w,
        residual_history,
        functional_history,
        iterations,
        converged,
    })
}
