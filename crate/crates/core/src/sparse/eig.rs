//! Dense symmetric (generalized) eigensolver.
//!
//! The standard problem is solved with cyclic Jacobi rotations; the
//! generalized problem `A v = λ B v` is reduced to standard form through the
//! Cholesky factor of `B`. Intended for desk-scale matrices (n up to a few
//! hundred).

use crate::error::{dim_mismatch, Error, Result};

use super::dense::DenseMatrix;

const MAX_SWEEPS: usize = 60;

/// Eigenvalues in ascending order with eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }
}

/// Solves `A v = λ B v` (B defaults to the identity).
///
/// Eigenvectors are B-orthonormal and eigenvalues ascend.
pub fn dense_sym_eig(a: &DenseMatrix, b: Option<&DenseMatrix>) -> Result<SymEig> {
    a.check_symmetric()?;
    match b {
        None => jacobi_eig(a),
        Some(b) => {
            if b.shape() != a.shape() {
                return Err(dim_mismatch("generalized eigenproblem: A and B shapes differ"));
            }
            b.check_symmetric()?;
            let chol = b.cholesky()?;
            let n = a.nrows();
            // C = L⁻¹ A L⁻ᵀ, built column by column
            let mut y = DenseMatrix::zeros(n, n);
            for j in 0..n {
                let mut col = a.column(j);
                chol.forward(&mut col);
                y.set_column(j, &col);
            }
            // y = L⁻¹ A; C = L⁻¹ yᵀ
            let yt = y.transpose();
            let mut c = DenseMatrix::zeros(n, n);
            for j in 0..n {
                let mut col = yt.column(j);
                chol.forward(&mut col);
                c.set_column(j, &col);
            }
            let c = c.symmetrized();
            let mut eig = jacobi_eig(&c)?;
            for k in 0..n {
                let mut v = eig.vectors.column(k);
                chol.backward(&mut v);
                eig.vectors.set_column(k, &v);
            }
            Ok(eig)
        }
    }
}

fn jacobi_eig(input: &DenseMatrix) -> Result<SymEig> {
    let n = input.nrows();
    let mut a = input.clone();
    let mut v = DenseMatrix::identity(n);
    let mut d: Vec<f64> = a.diagonal();
    let mut b = d.clone();
    let mut z = vec![0.0; n];
    let mut converged = n <= 1;

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].abs();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = 100.0 * apq.abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[(p, q)] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a[(p, q)] = 0.0;
                // only the upper triangle of `a` is referenced
                for j in 0..p {
                    rotate(&mut a, (j, p), (j, q), s, tau);
                }
                for j in (p + 1)..q {
                    rotate(&mut a, (p, j), (j, q), s, tau);
                }
                for j in (q + 1)..n {
                    rotate(&mut a, (p, j), (q, j), s, tau);
                }
                for j in 0..n {
                    rotate(&mut v, (j, p), (j, q), s, tau);
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }
    if !converged {
        return Err(Error::NoConvergence);
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymEig { values, vectors })
}

#[inline]
fn rotate(m: &mut DenseMatrix, ij: (usize, usize), kl: (usize, usize), s: f64, tau: f64) {
    let g = m[ij];
    let h = m[kl];
    m[ij] = g - s * (h + g * tau);
    m[kl] = h + s * (g - h * tau);
}
