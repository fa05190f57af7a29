//! Permutations and the perfect shuffle between row-major and column-major
//! vectorizations of an `nf x nc` matrix.

use crate::error::{Error, Result};

use super::dense::DenseMatrix;

/// A permutation acting by gather: `(Y x)[p] = x[forward[p]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
}

impl Permutation {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut seen = vec![false; n];
        for &k in &forward {
            if k >= n || seen[k] {
                return Err(Error::InvalidParameter(format!(
                    "not a permutation of 0..{n}: entry {k}"
                )));
            }
            seen[k] = true;
        }
        Ok(Permutation { forward })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            forward: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (p, &k) in self.forward.iter().enumerate() {
            inv[k] = p;
        }
        Permutation { forward: inv }
    }

    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.len());
        self.forward.iter().map(|&k| x[k]).collect()
    }

    /// `Y M Yᵀ`.
    pub fn conjugate(&self, m: &DenseMatrix) -> DenseMatrix {
        assert!(m.is_square() && m.nrows() == self.len());
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |p, q| m[(self.forward[p], self.forward[q])])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut y = DenseMatrix::zeros(self.len(), self.len());
        for (p, &k) in self.forward.iter().enumerate() {
            y[(p, k)] = 1.0;
        }
        y
    }
}

/// The permutation `Y` with `Y vec_row(W) = vec_col(W)` for `W` of shape
/// `nf x nc`. Conjugation swaps Kronecker factors: `Y (P⊗Q) Yᵀ = Q⊗P`.
pub fn perfect_shuffle(nf: usize, nc: usize) -> Permutation {
    let mut forward = vec![0; nf * nc];
    for i in 0..nf {
        for j in 0..nc {
            forward[i + j * nf] = j + i * nc;
        }
    }
    Permutation { forward }
}

/// Stacks the rows of `w`.
pub fn vec_row_major(w: &DenseMatrix) -> Vec<f64> {
    w.as_slice().to_vec()
}

/// Stacks the columns of `w`.
pub fn vec_col_major(w: &DenseMatrix) -> Vec<f64> {
    let mut v = Vec::with_capacity(w.nrows() * w.ncols());
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            v.push(w[(i, j)]);
        }
    }
    v
}
