//! Sparse and small dense linear algebra.

mod csr;
mod dense;
mod eig;
mod mm;
mod pattern;
mod shuffle;

pub use csr::SparseMatrix;
pub use dense::{axpy, dot, norm2, Cholesky, DenseMatrix, Lu};
pub use eig::{dense_sym_eig, SymEig};
pub use mm::{
    read_matrix_market, read_matrix_market_file, write_matrix_market, write_matrix_market_file,
    MmSymmetry,
};
pub use pattern::{pattern_inner, PatternMatrix, SparsityPattern};
pub use shuffle::{perfect_shuffle, vec_col_major, vec_row_major, Permutation};
