//! Fixed sparsity patterns and matrices constrained to them.
//!
//! A [`PatternMatrix`] is an element of the space of `nf x nc` matrices that
//! vanish outside a pattern 𝒩; with the Frobenius inner product it is a
//! Hilbert space, which is where the interpolation weights are computed.

use std::sync::Arc;

use crate::error::{dim_mismatch, Error, Result};

use super::csr::SparseMatrix;
use super::dense::DenseMatrix;

/// Row-compressed set of `(row, col)` index pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    /// Graph distance the pattern was grown with (0 when built directly).
    degree: usize,
}

impl SparsityPattern {
    /// Builds a pattern from per-row column lists (sorted and deduplicated here).
    pub fn from_rows(ncols: usize, rows: Vec<Vec<usize>>, degree: usize) -> Result<Self> {
        let nrows = rows.len();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_unstable();
            r.dedup();
            if let Some(&j) = r.last() {
                if j >= ncols {
                    return Err(Error::IndexOutOfRange {
                        row: i,
                        col: j,
                        nrows,
                        ncols,
                    });
                }
            }
            col_indices.extend(r);
            row_offsets.push(col_indices.len());
        }
        Ok(SparsityPattern {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            degree,
        })
    }

    pub fn from_pairs(nrows: usize, ncols: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j) in pairs {
            if i >= nrows {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    nrows,
                    ncols,
                });
            }
            rows[i].push(j);
        }
        Self::from_rows(ncols, rows, 0)
    }

    pub fn full(nrows: usize, ncols: usize) -> Self {
        Self::from_rows(ncols, vec![(0..ncols).collect(); nrows], 0).expect("in range")
    }

    /// The nonzero structure of a sparse matrix.
    pub fn of_matrix(m: &SparseMatrix) -> Self {
        SparsityPattern {
            nrows: m.nrows(),
            ncols: m.ncols(),
            row_offsets: m.row_offsets().to_vec(),
            col_indices: m.col_indices().to_vec(),
            degree: 0,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).iter().map(move |&j| (i, j)))
    }

    /// Rows with no admissible entries.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.nrows).filter(|&i| self.row(i).is_empty()).collect()
    }

    pub fn is_subset_of(&self, other: &SparsityPattern) -> bool {
        self.shape() == other.shape() && self.pairs().all(|(i, j)| other.contains(i, j))
    }
}

/// A matrix whose entries outside its pattern are identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl PatternMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        PatternMatrix { pattern, values }
    }

    pub fn from_values(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(dim_mismatch(format!(
                "{} values for a pattern with {} entries",
                values.len(),
                pattern.nnz()
            )));
        }
        Ok(PatternMatrix { pattern, values })
    }

    /// Restriction of a dense matrix to the pattern.
    pub fn restrict(pattern: Arc<SparsityPattern>, d: &DenseMatrix) -> Result<Self> {
        if d.shape() != pattern.shape() {
            return Err(dim_mismatch("restrict: shape differs from pattern"));
        }
        let values = pattern.pairs().map(|(i, j)| d[(i, j)]).collect();
        Ok(PatternMatrix { pattern, values })
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pattern.shape()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        (self.pattern.row(i), &self.values[self.pattern.row_range(i)])
    }

    pub fn row_values_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.pattern.row_range(i);
        &mut self.values[r]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.pattern.nrows(), self.pattern.ncols());
        for ((i, j), &v) in self.pattern.pairs().zip(&self.values) {
            d[(i, j)] = v;
        }
        d
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_csr(
            self.pattern.nrows(),
            self.pattern.ncols(),
            self.pattern.row_offsets.clone(),
            self.pattern.col_indices.clone(),
            self.values.clone(),
        )
        .expect("pattern is canonical")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// self += alpha * other (same pattern).
    pub fn axpy(&mut self, alpha: f64, other: &PatternMatrix) {
        debug_assert!(self.same_pattern(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    /// Entry-wise product (same pattern).
    pub fn hadamard(&self, other: &PatternMatrix) -> PatternMatrix {
        debug_assert!(self.same_pattern(other));
        PatternMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn same_pattern(&self, other: &PatternMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }
}

/// Frobenius inner product `Σ_ij W_ij Z_ij` over the union of stored entries.
pub fn pattern_inner(w: &PatternMatrix, z: &PatternMatrix) -> Result<f64> {
    if w.shape() != z.shape() {
        return Err(dim_mismatch(format!(
            "pattern_inner: {:?} vs {:?}",
            w.shape(),
            z.shape()
        )));
    }
    if w.same_pattern(z) {
        return Ok(w.values.iter().zip(&z.values).map(|(a, b)| a * b).sum());
    }
    let mut s = 0.0;
    for i in 0..w.shape().0 {
        let (wc, wv) = w.row(i);
        let (zc, zv) = z.row(i);
        let (mut a, mut b) = (0, 0);
        while a < wc.len() && b < zc.len() {
            match wc[a].cmp(&zc[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += wv[a] * zv[b];
                    a += 1;
                    b += 1;
                }
            }
        }
    }
    Ok(s)
}
