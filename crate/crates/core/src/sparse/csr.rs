use crate::error::{dim_mismatch, Error, Result};

use super::dense::DenseMatrix;

/// Compressed-row sparse matrix.
///
/// Column indices are strictly increasing within each row. Explicit zeros may
/// be stored but duplicate `(i, j)` pairs never are.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    nrows,
                    ncols,
                });
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, then sort and merge each row
        let mut next = counts.clone();
        let mut buf = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            buf[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for i in 0..nrows {
            let row = &mut buf[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(j, _)| j);
            for &(j, v) in row.iter() {
                if col_indices.len() > row_offsets[i] && *col_indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from raw CSR arrays, validating every invariant.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1
            || row_offsets[0] != 0
            || *row_offsets.last().unwrap() != values.len()
            || col_indices.len() != values.len()
        {
            return Err(dim_mismatch("inconsistent CSR array lengths"));
        }
        for i in 0..nrows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(dim_mismatch("row offsets must be non-decreasing"));
            }
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            for (k, &j) in cols.iter().enumerate() {
                if j >= ncols {
                    return Err(Error::IndexOutOfRange {
                        row: i,
                        col: j,
                        nrows,
                        ncols,
                    });
                }
                if k > 0 && cols[k - 1] >= j {
                    return Err(dim_mismatch(format!("row {i}: columns not strictly increasing")));
                }
            }
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut trip = Vec::new();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    trip.push((i, j, d[(i, j)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &trip).expect("indices in range")
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `A x`, checking dimensions.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(dim_mismatch(format!(
                "spmv: {}x{} matrix with vector of length {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks beyond debug assertions.
    #[inline]
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `b - A x`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Sparse product `self * other` (row-wise Gustavson).
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != other.nrows {
            return Err(dim_mismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.nrows {
            touched.clear();
            let (acols, avals) = self.row(i);
            for (&k, &aik) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &bkj) in bcols.iter().zip(bvals) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += aik * bkj;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Rows `rows` and columns `cols` of `self`, in the given orders.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        row_offsets.push(0);
        for &i in rows {
            entries.clear();
            let (rc, rv) = self.row(i);
            for (&j, &v) in rc.iter().zip(rv) {
                if col_map[j] != usize::MAX {
                    entries.push((col_map[j], v));
                }
            }
            entries.sort_unstable_by_key(|&(j, _)| j);
            for &(j, v) in &entries {
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max_ij |a_ij - a_ji|.
    pub fn skew(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut m = 0.0f64;
        for (i, j, v) in self.triplets() {
            m = m.max((v - t.get(i, j)).abs());
        }
        for (i, j, v) in t.triplets() {
            m = m.max((v - self.get(i, j)).abs());
        }
        m
    }

    /// Symmetric to `max|a_ij - a_ji| <= tol * max|a_ij|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.skew() <= tol * self.max_abs()
    }

    /// (A + Aᵀ)/2 on the union pattern.
    pub fn symmetrized(&self) -> SparseMatrix {
        let t = self.transpose();
        let trip: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (i, j, 0.5 * v))
            .chain(t.triplets().map(|(i, j, v)| (i, j, 0.5 * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &trip).expect("square")
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        SparseMatrix {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `A - B` on the union pattern.
    pub fn sub(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(dim_mismatch("sub: shapes differ"));
        }
        let trip: Vec<_> = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, -v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }
}
