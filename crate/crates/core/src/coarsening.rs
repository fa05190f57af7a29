//! Strength of connection, C/F splitting and interpolation sparsity patterns.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sparse::{DenseMatrix, SparseMatrix, SparsityPattern};

/// Symmetric graph of strong couplings; edge weights are the scaled
/// magnitudes `|a_ij| / sqrt(a_ii a_jj)`.
#[derive(Debug, Clone)]
pub struct StrengthGraph {
    pub adjacency: SparseMatrix,
    pub theta_strength: f64,
}

impl StrengthGraph {
    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adjacency.row(i).0
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }
}

/// Keeps edge `(i,j)` when its scaled magnitude is at least `theta_strength`
/// times the largest in row `i`, then symmetrizes by union.
pub fn strength_graph(a: &SparseMatrix, theta_strength: f64) -> Result<StrengthGraph> {
    if !(0.0..=1.0).contains(&theta_strength) {
        return Err(Error::InvalidParameter(format!(
            "theta_strength = {theta_strength} outside [0, 1]"
        )));
    }
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonpositiveDiagonal(i));
    }
    let mut edges = Vec::new();
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let ratio = |j: usize, v: f64| v.abs() / (d[i] * d[j]).sqrt();
        let max = cols
            .iter()
            .zip(vals)
            .filter(|(&j, _)| j != i)
            .map(|(&j, &v)| ratio(j, v))
            .fold(0.0, f64::max);
        if max == 0.0 {
            continue;
        }
        for (&j, &v) in cols.iter().zip(vals) {
            let r = ratio(j, v);
            if j != i && r > 0.0 && r >= theta_strength * max {
                edges.push((i, j, r));
                edges.push((j, i, r));
            }
        }
    }
    // union: duplicate pairs would be summed, so keep one copy of each
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    edges.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
    let adjacency = SparseMatrix::from_triplets(a.nrows(), a.ncols(), &edges)?;
    Ok(StrengthGraph {
        adjacency,
        theta_strength,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    C,
    F,
}

/// A partition of `0..n` into coarse (C) and fine (F) points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSplit {
    c_points: Vec<usize>,
    f_points: Vec<usize>,
    fine_to_block: Vec<(Side, usize)>,
}

impl BlockSplit {
    pub fn from_c_points(n: usize, c_points: &[usize]) -> Result<Self> {
        let mut is_c = vec![false; n];
        for &c in c_points {
            if c >= n {
                return Err(Error::InvalidParameter(format!("C-point {c} outside 0..{n}")));
            }
            if is_c[c] {
                return Err(Error::InvalidParameter(format!("C-point {c} listed twice")));
            }
            is_c[c] = true;
        }
        Ok(Self::from_mask(&is_c))
    }

    pub fn from_mask(is_c: &[bool]) -> Self {
        let mut c_points = Vec::new();
        let mut f_points = Vec::new();
        let mut fine_to_block = Vec::with_capacity(is_c.len());
        for (i, &c) in is_c.iter().enumerate() {
            if c {
                fine_to_block.push((Side::C, c_points.len()));
                c_points.push(i);
            } else {
                fine_to_block.push((Side::F, f_points.len()));
                f_points.push(i);
            }
        }
        BlockSplit {
            c_points,
            f_points,
            fine_to_block,
        }
    }

    pub fn n(&self) -> usize {
        self.fine_to_block.len()
    }

    pub fn nc(&self) -> usize {
        self.c_points.len()
    }

    pub fn nf(&self) -> usize {
        self.f_points.len()
    }

    pub fn c_points(&self) -> &[usize] {
        &self.c_points
    }

    pub fn f_points(&self) -> &[usize] {
        &self.f_points
    }

    pub fn side(&self, i: usize) -> (Side, usize) {
        self.fine_to_block[i]
    }

    pub fn is_c(&self, i: usize) -> bool {
        self.fine_to_block[i].0 == Side::C
    }

    /// `(A_ff, A_fc, A_cf, A_cc)`.
    pub fn blocks(
        &self,
        a: &SparseMatrix,
    ) -> (SparseMatrix, SparseMatrix, SparseMatrix, SparseMatrix) {
        let (f, c) = (&self.f_points, &self.c_points);
        (a.submatrix(f, f), a.submatrix(f, c), a.submatrix(c, f), a.submatrix(c, c))
    }

    /// `R`: `nc x n`, picks out the C-points.
    pub fn r_injection(&self) -> DenseMatrix {
        let mut r = DenseMatrix::zeros(self.nc(), self.n());
        for (k, &c) in self.c_points.iter().enumerate() {
            r[(k, c)] = 1.0;
        }
        r
    }

    /// `S`: `n x nf`, extends by zero from the F-points.
    pub fn s_injection(&self) -> DenseMatrix {
        let mut s = DenseMatrix::zeros(self.n(), self.nf());
        for (k, &f) in self.f_points.iter().enumerate() {
            s[(f, k)] = 1.0;
        }
        s
    }

    /// Rows of `v` (length n) at the C-points.
    pub fn c_rows(&self, v: &[f64]) -> Vec<f64> {
        self.c_points.iter().map(|&i| v[i]).collect()
    }

    pub fn f_rows(&self, v: &[f64]) -> Vec<f64> {
        self.f_points.iter().map(|&i| v[i]).collect()
    }
}

/// Greedy first-pass C/F splitting.
///
/// The measure of an unassigned vertex is its strong degree plus the number
/// of its strong neighbours already made F. The vertex of largest measure
/// (lowest index on ties) becomes C and its unassigned neighbours become F.
/// Vertices without strong edges become C.
pub fn cf_split(s: &StrengthGraph) -> BlockSplit {
    let n = s.n();
    let mut state: Vec<Option<Side>> = vec![None; n];
    let mut measure: Vec<usize> = (0..n).map(|i| s.degree(i)).collect();
    let mut heap = BinaryHeap::with_capacity(n);
    for i in 0..n {
        if measure[i] == 0 {
            state[i] = Some(Side::C);
        } else {
            heap.push((measure[i], Reverse(i)));
        }
    }
    while let Some((m, Reverse(i))) = heap.pop() {
        if state[i].is_some() || m != measure[i] {
            continue;
        }
        state[i] = Some(Side::C);
        for &j in s.neighbors(i) {
            if state[j].is_some() {
                continue;
            }
            state[j] = Some(Side::F);
            for &k in s.neighbors(j) {
                if state[k].is_none() {
                    measure[k] += 1;
                    heap.push((measure[k], Reverse(k)));
                }
            }
        }
    }
    let mask: Vec<bool> = state.iter().map(|s| *s == Some(Side::C)).collect();
    BlockSplit::from_mask(&mask)
}

/// Pattern of C-points within `k` strength-graph edges of each F-point, in
/// local (F row, C column) indexing. F-points reaching no C-point get empty
/// rows; see [`SparsityPattern::empty_rows`].
pub fn pattern_distance_k(s: &StrengthGraph, split: &BlockSplit, k: usize) -> Result<SparsityPattern> {
    if k == 0 {
        return Err(Error::InvalidParameter("pattern degree must be at least 1".into()));
    }
    if s.n() != split.n() {
        return Err(crate::error::dim_mismatch("strength graph and split sizes differ"));
    }
    let n = s.n();
    let mut stamp = vec![usize::MAX; n];
    let mut frontier = Vec::new();
    let mut next = Vec::new();
    let mut rows = Vec::with_capacity(split.nf());
    for (fi, &root) in split.f_points().iter().enumerate() {
        let mut cols = Vec::new();
        frontier.clear();
        frontier.push(root);
        stamp[root] = fi;
        for _ in 0..k {
            next.clear();
            for &v in &frontier {
                for &w in s.neighbors(v) {
                    if stamp[w] != fi {
                        stamp[w] = fi;
                        next.push(w);
                        if let (Side::C, local) = split.side(w) {
                            cols.push(local);
                        }
                    }
                }
            }
            std::mem::swap(&mut frontier, &mut next);
            if frontier.is_empty() {
                break;
            }
        }
        rows.push(cols);
    }
    SparsityPattern::from_rows(split.nc(), rows, k)
}
