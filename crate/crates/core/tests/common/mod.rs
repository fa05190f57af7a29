//! Random instances and dense oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use emin_amg::coarsening::BlockSplit;
use emin_amg::energymin::{build_weighted_system, prepare_candidates, CandidateSet, WeightedSystem};
use emin_amg::smoothing::SpectralEquivalence;
use emin_amg::sparse::{DenseMatrix, PatternMatrix, SparseMatrix, SparsityPattern};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sparse symmetric, strictly diagonally dominant with positive diagonal.
pub fn random_spd_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    let mut rowsum = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            // keep a path so the graph stays connected
            if j == i + 1 || rng.gen::<f64>() < density {
                let v = -rng.gen_range(0.1..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
                rowsum[i] += -v;
                rowsum[j] += -v;
            }
        }
    }
    for (i, s) in rowsum.iter().enumerate() {
        t.push((i, i, s + rng.gen_range(0.05..1.0)));
    }
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

/// Dense SPD matrix `GᵀG + shift·I`.
pub fn random_spd_dense(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DenseMatrix {
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    g.transpose().matmul(&g).add(&DenseMatrix::identity(n).scale(shift))
}

pub fn random_split(rng: &mut ChaCha8Rng, n: usize, nc: usize) -> BlockSplit {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut c = idx[..nc].to_vec();
    c.sort_unstable();
    BlockSplit::from_c_points(n, &c).unwrap()
}

/// Every row gets between `min_row` and `nc` distinct columns.
pub fn random_pattern(rng: &mut ChaCha8Rng, nf: usize, nc: usize, min_row: usize) -> Arc<SparsityPattern> {
    let rows = (0..nf)
        .map(|_| {
            let k = rng.gen_range(min_row..=nc);
            let mut cols: Vec<usize> = (0..nc).collect();
            cols.shuffle(rng);
            cols.truncate(k);
            cols
        })
        .collect();
    Arc::new(SparsityPattern::from_rows(nc, rows, 1).unwrap())
}

pub fn random_pattern_matrix(rng: &mut ChaCha8Rng, pattern: &Arc<SparsityPattern>) -> PatternMatrix {
    let vals = (0..pattern.nnz()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    PatternMatrix::from_values(pattern.clone(), vals).unwrap()
}

pub fn random_candidates(rng: &mut ChaCha8Rng, n: usize, nb: usize) -> CandidateSet {
    let mut v = DenseMatrix::from_fn(n, nb, |_, _| rng.gen_range(-1.0..1.0));
    for i in 0..n {
        v[(i, 0)] = 1.0 + 0.1 * v[(i, 0)];
    }
    CandidateSet::new(v).unwrap()
}

/// The operator `𝓛̂` as a dense matrix over the pattern entries, in storage order.
pub fn vectorized_operator(sys: &WeightedSystem) -> DenseMatrix {
    let pat = &sys.pattern;
    let pairs: Vec<(usize, usize)> = pat.pairs().collect();
    let a_ff = sys.a_ff.to_dense();
    let bbt = sys.b_c.matmul(&sys.b_c.transpose());
    let wb = sys.c2 * (1.0 - sys.tau);
    DenseMatrix::from_fn(pairs.len(), pairs.len(), |r, s| {
        let (i, j) = pairs[r];
        let (k, l) = pairs[s];
        let mut v = 0.0;
        if j == l {
            v += sys.tau * a_ff[(i, k)];
        }
        if i == k {
            v += wb * sys.x_ff_diag[i] * bbt[(l, j)];
        }
        v
    })
}

pub fn solve_dense(m: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    m.lu().unwrap().solve(b)
}

pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Equality-constrained minimizer of `½⟨A_ff W, W⟩ + ⟨A_fc, W⟩` subject to
/// `W B_c = B_f` on the pattern, through the dense KKT system.
pub fn kkt_oracle(
    a: &SparseMatrix,
    split: &BlockSplit,
    cands: &CandidateSet,
    pattern: &SparsityPattern,
) -> Vec<f64> {
    let (a_ff, a_fc, _, _) = split.blocks(a);
    let a_ff = a_ff.to_dense();
    let a_fc = a_fc.to_dense();
    let b_c = cands.b_c(split);
    let b_f = cands.b_f(split);
    let pairs: Vec<(usize, usize)> = pattern.pairs().collect();
    let m = pairs.len();
    let nb = cands.n_vecs();
    let nf = split.nf();
    let nk = m + nf * nb;
    let mut k = DenseMatrix::zeros(nk, nk);
    let mut rhs = vec![0.0; nk];
    for (r, &(i, j)) in pairs.iter().enumerate() {
        for (s, &(kk, l)) in pairs.iter().enumerate() {
            if j == l {
                k[(r, s)] = a_ff[(i, kk)];
            }
        }
        rhs[r] = -a_fc[(i, j)];
        for t in 0..nb {
            let c = m + i * nb + t;
            k[(r, c)] = b_c[(j, t)];
            k[(c, r)] = b_c[(j, t)];
        }
    }
    for i in 0..nf {
        for t in 0..nb {
            rhs[m + i * nb + t] = b_f[(i, t)];
        }
    }
    let sol = solve_dense(&k, &rhs);
    sol[..m].to_vec()
}

/// A random weighted system with `nf ≤ nf_max` fine points and 1 or 2 candidates.
pub fn random_weighted(seed: u64, nf_max: usize, tau: f64) -> (WeightedSystem, Arc<SparsityPattern>) {
    let mut g = rng(seed);
    let nc = g.gen_range(3..=10);
    let nf = g.gen_range(2..=nf_max);
    let n = nc + nf;
    let a = random_spd_sparse(&mut g, n, 0.2);
    let split = random_split(&mut g, n, nc);
    let nb = g.gen_range(1..=2);
    let cands = prepare_candidates(&a, &random_candidates(&mut g, n, nb).vectors).unwrap();
    let pattern = random_pattern(&mut g, nf, nc, 1);
    let sys = build_weighted_system(&a, &split, &cands, &SpectralEquivalence::default(), tau, pattern.clone()).unwrap();
    (sys, pattern)
}
