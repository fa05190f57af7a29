mod common;

use common::*;
use emin_amg::hierarchy::galerkin_product;
use emin_amg::sparse::{
    dense_sym_eig, perfect_shuffle, read_matrix_market, vec_col_major, vec_row_major, write_matrix_market,
    DenseMatrix, MmSymmetry, SparseMatrix,
};
use proptest::prelude::*;
use rand::Rng;

fn random_sparse(g: &mut rand_chacha::ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if g.gen::<f64>() < density {
                t.push((i, j, g.gen_range(-2.0..2.0)));
            }
        }
    }
    SparseMatrix::from_triplets(m, n, &t).unwrap()
}

fn max_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).max_abs()
}

#[test]
fn galerkin_product_matches_dense_triple_product() {
    for seed in 0..20 {
        let mut g = rng(seed);
        let n = g.gen_range(2..40);
        let nc = g.gen_range(1..=n);
        let a = random_spd_sparse(&mut g, n, 0.2);
        let p = random_sparse(&mut g, n, nc, 0.3);
        let ac = galerkin_product(&p, &a).unwrap();
        let (pd, ad) = (p.to_dense(), a.to_dense());
        let expect = pd.transpose().matmul(&ad).matmul(&pd);
        assert!(max_diff(&ac.to_dense(), &expect) <= 1e-12 * expect.max_abs().max(1.0));
        assert_eq!(ac.skew(), 0.0);
    }
}

#[test]
fn duplicate_triplets_are_summed() {
    let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.5), (1, 0, -1.0)]).unwrap();
    assert_eq!(a.get(0, 1), 3.5);
    assert_eq!(a.nnz(), 2);
}

#[test]
fn matrix_market_symmetric_storage_keeps_lower_triangle() {
    let mut g = rng(3);
    let a = random_spd_sparse(&mut g, 12, 0.3);
    let mut buf = Vec::new();
    write_matrix_market(&mut buf, &a, MmSymmetry::Symmetric).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    for line in text.lines().skip(2) {
        let mut it = line.split_whitespace();
        let i: usize = it.next().unwrap().parse().unwrap();
        let j: usize = it.next().unwrap().parse().unwrap();
        assert!(i >= j);
    }
    let back = read_matrix_market(&buf[..]).unwrap();
    assert_eq!(back.to_dense(), a.to_dense());
}

#[test]
fn matrix_market_rejects_malformed_input() {
    let bad = [
        "%%MatrixMarket matrix array real general\n1 1\n1\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
        "not a header\n",
    ];
    for text in bad {
        assert!(read_matrix_market(text.as_bytes()).is_err(), "{text:?}");
    }
}

#[test]
fn generalized_eigenvectors_are_b_orthonormal() {
    let mut g = rng(11);
    let a = random_spd_dense(&mut g, 9, 0.1);
    let b = random_spd_dense(&mut g, 9, 1.0);
    let e = dense_sym_eig(&a, Some(&b)).unwrap();
    let v = &e.vectors;
    let gram = v.transpose().matmul(&b).matmul(v);
    assert!(max_diff(&gram, &DenseMatrix::identity(9)) < 1e-10);
    let av = a.matmul(v);
    let bvl = b.matmul(v).matmul(&DenseMatrix::from_diagonal(&e.values));
    assert!(max_diff(&av, &bvl) < 1e-9 * a.max_abs());
    assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
}

proptest! {
    #[test]
    fn spgemm_matches_dense(seed in 0u64..500, m in 1usize..12, k in 1usize..12, n in 1usize..12) {
        let mut g = rng(seed);
        let a = random_sparse(&mut g, m, k, 0.3);
        let b = random_sparse(&mut g, k, n, 0.3);
        let c = a.matmul(&b).unwrap();
        let expect = a.to_dense().matmul(&b.to_dense());
        prop_assert!(max_diff(&c.to_dense(), &expect) < 1e-12);
        prop_assert_eq!(c.transpose().to_dense(), c.to_dense().transpose());
    }

    #[test]
    fn shuffle_vectorizations(nf in 1usize..8, nc in 1usize..8, seed in 0u64..50) {
        let mut g = rng(seed);
        let w = DenseMatrix::from_fn(nf, nc, |_, _| g.gen_range(-1.0..1.0));
        let y = perfect_shuffle(nf, nc);
        prop_assert_eq!(y.apply(&vec_row_major(&w)), vec_col_major(&w));
        prop_assert_eq!(y.inverse().apply(&vec_col_major(&w)), vec_row_major(&w));
    }
}
