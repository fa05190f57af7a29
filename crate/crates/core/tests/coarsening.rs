mod common;

use common::*;
use emin_amg::coarsening::{cf_split, pattern_distance_k, strength_graph};
use emin_amg::problems::{assemble, ProblemSpec, DEFAULT_THETA};
use proptest::prelude::*;

fn check_split(a: &emin_amg::sparse::SparseMatrix, theta: f64) {
    let s = strength_graph(a, theta).unwrap();
    let split = cf_split(&s);
    assert_eq!(split.nc() + split.nf(), a.nrows());
    for &c in split.c_points() {
        for &j in s.neighbors(c) {
            assert!(!split.is_c(j), "C points {c} and {j} are strongly coupled");
        }
    }
    for &f in split.f_points() {
        assert!(s.neighbors(f).iter().any(|&j| split.is_c(j)), "F point {f} has no strong C neighbour");
    }
}

#[test]
fn split_is_independent_and_covering_on_model_problems() {
    for spec in [
        ProblemSpec::rotated_anisotropic(16, 1.0, DEFAULT_THETA),
        ProblemSpec::rotated_anisotropic(16, 0.001, DEFAULT_THETA),
        ProblemSpec::oscillatory(16, 1e6),
    ] {
        check_split(&assemble(&spec).unwrap().matrix, 0.25);
    }
}

#[test]
fn poisson_coarsens_by_about_half() {
    let a = assemble(&ProblemSpec::rotated_anisotropic(32, 1.0, 0.0)).unwrap().matrix;
    let split = cf_split(&strength_graph(&a, 0.25).unwrap());
    let ratio = split.nc() as f64 / a.nrows() as f64;
    assert!((0.4..=0.6).contains(&ratio), "C fraction {ratio}");
}

#[test]
fn distance_one_pattern_is_strong_c_neighbourhood() {
    let a = assemble(&ProblemSpec::rotated_anisotropic(12, 0.1, DEFAULT_THETA)).unwrap().matrix;
    let s = strength_graph(&a, 0.25).unwrap();
    let split = cf_split(&s);
    let pat = pattern_distance_k(&s, &split, 1).unwrap();
    for (fi, &f) in split.f_points().iter().enumerate() {
        let mut expect: Vec<usize> = s
            .neighbors(f)
            .iter()
            .filter(|&&j| split.is_c(j))
            .map(|&j| split.c_points().binary_search(&j).unwrap())
            .collect();
        expect.sort_unstable();
        assert_eq!(pat.row(fi), &expect[..]);
    }
}

proptest! {
    #[test]
    fn random_graphs_split_correctly(seed in 0u64..200, n in 2usize..40, theta in 0.0f64..0.9) {
        let mut g = rng(seed);
        let a = random_spd_sparse(&mut g, n, 0.15);
        check_split(&a, theta);
    }

    #[test]
    fn patterns_grow_with_degree(seed in 0u64..100, n in 4usize..40) {
        let mut g = rng(seed);
        let a = random_spd_sparse(&mut g, n, 0.1);
        let s = strength_graph(&a, 0.25).unwrap();
        let split = cf_split(&s);
        let mut prev = pattern_distance_k(&s, &split, 1).unwrap();
        prop_assert!(prev.empty_rows().is_empty());
        for k in 2..=4 {
            let next = pattern_distance_k(&s, &split, k).unwrap();
            prop_assert!(prev.is_subset_of(&next));
            prev = next;
        }
    }
}
