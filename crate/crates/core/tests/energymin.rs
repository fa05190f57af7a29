mod common;

use std::sync::Arc;

use common::*;
use emin_amg::coarsening::{cf_split, pattern_distance_k, strength_graph, BlockSplit};
use emin_amg::energymin::*;
use emin_amg::problems::{assemble, ProblemSpec};
use emin_amg::smoothing::SpectralEquivalence;
use emin_amg::sparse::{pattern_inner, DenseMatrix, PatternMatrix, SparseMatrix, SparsityPattern};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn weighted_pcg_matches_vectorized_oracle() {
    for seed in 0..20 {
        // at τ = 0 the operator is singular once a row has more entries than candidates
        let tau = [0.05, 0.3, 1.0][seed as usize % 3];
        let (sys, pattern) = random_weighted(seed, 50, tau);
        let op = vectorized_operator(&sys);
        let expect = solve_dense(&op, sys.bhat.values());
        let ctl = CgControl {
            max_iters: 2000,
            tol: 1e-14,
            precondition: true,
        };
        let out = pcg_frobenius(&sys, &PatternMatrix::zeros(pattern), ctl).unwrap();
        let d = rel_diff(out.w.values(), &expect);
        assert!(d <= 1e-8, "seed {seed}: relative difference {d:e}");
    }
}

#[test]
fn operator_matches_vectorized_oracle() {
    let (sys, pattern) = random_weighted(99, 20, 0.4);
    let mut g = rng(5);
    let w = random_pattern_matrix(&mut g, &pattern);
    let op = vectorized_operator(&sys);
    let expect = op.matvec(w.values());
    assert!(rel_diff(sys.apply(&w).values(), &expect) < 1e-13);
}

#[test]
fn self_adjoint_and_positive() {
    for seed in 0..30 {
        for tau in [0.0, 0.5, 1.0] {
            let (sys, pattern) = random_weighted(1000 + seed, 30, tau);
            let mut g = rng(seed);
            let w = random_pattern_matrix(&mut g, &pattern);
            let z = random_pattern_matrix(&mut g, &pattern);
            let lw = sys.apply(&w);
            let lz = sys.apply(&z);
            let gap = (pattern_inner(&lw, &z).unwrap() - pattern_inner(&w, &lz).unwrap()).abs();
            assert!(gap <= 1e-12 * w.frobenius_norm() * z.frobenius_norm(), "seed {seed} tau {tau}: {gap:e}");
            assert!(pattern_inner(&lw, &w).unwrap() > 0.0);
        }
    }
}

#[test]
fn unique_solution_from_any_start() {
    let (sys, pattern) = random_weighted(7, 25, 0.5);
    let ctl = CgControl {
        max_iters: 1000,
        tol: 1e-14,
        precondition: true,
    };
    let mut g = rng(8);
    let a = pcg_frobenius(&sys, &PatternMatrix::zeros(pattern.clone()), ctl).unwrap();
    let b = pcg_frobenius(&sys, &random_pattern_matrix(&mut g, &pattern), ctl).unwrap();
    let mut d = a.w.clone();
    d.axpy(-1.0, &b.w);
    assert!(d.frobenius_norm() <= 1e-8);
}

#[test]
fn weighted_functional_non_increasing() {
    for seed in 0..10 {
        for precondition in [true, false] {
            let (sys, pattern) = random_weighted(200 + seed, 40, 0.2);
            let ctl = CgControl {
                max_iters: 60,
                tol: 0.0,
                precondition,
            };
            let out = pcg_frobenius(&sys, &PatternMatrix::zeros(pattern), ctl).unwrap();
            let f = &out.functional_history;
            for k in 1..f.len() {
                assert!(f[k] <= f[k - 1] + 1e-12 * f[k - 1].abs().max(1.0), "seed {seed}: {} > {}", f[k], f[k - 1]);
            }
            assert!((f[f.len() - 1] - sys.functional(&out.w)).abs() < 1e-8 * f[f.len() - 1].abs().max(1.0));
        }
    }
}

#[test]
fn tau_one_full_pattern_gives_ideal_weights() {
    let mut g = rng(11);
    let n = 14;
    let a = random_spd_sparse(&mut g, n, 0.3);
    let split = random_split(&mut g, n, 5);
    let cands = prepare_candidates(&a, &CandidateSet::constant(n).vectors).unwrap();
    let pattern = Arc::new(SparsityPattern::full(split.nf(), split.nc()));
    let sys = build_weighted_system(&a, &split, &cands, &SpectralEquivalence::default(), 1.0, pattern.clone()).unwrap();
    let ctl = CgControl {
        max_iters: 500,
        tol: 1e-14,
        precondition: true,
    };
    let out = pcg_frobenius(&sys, &PatternMatrix::zeros(pattern), ctl).unwrap();
    let (a_ff, a_fc, _, _) = split.blocks(&a);
    let ideal = a_ff.to_dense().solve(&a_fc.to_dense().scale(-1.0)).unwrap();
    assert!(out.w.to_dense().sub(&ideal).max_abs() < 1e-8);
}

#[test]
fn weight_limits_approach_the_two_problems() {
    let mut g = rng(12);
    let n = 16;
    let a = random_spd_sparse(&mut g, n, 0.3);
    let split = random_split(&mut g, n, 6);
    let cands = prepare_candidates(&a, &random_candidates(&mut g, n, 1).vectors).unwrap();
    let pattern = random_pattern(&mut g, split.nf(), split.nc(), 2);
    let ctl = CgControl {
        max_iters: 5000,
        tol: 1e-15,
        precondition: true,
    };
    let solve = |tau: f64| {
        let sys = build_weighted_system(&a, &split, &cands, &SpectralEquivalence::default(), tau, pattern.clone()).unwrap();
        pcg_frobenius(&sys, &initial_guess(&split, &cands, pattern.clone()).unwrap(), ctl).unwrap().w
    };
    // τ → 0: the constraint dominates and the solution satisfies it
    let w0 = solve(1e-12);
    let resid = w0.to_dense().matmul(&cands.b_c(&split)).sub(&cands.b_f(&split)).max_abs();
    assert!(resid < 1e-6, "{resid:e}");
    // τ → 1: the unconstrained pattern energy minimizer
    let w1 = solve(1.0 - 1e-12);
    let sys1 = build_weighted_system(&a, &split, &cands, &SpectralEquivalence::default(), 1.0, pattern.clone()).unwrap();
    let expect = solve_dense(&vectorized_operator(&sys1), sys1.bhat.values());
    assert!(rel_diff(w1.values(), &expect) < 1e-6);
}

#[test]
fn diagonal_aff_makes_preconditioning_a_rescaling() {
    // With A_ff = αI and τ = 1 both variants take identical steps.
    let n = 9;
    let c = [0usize, 4, 8];
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 3.0));
    }
    for &(i, j) in &[(1, 0), (1, 4), (2, 4), (3, 4), (5, 4), (5, 8), (6, 8), (7, 8), (7, 0)] {
        t.push((i, j, -0.7));
        t.push((j, i, -0.7));
    }
    let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
    let split = BlockSplit::from_c_points(n, &c).unwrap();
    let cands = prepare_candidates(&a, &CandidateSet::constant(n).vectors).unwrap();
    let pattern = Arc::new(SparsityPattern::full(split.nf(), split.nc()));
    let sys = build_weighted_system(&a, &split, &cands, &SpectralEquivalence::default(), 1.0, pattern.clone()).unwrap();
    let run = |precondition| {
        let ctl = CgControl {
            max_iters: 3,
            tol: 0.0,
            precondition,
        };
        pcg_frobenius(&sys, &PatternMatrix::zeros(pattern.clone()), ctl).unwrap()
    };
    let (p, u) = (run(true), run(false));
    assert_eq!(p.iterations, u.iterations);
    assert!(rel_diff(p.w.values(), u.w.values()) < 1e-13);
}

#[test]
fn constrained_matches_kkt_oracle() {
    for seed in 0..15 {
        let mut g = rng(300 + seed);
        let n = g.gen_range(12..=30);
        let nc = g.gen_range(4..=n / 2);
        let a = random_spd_sparse(&mut g, n, 0.25);
        let split = random_split(&mut g, n, nc);
        let nb = g.gen_range(1..=2);
        let cands = prepare_candidates(&a, &random_candidates(&mut g, n, nb).vectors).unwrap();
        let pattern = random_pattern(&mut g, split.nf(), nc, nb + 1);
        let ctl = CgControl {
            max_iters: 1000,
            tol: 1e-14,
            precondition: true,
        };
        let (interp, out) = constrained_energymin(&a, &split, &cands, pattern.clone(), ctl).unwrap();
        let expect = kkt_oracle(&a, &split, &cands, &pattern);
        let d = rel_diff(interp.w.values(), &expect);
        assert!(d < 1e-8, "seed {seed}: {d:e} after {} iterations", out.iterations);
    }
}

#[test]
fn constrained_iterates_stay_feasible_and_descend() {
    let mut g = rng(17);
    let n = 40;
    let a = random_spd_sparse(&mut g, n, 0.15);
    let split = random_split(&mut g, n, 12);
    let cands = prepare_candidates(&a, &random_candidates(&mut g, n, 2).vectors).unwrap();
    let pattern = random_pattern(&mut g, split.nf(), split.nc(), 3);
    let b_f = cands.b_f(&split);
    let mut prev = f64::INFINITY;
    for iters in 0..12 {
        let ctl = CgControl {
            max_iters: iters,
            tol: 0.0,
            precondition: true,
        };
        let (interp, out) = constrained_energymin(&a, &split, &cands, pattern.clone(), ctl).unwrap();
        let viol = interp.w.to_dense().matmul(&cands.b_c(&split)).sub(&b_f).max_abs();
        assert!(viol <= 1e-12 * b_f.max_abs(), "iters {iters}: {viol:e}");
        let f = *out.functional_history.last().unwrap();
        assert!(f <= prev + 1e-12 * f.abs().max(1.0));
        prev = f;
    }
}

#[test]
fn constrained_on_poisson_keeps_constant_and_lowers_energy() {
    let p = assemble(&ProblemSpec::rotated_anisotropic(16, 1.0, 0.0)).unwrap();
    let a = &p.matrix;
    let graph = strength_graph(a, 0.25).unwrap();
    let split = cf_split(&graph);
    let cands = prepare_candidates(a, &CandidateSet::constant(a.nrows()).vectors).unwrap();
    let energy = |w: &PatternMatrix| {
        let pmat = assemble_p(w, &split).unwrap();
        let ap = a.matmul(&pmat).unwrap();
        pmat.transpose().matmul(&ap).unwrap().diagonal().iter().sum::<f64>()
    };
    let mut last = f64::INFINITY;
    for degree in [1, 3] {
        let pattern = Arc::new(pattern_distance_k(&graph, &split, degree).unwrap());
        let ctl = CgControl {
            max_iters: 200,
            tol: 1e-12,
            precondition: true,
        };
        let (interp, _) = constrained_energymin(a, &split, &cands, pattern.clone(), ctl).unwrap();
        let ones = vec![1.0; split.nc()];
        let p1 = interp.p.spmv(&ones).unwrap();
        assert!(p1.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let expect = kkt_oracle(a, &split, &cands, &pattern);
        assert!(rel_diff(interp.w.values(), &expect) < 1e-8);
        let e = energy(&interp.w);
        assert!(e <= last + 1e-9);
        last = e;
    }
}

#[test]
fn one_dimensional_hand_solution() {
    let n = 5;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
    let split = BlockSplit::from_c_points(n, &[0, 2, 4]).unwrap();
    let pattern = Arc::new(SparsityPattern::from_rows(3, vec![vec![0, 1], vec![1, 2]], 1).unwrap());
    let cands = prepare_candidates(&a, &CandidateSet::constant(n).vectors).unwrap();
    let (interp, _) = constrained_energymin(&a, &split, &cands, pattern, CgControl::default()).unwrap();
    assert_eq!(interp.w.row(0).1.len(), 2);
    for i in 0..2 {
        for &v in interp.w.row(i).1 {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }
}

#[test]
fn initial_guess_matches_pseudoinverse() {
    let mut g = rng(23);
    let n = 12;
    let split = random_split(&mut g, n, 5);
    let cands = random_candidates(&mut g, n, 2);
    let rows: Vec<Vec<usize>> = (0..split.nf()).map(|i| vec![i % 5, (i + 1) % 5, (i + 3) % 5]).collect();
    let pattern = Arc::new(SparsityPattern::from_rows(5, rows, 1).unwrap());
    let w = initial_guess(&split, &cands, pattern.clone()).unwrap();
    let b_c = cands.b_c(&split);
    let b_f = cands.b_f(&split);
    for i in 0..split.nf() {
        let cols = pattern.row(i);
        // w = b (CᵀC)⁻¹ Cᵀ... minimal norm of w C = b is w = b (CᵀC)⁻¹Cᵀ with C = B_c[cols, :]
        let c = b_c.select(cols, &[0, 1]);
        let ctc = c.transpose().matmul(&c);
        let b = DenseMatrix::from_row_major(1, 2, b_f.row(i).to_vec()).unwrap();
        let expect = b.matmul(&ctc.inverse().unwrap()).matmul(&c.transpose());
        for (k, &v) in w.row(i).1.iter().enumerate() {
            assert!((v - expect[(0, k)]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dprec_entries_positive_finite(seed in 0u64..1000, tau in 0.0f64..=1.0) {
        let (sys, _) = random_weighted(seed, 20, tau);
        prop_assert!(sys.dprec.values().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn assembled_p_preserves_candidates(seed in 0u64..1000) {
        let mut g = rng(seed);
        let n = 15;
        let a = random_spd_sparse(&mut g, n, 0.3);
        let split = random_split(&mut g, n, 6);
        let cands = prepare_candidates(&a, &random_candidates(&mut g, n, 1).vectors).unwrap();
        let pattern = random_pattern(&mut g, split.nf(), split.nc(), 1);
        let (interp, _) = constrained_energymin(&a, &split, &cands, pattern, CgControl { max_iters: 4, ..CgControl::default() }).unwrap();
        let pb = interp.p.spmv(&cands.b_c(&split).column(0)).unwrap();
        let b = cands.vectors.column(0);
        for i in 0..n {
            prop_assert!((pb[i] - b[i]).abs() <= 1e-12 * b.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
}
