//! Dense two-grid diagnostics for small problems (n up to a few hundred).
//!
//! `A` is SPD, `M` is the single-sweep relaxation operator and `P` has full
//! column rank. The two-grid propagator is
//! `E_TG = (I - M⁻ᵀA)(I - π_A)(I - M⁻¹A)` with `π_A = P(PᵀAP)⁻¹PᵀA`.

use serde::Serialize;

use crate::coarsening::BlockSplit;
use crate::error::{dim_mismatch, Error, Result};
use crate::smoothing::{symmetrized_mtilde, SpectralEquivalence};
use crate::sparse::{dense_sym_eig, DenseMatrix};

/// Largest problem the dense diagnostics accept.
pub const MAX_DENSE_N: usize = 500;

#[derive(Debug, Clone, Default, Serialize)]
pub struct TheoryReport {
    pub etg_norm: f64,
    pub ktg: f64,
    pub kappa_s: f64,
    pub c2_meas: f64,
    pub pr_energy: f64,
    pub trace_schur: f64,
    pub trace_plain: f64,
    pub beta_wap: f64,
    pub beta_sap: f64,
}

fn check_square(a: &DenseMatrix, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(dim_mismatch(format!("{what} must be square")));
    }
    if a.nrows() > MAX_DENSE_N {
        return Err(Error::InvalidParameter(format!(
            "{what} has {} rows; dense diagnostics are capped at {MAX_DENSE_N}",
            a.nrows()
        )));
    }
    Ok(())
}

fn check_p(a: &DenseMatrix, p: &DenseMatrix) -> Result<()> {
    if p.nrows() != a.nrows() {
        return Err(dim_mismatch("P must have one row per unknown"));
    }
    Ok(())
}

/// `f(A)` for symmetric `A` through its eigendecomposition.
fn sym_function(a: &DenseMatrix, f: impl Fn(f64) -> f64) -> Result<DenseMatrix> {
    let e = dense_sym_eig(&a.symmetrized(), None)?;
    let n = a.nrows();
    let v = &e.vectors;
    let fl: Vec<f64> = e.values.iter().map(|&l| f(l)).collect();
    Ok(DenseMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * fl[k] * v[(j, k)]).sum()))
}

fn spd_sqrt_pair(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let e = dense_sym_eig(&a.symmetrized(), None)?;
    if !(e.min() > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok((sym_function(a, f64::sqrt)?, sym_function(a, |l| 1.0 / l.sqrt())?))
}

/// `‖T‖_A = ‖A^{1/2} T A^{-1/2}‖₂`.
pub fn energy_norm(a: &DenseMatrix, t: &DenseMatrix) -> Result<f64> {
    let (s, si) = spd_sqrt_pair(a)?;
    let m = s.matmul(t).matmul(&si);
    let g = m.transpose().matmul(&m).symmetrized();
    Ok(dense_sym_eig(&g, None)?.max().max(0.0).sqrt())
}

/// `π_A = P (PᵀAP)⁻¹ PᵀA`.
pub fn a_projection(a: &DenseMatrix, p: &DenseMatrix) -> Result<DenseMatrix> {
    check_p(a, p)?;
    let pap = p.transpose().matmul(a).matmul(p).symmetrized();
    let chol = pap.cholesky().map_err(|_| Error::RankDeficient)?;
    let scale = pap.diagonal().into_iter().fold(0.0, f64::max);
    let l = chol.lower();
    if (0..l.nrows()).any(|j| l[(j, j)] * l[(j, j)] <= 1e-12 * scale) {
        return Err(Error::RankDeficient);
    }
    let pta = p.transpose().matmul(a);
    Ok(p.matmul(&chol.solve_matrix(&pta)))
}

/// `P (PᵀXP)⁻¹ PᵀX` for SPD `X`.
fn x_projection(x: &DenseMatrix, p: &DenseMatrix) -> Result<DenseMatrix> {
    a_projection(x, p)
}

fn relaxation_propagator(a: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.nrows();
    Ok(DenseMatrix::identity(n).sub(&m.lu()?.solve_matrix(a)))
}

/// `E_TG` as a dense matrix.
pub fn two_grid_propagator(a: &DenseMatrix, m: &DenseMatrix, p: &DenseMatrix) -> Result<DenseMatrix> {
    check_square(a, "A")?;
    check_p(a, p)?;
    let n = a.nrows();
    let post = DenseMatrix::identity(n).sub(&m.transpose().lu()?.solve_matrix(a));
    let pre = relaxation_propagator(a, m)?;
    let cgc = DenseMatrix::identity(n).sub(&a_projection(a, p)?);
    Ok(post.matmul(&cgc).matmul(&pre))
}

/// `‖E_TG‖_A`.
pub fn two_grid_error_norm(a: &DenseMatrix, m: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    energy_norm(a, &two_grid_propagator(a, m, p)?)
}

/// `‖(I - π_A)(I - M⁻¹A)‖_A`, whose square equals `‖E_TG‖_A`.
pub fn one_sided_error_norm(a: &DenseMatrix, m: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    check_square(a, "A")?;
    let n = a.nrows();
    let cgc = DenseMatrix::identity(n).sub(&a_projection(a, p)?);
    energy_norm(a, &cgc.matmul(&relaxation_propagator(a, m)?))
}

/// The symmetrized smoother `M̃ = Mᵀ(M + Mᵀ - A)⁻¹M` entering the sharp
/// two-grid bound.
pub fn two_grid_mtilde(a: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    symmetrized_mtilde(a, m)
}

/// `max_v ‖(I - π_X)v‖²_X / ‖v‖²_A` for SPD `X`.
pub fn weak_approximation_constant(a: &DenseMatrix, x: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    check_square(a, "A")?;
    check_p(a, p)?;
    if p.ncols() >= a.nrows() {
        return Err(Error::DegenerateCoarseSpace);
    }
    let n = a.nrows();
    let q = DenseMatrix::identity(n).sub(&x_projection(x, p)?);
    let num = q.transpose().matmul(x).matmul(&q).symmetrized();
    Ok(dense_sym_eig(&num, Some(&a.symmetrized()))?.max())
}

/// The sharp two-grid constant: `‖E_TG‖_A = 1 - 1/K_TG`.
pub fn ktg(a: &DenseMatrix, m: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    let mt = two_grid_mtilde(a, m)?;
    weak_approximation_constant(a, &mt, p)
}

/// `P_ideal` in the original ordering: `-A_ff⁻¹A_fc` on F rows, identity on C rows.
pub fn ideal_interpolation(a: &DenseMatrix, split: &BlockSplit) -> Result<DenseMatrix> {
    check_square(a, "A")?;
    if a.nrows() != split.n() {
        return Err(dim_mismatch("split size differs from A"));
    }
    let (f, c) = (split.f_points(), split.c_points());
    let a_ff = a.select(f, f);
    let a_fc = a.select(f, c);
    let w = a_ff.lu()?.solve_matrix(&a_fc).scale(-1.0);
    let mut p = DenseMatrix::zeros(split.n(), split.nc());
    for (k, &i) in f.iter().enumerate() {
        p.row_mut(i).copy_from_slice(w.row(k));
    }
    for (k, &i) in c.iter().enumerate() {
        p[(i, k)] = 1.0;
    }
    Ok(p)
}

/// The first `nc` eigenvectors of `Av = λM̃v` and the predicted
/// `‖(I - π_A)(I - M⁻¹A)‖²_A = 1 - λ_{nc+1}`.
pub fn optimal_interpolation(a: &DenseMatrix, m: &DenseMatrix, nc: usize) -> Result<(DenseMatrix, f64)> {
    check_square(a, "A")?;
    if nc >= a.nrows() {
        return Err(Error::DegenerateCoarseSpace);
    }
    let mt = two_grid_mtilde(a, m)?;
    let e = dense_sym_eig(&a.symmetrized(), Some(&mt))?;
    let cols: Vec<Vec<f64>> = (0..nc).map(|k| e.vector(k)).collect();
    let p = if nc == 0 {
        DenseMatrix::zeros(a.nrows(), 0)
    } else {
        DenseMatrix::from_columns(&cols)
    };
    Ok((p, 1.0 - e.values[nc]))
}

/// Energy and trace quantities for `P` in C/F form.
///
/// `trace_schur` is `tr(PᵀAP · RA⁻¹Rᵀ)` (the squared Frobenius norm of
/// `A^{1/2}PRA^{-1/2}`), so `pr_energy ≤ trace_schur ≤ trace_plain`.
pub fn stability_bounds(
    a: &DenseMatrix,
    x: &SpectralEquivalence,
    split: &BlockSplit,
    p: &DenseMatrix,
) -> Result<TheoryReport> {
    check_square(a, "A")?;
    check_p(a, p)?;
    if split.n() != a.nrows() || p.ncols() != split.nc() {
        return Err(dim_mismatch("split, A and P disagree"));
    }
    let r = split.r_injection();
    let pr = p.matmul(&r);
    let pr_energy = energy_norm(a, &pr)?.powi(2);
    let a_inv = a.inverse()?;
    let pap = p.transpose().matmul(a).matmul(p);
    let schur_inv = r.matmul(&a_inv).matmul(&r.transpose());
    let trace_schur = pap.matmul(&schur_inv).trace();
    let a_eig = dense_sym_eig(&a.symmetrized(), None)?;
    let trace_plain = pap.trace() / a_eig.min();

    let s = split.s_injection();
    let a_s = s.transpose().matmul(a).matmul(&s).symmetrized();
    let x_s = s.transpose().matmul(&x.dense_x(a)).matmul(&s).symmetrized();
    let (kappa_s, c2_meas) = if split.nf() == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let e = dense_sym_eig(&a_s, Some(&x_s))?;
        (e.min(), e.max())
    };
    Ok(TheoryReport {
        pr_energy,
        trace_schur,
        trace_plain,
        kappa_s,
        c2_meas,
        ..TheoryReport::default()
    })
}

/// `(beta_wap, beta_sap)`:
/// `beta_wap = ‖A‖ max ‖(I - Q_P)v‖² / ‖v‖²_A` with `Q_P` the ℓ² projection
/// onto range(P), and `beta_sap = ‖A‖ max ‖(I - π_A)v‖²_A / ‖Av‖²`.
pub fn approximation_constants(a: &DenseMatrix, p: &DenseMatrix) -> Result<(f64, f64)> {
    check_square(a, "A")?;
    check_p(a, p)?;
    let n = a.nrows();
    if p.ncols() >= n {
        a_projection(a, p)?;
        return Ok((0.0, 0.0));
    }
    let a_eig = dense_sym_eig(&a.symmetrized(), None)?;
    let a_norm = a_eig.max();
    let q = DenseMatrix::identity(n).sub(&x_projection(&DenseMatrix::identity(n), p)?);
    let num_wap = q.transpose().matmul(&q).symmetrized();
    let beta_wap = a_norm * dense_sym_eig(&num_wap, Some(&a.symmetrized()))?.max();

    let cgc = DenseMatrix::identity(n).sub(&a_projection(a, p)?);
    let num_sap = cgc.transpose().matmul(a).matmul(&cgc).symmetrized();
    let a2 = a.matmul(a).symmetrized();
    let beta_sap = a_norm * dense_sym_eig(&num_sap, Some(&a2))?.max();
    Ok((beta_wap.max(0.0), beta_sap.max(0.0)))
}

/// All diagnostics for one `(A, M, P)` triple with `P` in C/F form.
pub fn theory_report(
    a: &DenseMatrix,
    m: &DenseMatrix,
    x: &SpectralEquivalence,
    split: &BlockSplit,
    p: &DenseMatrix,
) -> Result<TheoryReport> {
    let mut report = stability_bounds(a, x, split, p)?;
    report.etg_norm = two_grid_error_norm(a, m, p)?;
    report.ktg = ktg(a, m, p)?;
    let (bw, bs) = approximation_constants(a, p)?;
    report.beta_wap = bw;
    report.beta_sap = bs;
    Ok(report)
}
