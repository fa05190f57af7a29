//! Benchmark diffusion operators on the unit square.
//!
//! Both problems use linear finite elements on a structured mesh of `n x n`
//! squares, each split into two triangles along the `(i,j)-(i+1,j+1)`
//! diagonal. Homogeneous Dirichlet boundary nodes are removed, so the
//! unknowns are the `(n-1)^2` interior nodes, numbered x-fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub const DEFAULT_THETA: f64 = 3.0 * std::f64::consts::PI / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    RotatedAnisotropic,
    Oscillatory,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::RotatedAnisotropic => "rotated_anisotropic",
            ProblemKind::Oscillatory => "oscillatory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(rename = "K", default = "one")]
    pub k: f64,
}

fn one() -> f64 {
    1.0
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

impl ProblemSpec {
    pub fn rotated_anisotropic(n: usize, epsilon: f64, theta: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::RotatedAnisotropic,
            n,
            epsilon,
            theta,
            k: 1.0,
        }
    }

    pub fn oscillatory(n: usize, k: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Oscillatory,
            n,
            epsilon: 1.0,
            theta: 0.0,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("mesh size n = {} < 2", self.n)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} outside [0, 1]",
                self.epsilon
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!("K = {} must be positive", self.k)));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub matrix: SparseMatrix,
    pub dof_coords: Vec<(f64, f64)>,
    pub h: f64,
}

/// Assembles whichever problem `spec.kind` names.
pub fn assemble(spec: &ProblemSpec) -> Result<Problem> {
    match spec.kind {
        ProblemKind::RotatedAnisotropic => assemble_rotated_anisotropic(spec),
        ProblemKind::Oscillatory => assemble_oscillatory(spec),
    }
}

/// `-div(QᵀDQ grad u)` with `Q` the rotation by `theta` and `D = diag(1, epsilon)`.
pub fn assemble_rotated_anisotropic(spec: &ProblemSpec) -> Result<Problem> {
    if spec.kind != ProblemKind::RotatedAnisotropic {
        return Err(Error::InvalidParameter("expected a rotated_anisotropic spec".into()));
    }
    spec.validate()?;
    let t = rotated_tensor(spec.epsilon, spec.theta);
    let full = assemble_full(spec.n, |_| t);
    Ok(finish(spec, full))
}

/// `-div(f grad u)` with `f` alternating between 1 and `K` at neighbouring nodes.
pub fn assemble_oscillatory(spec: &ProblemSpec) -> Result<Problem> {
    if spec.kind != ProblemKind::Oscillatory {
        return Err(Error::InvalidParameter("expected an oscillatory spec".into()));
    }
    spec.validate()?;
    let k = spec.k;
    let full = assemble_full(spec.n, |nodes| {
        let avg = nodes.iter().map(|&(i, j)| oscillatory_coefficient(i, j, k)).sum::<f64>() / 3.0;
        [[avg, 0.0], [0.0, avg]]
    });
    Ok(finish(spec, full))
}

/// Nodal coefficient: `K` where exactly one of the grid indices is odd.
pub fn oscillatory_coefficient(i: usize, j: usize, k: f64) -> f64 {
    if (i + j) % 2 == 1 {
        k
    } else {
        1.0
    }
}

/// `QᵀDQ` for `Q = [[c, -s], [s, c]]`, `D = diag(1, epsilon)`.
pub fn rotated_tensor(epsilon: f64, theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let xx = c * c + epsilon * s * s;
    let yy = s * s + epsilon * c * c;
    let xy = (epsilon - 1.0) * c * s;
    [[xx, xy], [xy, yy]]
}

/// The two triangles of cell `(i, j)`, as grid-node index pairs.
pub(crate) fn cell_triangles(i: usize, j: usize) -> [[(usize, usize); 3]; 2] {
    [
        [(i, j), (i + 1, j), (i + 1, j + 1)],
        [(i, j), (i + 1, j + 1), (i, j + 1)],
    ]
}

/// Local stiffness `area · G T Gᵀ` of a P1 triangle, `G` the basis gradients.
fn element_stiffness(xy: [(f64, f64); 3], t: [[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let (x0, y0) = xy[0];
    let (x1, y1) = xy[1];
    let (x2, y2) = xy[2];
    let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    let area = 0.5 * det.abs();
    // gradient of the basis function at vertex k
    let g = [
        [(y1 - y2) / det, (x2 - x1) / det],
        [(y2 - y0) / det, (x0 - x2) / det],
        [(y0 - y1) / det, (x1 - x0) / det],
    ];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        let tg = [
            t[0][0] * g[a][0] + t[0][1] * g[a][1],
            t[1][0] * g[a][0] + t[1][1] * g[a][1],
        ];
        for b in 0..3 {
            k[b][a] = area * (g[b][0] * tg[0] + g[b][1] * tg[1]);
        }
    }
    k
}

/// Stiffness matrix over all `(n+1)^2` nodes, before boundary elimination.
fn assemble_full(n: usize, tensor: impl Fn(&[(usize, usize); 3]) -> [[f64; 2]; 2]) -> SparseMatrix {
    let h = 1.0 / n as f64;
    let nodes = n + 1;
    let mut triplets = Vec::with_capacity(18 * n * n);
    for j in 0..n {
        for i in 0..n {
            for tri in cell_triangles(i, j) {
                let xy = tri.map(|(a, b)| (a as f64 * h, b as f64 * h));
                let ke = element_stiffness(xy, tensor(&tri));
                for (a, &(ia, ja)) in tri.iter().enumerate() {
                    for (b, &(ib, jb)) in tri.iter().enumerate() {
                        triplets.push((ia + ja * nodes, ib + jb * nodes, ke[a][b]));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(nodes * nodes, nodes * nodes, &triplets).expect("indices in range")
}

/// Full-mesh stiffness matrix for `spec`, boundary nodes included.
pub fn assemble_unconstrained(spec: &ProblemSpec) -> Result<SparseMatrix> {
    spec.validate()?;
    Ok(match spec.kind {
        ProblemKind::RotatedAnisotropic => {
            let t = rotated_tensor(spec.epsilon, spec.theta);
            assemble_full(spec.n, |_| t)
        }
        ProblemKind::Oscillatory => {
            let k = spec.k;
            assemble_full(spec.n, |nodes| {
                let avg =
                    nodes.iter().map(|&(i, j)| oscillatory_coefficient(i, j, k)).sum::<f64>() / 3.0;
                [[avg, 0.0], [0.0, avg]]
            })
        }
    })
}

/// Grid index of each interior unknown.
pub fn interior_nodes(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity((n - 1) * (n - 1));
    for j in 1..n {
        for i in 1..n {
            v.push((i, j));
        }
    }
    v
}

fn finish(spec: &ProblemSpec, full: SparseMatrix) -> Problem {
    let n = spec.n;
    let h = 1.0 / n as f64;
    let interior = interior_nodes(n);
    let idx: Vec<usize> = interior.iter().map(|&(i, j)| i + j * (n + 1)).collect();
    let matrix = full.submatrix(&idx, &idx);
    let dof_coords = interior.iter().map(|&(i, j)| (i as f64 * h, j as f64 * h)).collect();
    Problem {
        spec: *spec,
        matrix,
        dof_coords,
        h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dense_sym_eig;

    fn row_at(p: &Problem, i: usize, j: usize) -> Vec<(isize, isize, f64)> {
        let n = p.spec.n;
        let r = (i - 1) + (j - 1) * (n - 1);
        let (cols, vals) = p.matrix.row(r);
        cols.iter()
            .zip(vals)
            .filter(|(_, v)| v.abs() > 1e-12)
            .map(|(&c, &v)| {
                let (ci, cj) = (c % (n - 1) + 1, c / (n - 1) + 1);
                (ci as isize - i as isize, cj as isize - j as isize, v)
            })
            .collect()
    }

    #[test]
    fn isotropic_is_five_point() {
        for theta in [0.0, DEFAULT_THETA, 1.0] {
            let p = assemble_rotated_anisotropic(&ProblemSpec::rotated_anisotropic(6, 1.0, theta))
                .unwrap();
            let mut stencil = row_at(&p, 3, 3);
            stencil.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            let expected = [(-1, 0, -1.0), (0, -1, -1.0), (0, 0, 4.0), (0, 1, -1.0), (1, 0, -1.0)];
            assert_eq!(stencil.len(), 5, "theta={theta}");
            for (s, e) in stencil.iter().zip(expected) {
                assert_eq!((s.0, s.1), (e.0, e.1));
                assert!((s.2 - e.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isotropic_rows_sum_to_zero_before_elimination() {
        let spec = ProblemSpec::rotated_anisotropic(5, 1.0, DEFAULT_THETA);
        let full = assemble_unconstrained(&spec).unwrap();
        let ones = vec![1.0; full.ncols()];
        let rs = full.spmv(&ones).unwrap();
        for s in rs {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn fully_anisotropic_couples_only_in_x() {
        let p = assemble_rotated_anisotropic(&ProblemSpec::rotated_anisotropic(6, 0.0, 0.0)).unwrap();
        let mut stencil = row_at(&p, 3, 3);
        stencil.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let got: Vec<_> = stencil.iter().map(|s| (s.0, s.1, s.2)).collect();
        assert_eq!(got.len(), 3);
        assert_eq!((got[0].0, got[0].1), (-1, 0));
        assert_eq!((got[2].0, got[2].1), (1, 0));
        assert!((got[0].2 + 1.0).abs() < 1e-12);
        assert!((got[1].2 - 2.0).abs() < 1e-12);
        assert!((got[2].2 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_oscillation_is_laplacian() {
        let a = assemble_oscillatory(&ProblemSpec::oscillatory(7, 1.0)).unwrap();
        let b = assemble_rotated_anisotropic(&ProblemSpec::rotated_anisotropic(7, 1.0, 0.0)).unwrap();
        assert!(a.matrix.sub(&b.matrix).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn spd_and_symmetric() {
        for spec in [
            ProblemSpec::oscillatory(8, 1e3),
            ProblemSpec::oscillatory(8, 1e-2),
            ProblemSpec::rotated_anisotropic(8, 0.001, DEFAULT_THETA),
            ProblemSpec::rotated_anisotropic(8, 0.0, DEFAULT_THETA),
        ] {
            let p = assemble(&spec).unwrap();
            assert!(p.matrix.skew() <= 1e-13 * p.matrix.max_abs());
            let e = dense_sym_eig(&p.matrix.to_dense().symmetrized(), None).unwrap();
            assert!(e.min() > 0.0, "{spec:?}: {}", e.min());
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(assemble(&ProblemSpec::oscillatory(1, 2.0)).is_err());
        assert!(assemble(&ProblemSpec::oscillatory(4, 0.0)).is_err());
        assert!(assemble(&ProblemSpec::rotated_anisotropic(4, 1.5, 0.0)).is_err());
        assert!(assemble_oscillatory(&ProblemSpec::rotated_anisotropic(4, 1.0, 0.0)).is_err());
    }

    #[test]
    fn coordinates_and_size() {
        let p = assemble(&ProblemSpec::oscillatory(4, 2.0)).unwrap();
        assert_eq!(p.matrix.nrows(), 9);
        assert_eq!(p.dof_coords[0], (0.25, 0.25));
        assert_eq!(p.dof_coords[4], (0.5, 0.5));
        assert_eq!(p.h, 0.25);
    }
}
