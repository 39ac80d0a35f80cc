//! Flux-form finite differences for `-∇·(A∇)` and the local Dirichlet solver.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::{CartesianGrid, CoefficientField, DomainMask};
use crate::error::{Error, Result};
use crate::sparse::{self, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    LocalElliptic,
    ExtensionWeighted,
}

/// Symmetric positive semidefinite sparse operator attached to a base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    grid: CartesianGrid,
    kind: OperatorKind,
    matrix: CsrMatrix,
}

impl DiscreteOperator {
    pub(crate) fn new(grid: CartesianGrid, kind: OperatorKind, matrix: CsrMatrix) -> Result<Self> {
        let op = Self { grid, kind, matrix };
        op.check_structure()?;
        Ok(op)
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `‖L‖_max`.
    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    /// Exact symmetry and a diagonal-dominance certificate of semidefiniteness
    /// (non-negative diagonal dominating the off-diagonal row sum).
    fn check_structure(&self) -> Result<()> {
        let asym = self.matrix.max_asymmetry();
        if asym != 0.0 {
            return Err(Error::NotSymmetric { max_asymmetry: asym });
        }
        let tol = 1e-10 * self.matrix.max_abs();
        for i in 0..self.matrix.dim() {
            let mut diag = 0.0;
            let mut off = 0.0;
            for (j, v) in self.matrix.row(i) {
                if i == j {
                    diag += v;
                } else {
                    off += v.abs();
                }
            }
            if diag + tol < off {
                return Err(Error::InvalidInput(alloc::format!(
                    "row {i} is not diagonally dominant ({diag} < {off})"
                )));
            }
        }
        Ok(())
    }
}

/// Assembles `L = -∇·(A∇)` with the five-point (three-point in 1D) flux
/// stencil; face values come from the coefficient field. In zero-exterior mode
/// the neighbours beyond the box are eliminated as zero Dirichlet values.
pub fn assemble_stiffness(grid: &CartesianGrid, coeff: &CoefficientField) -> Result<DiscreteOperator> {
    if coeff.grid() != grid {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: coeff.grid().len() });
    }
    if !coeff.is_diagonal() {
        return Err(Error::Unsupported("off-diagonal coefficients in the flux stencil".into()));
    }
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let n = grid.len();
    let mut trip = Vec::with_capacity(5 * n);
    for i in 0..n {
        for axis in 0..grid.dim() {
            let a = coeff.face(i, axis) * inv_h2;
            match grid.forward_neighbor(i, axis) {
                Some(j) => {
                    trip.push((i, i, a));
                    trip.push((j, j, a));
                    trip.push((i, j, -a));
                    trip.push((j, i, -a));
                }
                None => trip.push((i, i, a)),
            }
            // the face behind node 0 of a zero-exterior axis
            if !grid.is_periodic() && grid.multi_index(i)[axis] == 0 {
                trip.push((i, i, coeff.face(i, axis) * inv_h2));
            }
        }
    }
    DiscreteOperator::new(grid.clone(), OperatorKind::LocalElliptic, CsrMatrix::from_triplets(n, trip))
}

/// `y = L v`.
pub fn apply(op: &DiscreteOperator, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), found: v.len() });
    }
    Ok(op.matrix.mul_vec(v))
}

/// Solves `L u = f` on interior nodes with `u = g` on exterior and hole nodes,
/// by conjugate gradients on the interior block to relative residual `1e-10`.
pub fn solve_local_dirichlet(op: &DiscreteOperator, mask: &DomainMask, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let n = op.dim();
    for len in [f.len(), g.len(), mask.labels.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let interior = mask.interior_nodes();
    if interior.is_empty() {
        return Err(Error::Singular("mask has no interior nodes".into()));
    }
    let mut u: Vec<f64> = (0..n).map(|i| if mask.labels[i] == crate::domain::NodeLabel::Interior { 0.0 } else { g[i] }).collect();
    // rhs = f_I - L_{I,P} g_P
    let lg = op.matrix.mul_vec(&u);
    let rhs: Vec<f64> = interior.iter().map(|&i| f[i] - lg[i]).collect();
    let block = op.matrix.submatrix(&interior);
    let mut x = alloc::vec![0.0; interior.len()];
    sparse::conjugate_gradient(&block, &rhs, &mut x, 1e-10, 20 * interior.len() + 1000)?;
    for (k, &i) in interior.iter().enumerate() {
        u[i] = x[k];
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{mask_domain, BoundaryMode, Region, SymMatrix};
    use alloc::vec;
    use nalgebra::SymmetricEigen;

    fn laplacian(n: usize, r: f64, mode: BoundaryMode) -> DiscreteOperator {
        let g = CartesianGrid::new(1, r, n, mode).unwrap();
        let c = CoefficientField::constant(&g, 1.0).unwrap();
        assemble_stiffness(&g, &c).unwrap()
    }

    #[test]
    fn periodic_stencil_is_circulant() {
        let op = laplacian(8, 4.0, BoundaryMode::Periodic);
        let d = op.matrix().to_dense();
        for i in 0..8 {
            for j in 0..8 {
                let k = (j + 8 - i) % 8;
                let expect = match k {
                    0 => 2.0,
                    1 | 7 => -1.0,
                    _ => 0.0,
                };
                assert_eq!(d[(i, j)], expect);
            }
        }
    }

    #[test]
    fn periodic_eigenvalues_match_closed_form() {
        let n = 32;
        let op = laplacian(n, 2.0, BoundaryMode::Periodic);
        let h = op.grid().spacing();
        let mut eig: Vec<f64> = SymmetricEigen::new(op.matrix().to_dense()).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expect: Vec<f64> = (0..n)
            .map(|k| 4.0 / (h * h) * (core::f64::consts::PI * k as f64 / n as f64).sin().powi(2))
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eig.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn harmonic_face_value_between_one_and_three() {
        let g = CartesianGrid::new(1, 1.0, 4, BoundaryMode::Periodic).unwrap();
        let s = vec![1.0, 3.0, 1.0, 3.0].into_iter().map(SymMatrix::scalar).collect();
        let c = CoefficientField::from_samples(&g, s).unwrap();
        let op = assemble_stiffness(&g, &c).unwrap();
        let h2 = g.spacing().powi(2);
        assert!((op.matrix().get(0, 1) * h2 + 1.5).abs() < 1e-14);
    }

    #[test]
    fn apply_examples() {
        let op = laplacian(16, 1.0, BoundaryMode::Periodic);
        assert!(apply(&op, &[0.0; 16]).unwrap().iter().all(|&v| v == 0.0));
        assert!(apply(&op, &[2.5; 16]).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(apply(&op, &[1.0; 3]).is_err());
        // Fourier mode k=3 is an eigenvector
        let n = 16;
        let h = op.grid().spacing();
        let v: Vec<f64> = (0..n).map(|i| (2.0 * core::f64::consts::PI * 3.0 * i as f64 / n as f64).cos()).collect();
        let lam = 4.0 / (h * h) * (core::f64::consts::PI * 3.0 / n as f64).sin().powi(2);
        for (a, b) in apply(&op, &v).unwrap().iter().zip(&v) {
            assert!((a - lam * b).abs() < 1e-10 * lam);
        }
    }

    // max-norm error of the local solve against a closed-form solution
    fn poisson_error(n: usize, rhs: impl Fn(f64) -> f64, exact: impl Fn(f64) -> f64) -> f64 {
        let op = laplacian(n, 4.0, BoundaryMode::Periodic);
        let g = op.grid().clone();
        let mask = mask_domain(&g, &Region::Interval { lo: -1.0, hi: 1.0 }, None).unwrap();
        let f: Vec<f64> = g.points().map(|p| rhs(p[0])).collect();
        let zero = vec![0.0; n];
        let u = solve_local_dirichlet(&op, &mask, &f, &zero).unwrap();
        g.points()
            .zip(&u)
            .map(|(p, &v)| {
                let e = if p[0].abs() < 1.0 { exact(p[0]) } else { 0.0 };
                (v - e).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn local_dirichlet_examples() {
        let op = laplacian(64, 4.0, BoundaryMode::Periodic);
        let g = op.grid().clone();
        let mask = mask_domain(&g, &Region::Interval { lo: -1.0, hi: 1.0 }, None).unwrap();
        let zero = vec![0.0; 64];
        let u = solve_local_dirichlet(&op, &mask, &zero, &zero).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        let c = vec![1.75; 64];
        let u = solve_local_dirichlet(&op, &mask, &zero, &c).unwrap();
        assert!(u.iter().all(|v| (v - 1.75).abs() < 1e-9));
    }

    #[test]
    fn local_dirichlet_parabola() {
        // -u'' = 1 on (-1,1): the three-point stencil is exact on quadratics
        // once ±1 are nodes, so only round-off remains.
        for n in [64, 128, 256] {
            let e = poisson_error(n, |_| 1.0, |x| 0.5 * (1.0 - x * x));
            assert!(e < 1e-10, "N={n}: {e}");
        }
    }

    #[test]
    fn local_dirichlet_second_order() {
        use core::f64::consts::FRAC_PI_2;
        let rhs = |x: f64| FRAC_PI_2 * FRAC_PI_2 * (FRAC_PI_2 * x).cos();
        let exact = |x: f64| (FRAC_PI_2 * x).cos();
        let e1 = poisson_error(128, rhs, exact);
        let e2 = poisson_error(256, rhs, exact);
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} ({e1} / {e2})");
    }

    #[test]
    fn discrete_maximum_principle() {
        let op = laplacian(64, 4.0, BoundaryMode::Periodic);
        let g = op.grid().clone();
        let mask = mask_domain(&g, &Region::Interval { lo: -1.0, hi: 1.5 }, None).unwrap();
        let data: Vec<f64> = g.points().map(|p| (3.0 * p[0]).sin() + 0.2 * p[0]).collect();
        let zero = vec![0.0; 64];
        let u = solve_local_dirichlet(&op, &mask, &zero, &data).unwrap();
        let pinned = mask.pinned_nodes();
        let lo = pinned.iter().map(|&i| data[i]).fold(f64::INFINITY, f64::min);
        let hi = pinned.iter().map(|&i| data[i]).fold(f64::NEG_INFINITY, f64::max);
        for i in mask.interior_nodes() {
            assert!(u[i] >= lo - 1e-10 && u[i] <= hi + 1e-10);
        }
    }

    #[test]
    fn zero_exterior_is_dirichlet_laplacian() {
        let op = laplacian(8, 1.0, BoundaryMode::ZeroExterior);
        let h2 = op.grid().spacing().powi(2);
        let d = op.matrix().to_dense() * h2;
        for i in 0..8 {
            assert!((d[(i, i)] - 2.0).abs() < 1e-14);
        }
        assert_eq!(d[(0, 7)], 0.0);
    }
}
