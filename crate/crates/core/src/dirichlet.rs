//! Exterior-value Dirichlet problems for a fractional form: find `u = g` off the
//! interior with `B(u, w) = ⟨f, w⟩` for every interior nodal `w`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::{CartesianGrid, DomainMask, NodeLabel};
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMatrix;
use crate::local_op::DiscreteOperator;
use crate::sparse;
use crate::spectral::{SpectralDecomposition, DEFAULT_DENSE_CAP, PSD_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Fractional power of the operator on the whole box, then restricted.
    Spectral,
    /// Singular-integral form on a 1D grid.
    Kernel,
    /// Fractional power of the operator already restricted to the interior.
    SpectralDirichlet,
}

/// Dense symmetric form `B_ij = B(χ_i, χ_j)` on all nodes of a grid.
#[derive(Debug, Clone)]
pub struct FractionalForm {
    route: Route,
    s: f64,
    grid: CartesianGrid,
    matrix: DMatrix<f64>,
    exterior_left: Vec<f64>,
    exterior_right: Vec<f64>,
    identity_coefficient: bool,
}

impl FractionalForm {
    /// `B = h^dim Φ diag(λ^s) Φᵀ`. Set `identity_coefficient` when the
    /// decomposed operator is the plain Laplacian, so the form doubles as the
    /// reference `H^s` seminorm.
    pub fn spectral(dec: &SpectralDecomposition, grid: &CartesianGrid, s: f64, identity_coefficient: bool) -> Result<Self> {
        if dec.dim() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: dec.dim() });
        }
        check_order(s)?;
        let w = dec.weight();
        let mut matrix = dec.matrix_function(|l| if l == 0.0 { 0.0 } else { w * l.powf(s) })?;
        symmetrize(&mut matrix);
        let n = grid.len();
        Ok(Self {
            route: Route::Spectral,
            s,
            grid: grid.clone(),
            matrix,
            exterior_left: vec![0.0; n],
            exterior_right: vec![0.0; n],
            identity_coefficient,
        })
    }

    /// The kernel form; data beyond the box is continued by the end values of `g`.
    pub fn kernel(k: &KernelMatrix) -> Self {
        Self {
            route: Route::Kernel,
            s: k.order(),
            grid: k.grid().clone(),
            matrix: k.matrix().clone(),
            exterior_left: k.exterior_left().to_vec(),
            exterior_right: k.exterior_right().to_vec(),
            identity_coefficient: true,
        }
    }

    /// `h^dim (L_II)^s` on the interior block of `mask`, zero elsewhere. Only
    /// homogeneous exterior data is meaningful for this variant.
    pub fn spectral_dirichlet(op: &DiscreteOperator, mask: &DomainMask, s: f64) -> Result<Self> {
        check_order(s)?;
        let grid = op.grid();
        if mask.labels.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: mask.labels.len() });
        }
        let interior = mask.interior_nodes();
        let reduced = op.matrix().submatrix(&interior).to_dense();
        let dec = SpectralDecomposition::from_dense(reduced, grid.cell_volume(), DEFAULT_DENSE_CAP, PSD_TOLERANCE)?;
        let w = dec.weight();
        let block = dec.matrix_function(|l| w * l.powf(s))?;
        let n = grid.len();
        let mut matrix = DMatrix::zeros(n, n);
        for (a, &i) in interior.iter().enumerate() {
            for (b, &j) in interior.iter().enumerate() {
                matrix[(i, j)] = block[(a, b)];
            }
        }
        symmetrize(&mut matrix);
        Ok(Self {
            route: Route::SpectralDirichlet,
            s,
            grid: grid.clone(),
            matrix,
            exterior_left: vec![0.0; n],
            exterior_right: vec![0.0; n],
            identity_coefficient: false,
        })
    }

    /// Multiplies the form by `factor > 0`; the result no longer serves as an `A = I` reference.
    pub fn scale(&mut self, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(invalid!("form scale must be positive, got {factor}"));
        }
        if factor != 1.0 {
            self.matrix *= factor;
            self.exterior_left.iter_mut().chain(self.exterior_right.iter_mut()).for_each(|v| *v *= factor);
            self.identity_coefficient = false;
        }
        Ok(())
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_identity_coefficient(&self) -> bool {
        self.identity_coefficient
    }

    /// `B v`, with exterior continuation by `v`'s end values on kernel forms.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let bv = &self.matrix * DVector::from_column_slice(v);
        let (l, r) = self.end_values(v);
        Ok((0..v.len()).map(|i| bv[i] + l * self.exterior_left[i] + r * self.exterior_right[i]).collect())
    }

    /// `vᵀ B v` for `v` vanishing beyond the box.
    pub fn energy(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        let x = DVector::from_column_slice(v);
        Ok(x.dot(&(&self.matrix * &x)).max(0.0))
    }

    fn end_values(&self, v: &[f64]) -> (f64, f64) {
        if self.route == Route::Kernel && !self.grid.is_periodic() {
            (v[0], v[v.len() - 1])
        } else {
            (0.0, 0.0)
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), found: v.len() });
        }
        Ok(())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(invalid!("fractional order must lie in (0,1], got {s}"));
    }
    Ok(())
}

/// Source `f` and exterior datum `g`, both sampled on every node. Values of `f`
/// off the interior and of `g` on the interior are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorValueProblem {
    pub mask: DomainMask,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ExteriorValueProblem {
    pub fn new(mask: DomainMask, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let n = mask.labels.len();
        for v in [&f, &g] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        for (k, &l) in mask.labels.iter().enumerate() {
            let value = if l == NodeLabel::Interior { f[k] } else { g[k] };
            if !value.is_finite() {
                return Err(Error::NonFinite(alloc::format!("datum at node {k} is {value}")));
            }
        }
        Ok(Self { mask, f, g })
    }

    /// `f ≡ value` on the interior and `g ≡ 0`.
    pub fn constant_source(mask: DomainMask, value: f64) -> Result<Self> {
        let n = mask.labels.len();
        Self::new(mask, vec![value; n], vec![0.0; n])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveNorms {
    pub l2: f64,
    /// Full `H^s` norm `(‖u‖² + ‖(-Δ)^{s/2}u‖²)^{1/2}` when a reference form is known.
    pub hs: Option<f64>,
    /// `‖L^{s/2} u‖ = (uᵀBu)^{1/2}`.
    pub flux: f64,
    pub residual: f64,
    /// Discrete dual norm `(F_Iᵀ S^{-1} F_I)^{1/2}` of the source.
    pub f_dual: f64,
    /// `H^s` norm of the reference-harmonic continuation of `g`.
    pub g_hs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub route: Route,
    pub s: f64,
    #[serde(rename = "N")]
    pub nodes_per_axis: usize,
    #[serde(rename = "R")]
    pub half_width: f64,
    pub norms: SolveNorms,
    pub u: Vec<f64>,
}

/// Relative residual bound guaranteed by [`solve_nonlocal`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Galerkin solve on the interior nodes with pinned data moved to the right-hand side.
pub fn solve_nonlocal(form: &FractionalForm, problem: &ExteriorValueProblem) -> Result<SolveReport> {
    let reference = if form.identity_coefficient { Some(form) } else { None };
    solve_with(form, reference, problem)
}

/// As [`solve_nonlocal`], measuring `H^s` norms with the `A = I` form `reference`.
pub fn solve_nonlocal_with_reference(
    form: &FractionalForm,
    reference: &FractionalForm,
    problem: &ExteriorValueProblem,
) -> Result<SolveReport> {
    if reference.grid != form.grid {
        return Err(invalid!("reference form lives on a different grid"));
    }
    solve_with(form, Some(reference), problem)
}

struct Reduced {
    interior: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
    matrix: DMatrix<f64>,
}

impl Reduced {
    fn new(form: &FractionalForm, mask: &DomainMask) -> Result<Self> {
        let interior = mask.interior_nodes();
        if interior.is_empty() {
            return Err(Error::Singular("mask has no interior nodes".into()));
        }
        let matrix = form.matrix.select_rows(&interior).select_columns(&interior);
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::Singular("reduced form is not positive definite".into()))?;
        Ok(Self { interior, chol, matrix })
    }

    /// Right-hand side `F_I - (B g̃)_I` with `g̃` equal to `g` off the interior.
    fn rhs(&self, form: &FractionalForm, mask: &DomainMask, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = form.grid.cell_volume();
        let lifted: Vec<f64> = (0..g.len())
            .map(|k| if mask.labels[k] == NodeLabel::Interior { 0.0 } else { g[k] })
            .collect();
        let bg = form.apply(&lifted)?;
        let load: Vec<f64> = self.interior.iter().map(|&i| w * f[i]).collect();
        let rhs = self.interior.iter().zip(&load).map(|(&i, l)| l - bg[i]).collect();
        Ok((rhs, load))
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(rhs)).iter().copied().collect()
    }
}

fn solve_with(form: &FractionalForm, reference: Option<&FractionalForm>, problem: &ExteriorValueProblem) -> Result<SolveReport> {
    let mask = &problem.mask;
    if mask.grid != form.grid {
        return Err(invalid!("problem mask and form use different grids"));
    }
    if form.route == Route::SpectralDirichlet && mask.pinned_nodes().iter().any(|&k| problem.g[k] != 0.0) {
        return Err(Error::Unsupported("the restricted spectral form takes homogeneous exterior data only".into()));
    }
    let reduced = Reduced::new(form, mask)?;
    let (rhs, load) = reduced.rhs(form, mask, &problem.f, &problem.g)?;
    let ui = reduced.solve(&rhs);

    let mut u: Vec<f64> = (0..problem.g.len())
        .map(|k| if mask.labels[k] == NodeLabel::Interior { 0.0 } else { problem.g[k] })
        .collect();
    for (&i, v) in reduced.interior.iter().zip(&ui) {
        u[i] = *v;
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("solution".into()));
    }

    let su = &reduced.matrix * DVector::from_column_slice(&ui);
    let res: Vec<f64> = su.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let scale = sparse::norm(&load) + form.matrix.amax() * sparse::norm(&problem.g);
    let residual = if scale > 0.0 { sparse::norm(&res) / scale } else { sparse::norm(&res) };
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::NotConverged { iterations: 1, residual });
    }

    let f_dual = sparse::dot(&load, &reduced.solve(&load)).max(0.0).sqrt();
    let w = form.grid.cell_volume();
    let l2 = sparse::norm(&u) * w.sqrt();
    let flux = form.energy(&u)?.sqrt();
    let (hs, g_hs) = match reference {
        Some(r) => {
            let hs = (l2 * l2 + r.energy(&u)?).sqrt();
            let g_ext = harmonic_continuation(r, mask, &problem.g)?;
            let g_hs = (w * sparse::dot(&g_ext, &g_ext) + r.energy(&g_ext)?).sqrt();
            (Some(hs), Some(g_hs))
        }
        None => (None, None),
    };
    Ok(SolveReport {
        route: form.route,
        s: form.s,
        nodes_per_axis: form.grid.nodes_per_axis(),
        half_width: form.grid.half_width(),
        norms: SolveNorms { l2, hs, flux, residual, f_dual, g_hs },
        u,
    })
}

/// `g` off the interior, continued inside by the solution of the homogeneous problem.
pub fn harmonic_continuation(form: &FractionalForm, mask: &DomainMask, g: &[f64]) -> Result<Vec<f64>> {
    let n = g.len();
    if g.iter().enumerate().all(|(k, &v)| v == 0.0 || mask.labels[k] == NodeLabel::Interior) {
        return Ok(vec![0.0; n]);
    }
    let problem = ExteriorValueProblem { mask: mask.clone(), f: vec![0.0; n], g: g.to_vec() };
    let reduced = Reduced::new(form, mask)?;
    let (rhs, _) = reduced.rhs(form, mask, &problem.f, g)?;
    let ui = reduced.solve(&rhs);
    let mut out: Vec<f64> = (0..n).map(|k| if mask.labels[k] == NodeLabel::Interior { 0.0 } else { g[k] }).collect();
    for (&i, v) in reduced.interior.iter().zip(&ui) {
        out[i] = *v;
    }
    Ok(out)
}

/// `max_w |B(u,w) - ⟨f,w⟩|` over interior nodal `w`, relative to `‖F‖ + ‖B‖‖u‖`.
pub fn galerkin_defect(form: &FractionalForm, problem: &ExteriorValueProblem, u: &[f64]) -> Result<f64> {
    let bu = form.apply(u)?;
    let w = form.grid.cell_volume();
    let interior = problem.mask.interior_nodes();
    let worst = interior.iter().map(|&i| (bu[i] - w * problem.f[i]).abs()).fold(0.0, f64::max);
    let load: Vec<f64> = interior.iter().map(|&i| w * problem.f[i]).collect();
    let scale = sparse::norm(&load) + form.matrix.amax() * sparse::norm(u);
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

fn ratio(numerator: f64, report: &SolveReport) -> Result<f64> {
    let g = report
        .norms
        .g_hs
        .ok_or_else(|| invalid!("stability ratios need a reference H^s form"))?;
    let denominator = report.norms.f_dual + g;
    Ok(if denominator == 0.0 { 0.0 } else { numerator / denominator })
}

/// `‖u‖_{H^s} / (‖f‖_* + ‖g‖_{H^s})`, zero for vanishing data.
pub fn stability_ratio(report: &SolveReport) -> Result<f64> {
    let hs = report.norms.hs.ok_or_else(|| invalid!("stability ratios need a reference H^s form"))?;
    ratio(hs, report)
}

/// `‖L^{s/2}u‖ / (‖f‖_* + ‖g‖_{H^s})`, zero for vanishing data.
pub fn flux_ratio(report: &SolveReport) -> Result<f64> {
    ratio(report.norms.flux, report)
}

/// `(‖v‖² + ‖L^{s/2} v‖²)^{1/2}` for the decomposition of the `A = I` operator.
pub fn hs_norm(v: &[f64], dec: &SpectralDecomposition, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid!("fractional order must lie in (0,1), got {s}"));
    }
    let l2 = sparse::norm(v) * dec.weight().sqrt();
    let semi = dec.energy_norm(s, v)?;
    Ok((l2 * l2 + semi * semi).sqrt())
}
