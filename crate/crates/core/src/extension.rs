//! Weighted extension route: `∇·(y^{1-2s} Ã ∇U) = 0` on the base grid times a
//! graded `y`-mesh, `U(·,0) = u`, zero flux at `y = Y`. The Dirichlet-to-Neumann
//! limit of `U` reproduces `L^s u` up to a constant.
//!
//! The `y` direction uses exact one-dimensional integrals of the weight: the
//! face conductance is `1/∫ y^{2s-1}` over a cell and the dual-cell mass is
//! `∫ y^{1-2s}`, so the degenerate or singular weight at `y = 0` needs no
//! special casing.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::{CartesianGrid, CoefficientField};
use crate::error::{invalid, Error, Result};
use crate::local_op::{assemble_stiffness, DiscreteOperator, OperatorKind};
use crate::quad;
use crate::sparse::{self, CsrMatrix};
use crate::special::{gamma, gamma_neg, hurwitz_zeta, ln_gamma};

/// Tensor grid: base nodes times `y_j = Y (j/M)^γ`, `j = 0..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionGrid {
    base: CartesianGrid,
    s: f64,
    layers: usize,
    height: f64,
    grading: f64,
    y: Vec<f64>,
    conductance: Vec<f64>,
    mass: Vec<f64>,
    midpoint_weight: Vec<f64>,
}

impl ExtensionGrid {
    pub fn new(base: &CartesianGrid, s: f64, layers: usize, height: f64, grading: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid!("fractional order must lie in (0,1), got {s}"));
        }
        if layers < 4 {
            return Err(invalid!("extension needs at least 4 layers, got {layers}"));
        }
        if !(grading >= 1.0) {
            return Err(invalid!("grading exponent must be at least 1, got {grading}"));
        }
        if !(height >= 2.0 * base.half_width()) || !height.is_finite() {
            return Err(invalid!("height {height} is below twice the box half-width {}", base.half_width()));
        }
        let y: Vec<f64> = (0..=layers).map(|j| height * (j as f64 / layers as f64).powf(grading)).collect();
        let p = 2.0 * s;
        let q = 2.0 - 2.0 * s;
        let conductance: Vec<f64> = y.windows(2).map(|w| p / (w[1].powf(p) - w[0].powf(p))).collect();
        let mids: Vec<f64> = y.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let midpoint_weight: Vec<f64> = mids.iter().map(|m| m.powf(1.0 - 2.0 * s)).collect();
        let mut edges = vec![0.0];
        edges.extend_from_slice(&mids);
        edges.push(height);
        let mass: Vec<f64> = edges.windows(2).map(|w| (w[1].powf(q) - w[0].powf(q)) / q).collect();
        let finite = conductance.iter().chain(&mass).chain(&midpoint_weight).all(|v| v.is_finite() && *v > 0.0);
        if !finite || !(y[1] > 0.0) {
            let suggestion = (grading - 0.5).max(1.0);
            return Err(invalid!(
                "weight y^(1-2s) under- or overflows at y_1 = {:e}; try grading {suggestion} or more layers",
                y[1]
            ));
        }
        Ok(Self { base: base.clone(), s, layers, height, grading, y, conductance, mass, midpoint_weight })
    }

    pub fn base(&self) -> &CartesianGrid {
        &self.base
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Layer heights `y_0 = 0 < … < y_M = Y`.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `y^{1-2s}` at cell midpoints.
    pub fn midpoint_weights(&self) -> &[f64] {
        &self.midpoint_weight
    }

    /// Unknowns: `(M+1)` layers of base nodes, layer-major.
    pub fn len(&self) -> usize {
        (self.layers + 1) * self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, node: usize, layer: usize) -> usize {
        layer * self.base.len() + node
    }
}

/// The assembled extension operator with its tensor grid.
#[derive(Debug, Clone)]
pub struct ExtensionOperator {
    grid: ExtensionGrid,
    op: DiscreteOperator,
}

impl ExtensionOperator {
    pub fn grid(&self) -> &ExtensionGrid {
        &self.grid
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }
}

/// `K = h^dim (W_y ⊗ L_x + C_y ⊗ I)` with `L_x = -∇·(A∇)` on the base grid.
pub fn assemble_extension(grid: &ExtensionGrid, coeff: &CoefficientField) -> Result<ExtensionOperator> {
    let base = assemble_stiffness(&grid.base, coeff)?;
    let nb = grid.base.len();
    let vol = grid.base.cell_volume();
    let mut trip = Vec::with_capacity(grid.len() * 7);
    for j in 0..=grid.layers {
        let w = vol * grid.mass[j];
        for (r, c, v) in base.matrix().triplets() {
            trip.push((grid.index(r, j), grid.index(c, j), w * v));
        }
    }
    for j in 0..grid.layers {
        let c = vol * grid.conductance[j];
        for i in 0..nb {
            let (a, b) = (grid.index(i, j), grid.index(i, j + 1));
            trip.push((a, a, c));
            trip.push((b, b, c));
            trip.push((a, b, -c));
            trip.push((b, a, -c));
        }
    }
    let matrix = CsrMatrix::from_triplets(grid.len(), trip);
    let op = DiscreteOperator::new(grid.base.clone(), OperatorKind::ExtensionWeighted, matrix)?;
    Ok(ExtensionOperator { grid: grid.clone(), op })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSolution {
    grid: ExtensionGrid,
    values: Vec<f64>,
    /// `(K U)` on layer 0 divided by `h^dim`.
    boundary_flux: Vec<f64>,
    energy: f64,
    iterations: usize,
}

/// Relative residual for the extension solve.
pub const EXTENSION_TOLERANCE: f64 = 1e-10;

/// Minimises the discrete weighted Dirichlet energy with the trace pinned.
pub fn solve_extension(ext: &ExtensionOperator, trace: &[f64]) -> Result<ExtensionSolution> {
    let grid = &ext.grid;
    let nb = grid.base.len();
    if trace.len() != nb {
        return Err(Error::DimensionMismatch { expected: nb, found: trace.len() });
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trace".into()));
    }
    let k = ext.op.matrix();
    let free: Vec<usize> = (nb..grid.len()).collect();
    let kff = k.submatrix(&free);
    let mut lifted = vec![0.0; grid.len()];
    lifted[..nb].copy_from_slice(trace);
    let kl = k.mul_vec(&lifted);
    let rhs: Vec<f64> = kl[nb..].iter().map(|v| -v).collect();

    let lines = LinePreconditioner::new(&kff, nb, grid.layers);
    // start from the trace held constant in y
    let mut x: Vec<f64> = (0..free.len()).map(|f| trace[f % nb]).collect();
    let outcome = sparse::preconditioned_cg(&kff, &rhs, &mut x, |r, z| lines.apply(r, z), EXTENSION_TOLERANCE, 20 * grid.len())?;

    let mut values = lifted;
    values[nb..].copy_from_slice(&x);
    let ku = k.mul_vec(&values);
    let vol = grid.base.cell_volume();
    let boundary_flux = ku[..nb].iter().map(|v| v / vol).collect();
    let energy = sparse::dot(&values, &ku).max(0.0);
    Ok(ExtensionSolution { grid: grid.clone(), values, boundary_flux, energy, iterations: outcome.iterations })
}

/// Exact solves along each vertical line of the free layers.
struct LinePreconditioner {
    nb: usize,
    layers: usize,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl LinePreconditioner {
    fn new(kff: &CsrMatrix, nb: usize, layers: usize) -> Self {
        let diag = kff.diagonal();
        let upper = (0..kff.dim()).map(|r| if r + nb < kff.dim() { kff.get(r, r + nb) } else { 0.0 }).collect();
        Self { nb, layers, diag, upper }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (nb, m) = (self.nb, self.layers);
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for i in 0..nb {
            // Thomas algorithm on rows i, i+nb, …
            for l in 0..m {
                let row = l * nb + i;
                let lower = if l > 0 { self.upper[row - nb] } else { 0.0 };
                let denom = self.diag[row] - if l > 0 { lower * c[l - 1] } else { 0.0 };
                c[l] = self.upper[row] / denom;
                d[l] = (r[row] - if l > 0 { lower * d[l - 1] } else { 0.0 }) / denom;
            }
            for l in (0..m).rev() {
                let row = l * nb + i;
                z[row] = d[l] - if l + 1 < m { c[l] * z[row + nb] } else { 0.0 };
            }
        }
    }
}

/// How the Neumann limit `lim_{y→0} y^{1-2s} ∂_y U` is read off the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DtnMethod {
    /// `2s (U(·,y_1) - U(·,0)) / y_1^{2s}`.
    #[default]
    DifferenceQuotient,
    /// Minus the discrete conormal flux through `y = 0` from the assembled operator.
    Flux,
}

/// `4^s Γ(s) / (2s Γ(-s))`, so that `L^s u = const · lim y^{1-2s} ∂_y U`.
pub fn dtn_constant(s: f64) -> f64 {
    4f64.powf(s) * gamma(s) / (2.0 * s * gamma_neg(s))
}

impl ExtensionSolution {
    pub fn grid(&self) -> &ExtensionGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `U(·, y_j)`.
    pub fn layer(&self, j: usize) -> &[f64] {
        let nb = self.grid.base.len();
        &self.values[j * nb..(j + 1) * nb]
    }

    pub fn trace(&self) -> &[f64] {
        self.layer(0)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Discrete Dirichlet energy `Uᵀ K U ≈ ∬ y^{1-2s} Ã∇U·∇U`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `U(·, y)` by linear interpolation between layers.
    pub fn slice_at(&self, y: f64) -> Result<Vec<f64>> {
        let ys = &self.grid.y;
        if !(y >= 0.0 && y <= self.grid.height) {
            return Err(invalid!("height {y} outside [0, {}]", self.grid.height));
        }
        let j = ys.partition_point(|&v| v <= y).clamp(1, ys.len() - 1);
        let t = (y - ys[j - 1]) / (ys[j] - ys[j - 1]);
        Ok(self.layer(j - 1).iter().zip(self.layer(j)).map(|(a, b)| (1.0 - t) * a + t * b).collect())
    }

    /// The unscaled Neumann limit `lim y^{1-2s} ∂_y U`.
    pub fn dtn_raw(&self, method: DtnMethod) -> Vec<f64> {
        match method {
            DtnMethod::DifferenceQuotient => {
                let s = self.grid.s;
                let scale = 2.0 * s / self.grid.y[1].powf(2.0 * s);
                self.layer(1).iter().zip(self.layer(0)).map(|(a, b)| scale * (a - b)).collect()
            }
            DtnMethod::Flux => self.boundary_flux.iter().map(|v| -v).collect(),
        }
    }
}

/// `L^s u` recovered from the extension solution.
pub fn dtn_extract(solution: &ExtensionSolution, method: DtnMethod) -> Result<Vec<f64>> {
    if solution.grid.layers < 4 {
        return Err(invalid!("degenerate y-mesh"));
    }
    let c = dtn_constant(solution.grid.s);
    Ok(solution.dtn_raw(method).into_iter().map(|v| c * v).collect())
}

pub fn extension_energy(solution: &ExtensionSolution) -> f64 {
    solution.energy
}

/// `P_y^s(r)` by quadrature of the subordinated heat kernel in dimension `n`.
pub fn poisson_kernel(r: f64, y: f64, s: f64, n: usize) -> Result<f64> {
    if !(y > 0.0) {
        return Err(invalid!("Poisson kernel needs y > 0, got {y}"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid!("fractional order must lie in (0,1), got {s}"));
    }
    let nh = 0.5 * n as f64;
    let d2 = r * r + y * y;
    let integral = quad::half_line_log(
        |t| (-d2 / (4.0 * t)).exp() * (4.0 * PI * t).powf(-nh) * t.powf(-1.0 - s),
        d2 / (4.0 * (nh + s)),
        1e-12,
    )?;
    Ok(y.powf(2.0 * s) / (4f64.powf(s) * gamma(s)) * integral)
}

/// `Γ(n/2+s) / (π^{n/2} Γ(s)) · y^{2s} / (r² + y²)^{(n+2s)/2}`.
pub fn poisson_kernel_closed_form(r: f64, y: f64, s: f64, n: usize) -> f64 {
    let nh = 0.5 * n as f64;
    (ln_gamma(nh + s) - nh * PI.ln() - ln_gamma(s)).exp() * y.powf(2.0 * s) * (r * r + y * y).powf(-(nh + s))
}

/// `∫ P_y^s(r) dr` over the line.
pub fn poisson_kernel_mass(y: f64, s: f64) -> Result<f64> {
    let mut p = |r: f64| poisson_kernel(r, y, s, 1).unwrap_or(f64::NAN);
    let near = quad::adaptive(&mut p, 0.0, y, 0.0, 1e-12)?;
    // r = y e^σ beyond r = y
    let far = quad::adaptive_panels(
        |sigma| {
            let r = y * sigma.exp();
            p(r) * r
        },
        &[0.0, 3.0, 10.0, 30.0, 90.0],
        0.0,
        1e-12,
    )?;
    Ok(2.0 * (near + far))
}

const IMAGES: i64 = 16;

/// `U(x_i, y) = h Σ_j P_y^s(x_i - z_j) u_j` on a 1D grid; periodic grids sum
/// all images, the far ones through Hurwitz zeta sums of the first two terms
/// of the kernel's expansion in `(y/r)²`.
pub fn poisson_extend(u: &[f64], s: f64, y: f64, grid: &CartesianGrid) -> Result<Vec<f64>> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported("the Poisson representation is one-dimensional".into()));
    }
    let n = grid.len();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.len() });
    }
    let h = grid.spacing();
    let period = 2.0 * grid.half_width();
    let mut table = vec![0.0; n];
    for (m, slot) in table.iter_mut().enumerate() {
        let d = m as f64 * h;
        *slot = if grid.is_periodic() {
            let mut acc = 0.0;
            for k in -IMAGES..=IMAGES {
                acc += poisson_kernel(d + k as f64 * period, y, s, 1)?;
            }
            // Σ_{k > K} C y^{2s} (r^{-σ} - (σ/2) y² r^{-σ-2}), r = |d ± kP|
            let sigma = 1.0 + 2.0 * s;
            let c = (ln_gamma(0.5 + s) - 0.5 * PI.ln() - ln_gamma(s)).exp() * y.powf(2.0 * s);
            let q = (IMAGES + 1) as f64;
            let pair = |e: f64| period.powf(-e) * (hurwitz_zeta(e, q + d / period) + hurwitz_zeta(e, q - d / period));
            acc + c * (pair(sigma) - 0.5 * sigma * y * y * pair(sigma + 2.0))
        } else {
            poisson_kernel(d, y, s, 1)?
        };
    }
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let m = if grid.is_periodic() { (i + n - j) % n } else { i.abs_diff(j) };
                    table[m] * u[j]
                })
                .sum::<f64>()
                * h
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryMode;
    use crate::spectral::decompose;

    fn base(n: usize, r: f64) -> CartesianGrid {
        CartesianGrid::new(1, r, n, BoundaryMode::Periodic).unwrap()
    }

    fn setup(n: usize, r: f64, s: f64, m: usize, y: f64) -> (CartesianGrid, ExtensionOperator) {
        let b = base(n, r);
        let eg = ExtensionGrid::new(&b, s, m, y, 2.0).unwrap();
        let op = assemble_extension(&eg, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
        (b, op)
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        sparse::norm(&d) / sparse::norm(b)
    }

    #[test]
    fn constant_examples() {
        assert!((dtn_constant(0.5) + 1.0).abs() < 1e-14);
        for s in [0.3, 0.7] {
            let kappa = 2f64.powf(2.0 * s - 1.0) * gamma(s) / gamma(1.0 - s);
            assert!((dtn_constant(s) + kappa).abs() < 1e-12 * kappa);
        }
    }

    #[test]
    fn grid_validation() {
        let b = base(16, 1.0);
        assert!(ExtensionGrid::new(&b, 0.5, 3, 2.0, 2.0).is_err());
        assert!(ExtensionGrid::new(&b, 0.5, 8, 2.0, 0.5).is_err());
        assert!(ExtensionGrid::new(&b, 0.5, 8, 1.0, 2.0).is_err());
        let g = ExtensionGrid::new(&b, 0.3, 8, 2.0, 2.0).unwrap();
        assert!(g.y()[1] > 0.0 && g.midpoint_weights().iter().all(|w| *w > 0.0));
        assert_eq!(g.len(), 9 * 16);
    }

    #[test]
    fn half_order_is_unweighted_laplacian() {
        let (_, op) = setup(16, 1.0, 0.5, 8, 2.0);
        let g = op.grid();
        assert!(g.midpoint_weights().iter().all(|w| (*w - 1.0).abs() < 1e-15));
        // the conductance reduces to 1/Δy
        for j in 0..8 {
            assert!((g.conductance[j] * (g.y()[j + 1] - g.y()[j]) - 1.0).abs() < 1e-12);
        }
        assert_eq!(op.operator().matrix().max_asymmetry(), 0.0);
    }

    #[test]
    fn trivial_traces() {
        let (b, op) = setup(32, 1.0, 0.4, 16, 2.0);
        let zero = solve_extension(&op, &vec![0.0; b.len()]).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert_eq!(extension_energy(&zero), 0.0);
        let c = solve_extension(&op, &vec![1.7; b.len()]).unwrap();
        assert!(c.values().iter().all(|v| (v - 1.7).abs() < 1e-9));
        assert!(c.energy() < 1e-12);
        for method in [DtnMethod::DifferenceQuotient, DtnMethod::Flux] {
            assert!(dtn_extract(&c, method).unwrap().iter().all(|v| v.abs() < 1e-7));
        }
    }

    #[test]
    fn trace_is_pinned_and_energy_minimal() {
        let (b, op) = setup(32, 1.0, 0.3, 16, 2.0);
        let trace: Vec<f64> = (0..b.len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let sol = solve_extension(&op, &trace).unwrap();
        assert_eq!(sol.trace(), &trace[..]);
        // competitor: trace times a linear cut-off in y
        let g = op.grid();
        let mut comp = vec![0.0; g.len()];
        for j in 0..=g.layers() {
            let cut = (1.0 - g.y()[j] / 0.5).max(0.0);
            for i in 0..b.len() {
                comp[g.index(i, j)] = cut * trace[i];
            }
        }
        let e = sparse::dot(&comp, &op.operator().matrix().mul_vec(&comp));
        assert!(sol.energy() <= e);
    }

    #[test]
    fn harmonic_extension_of_a_mode() {
        let (b, op) = setup(64, 2.0, 0.5, 64, 8.0);
        let k = 2.0;
        let trace: Vec<f64> = (0..b.len()).map(|i| (PI * k * b.axis_coord(i) / 2.0).cos()).collect();
        let lam = (2.0 / b.spacing() * (PI * k / 64.0).sin()).powi(2);
        let sol = solve_extension(&op, &trace).unwrap();
        let g = op.grid();
        for j in [4, 8, 16, 24] {
            let y = g.y()[j];
            let expect = (-lam.sqrt() * y).exp();
            let ratio = sol.layer(j)[0] / trace[0];
            assert!((ratio / expect - 1.0).abs() < 0.02, "y={y}: {ratio} vs {expect}");
        }
    }

    #[test]
    fn dtn_matches_spectral_on_eigenvectors() {
        let (b, op0) = setup(256, 4.0, 0.5, 64, 8.0);
        let lap = assemble_stiffness(&b, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
        let dec = decompose(&lap).unwrap();
        for s in [0.3, 0.5, 0.7] {
            let op = if s == 0.5 {
                op0.clone()
            } else {
                assemble_extension(&ExtensionGrid::new(&b, s, 64, 8.0, 2.0).unwrap(), &CoefficientField::constant(&b, 1.0).unwrap()).unwrap()
            };
            for k in [2, 6, 12] {
                let phi = dec.eigenvector(k);
                let exact = dec.fractional_apply(s, &phi).unwrap();
                let sol = solve_extension(&op, &phi).unwrap();
                let flux = dtn_extract(&sol, DtnMethod::Flux).unwrap();
                assert!(rel(&flux, &exact) < 0.05, "s={s} k={k}: flux {}", rel(&flux, &exact));
                if s <= 0.5 {
                    let dq = dtn_extract(&sol, DtnMethod::DifferenceQuotient).unwrap();
                    assert!(rel(&dq, &exact) < 0.05, "s={s} k={k}: dq {}", rel(&dq, &exact));
                }
            }
        }
    }

    #[test]
    fn dtn_improves_under_refinement() {
        let b = base(128, 2.0);
        let lap = assemble_stiffness(&b, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
        let dec = decompose(&lap).unwrap();
        let phi = dec.eigenvector(9);
        let exact = dec.fractional_apply(0.5, &phi).unwrap();
        let err = |m: usize| {
            let g = ExtensionGrid::new(&b, 0.5, m, 4.0, 2.0).unwrap();
            let op = assemble_extension(&g, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
            let sol = solve_extension(&op, &phi).unwrap();
            rel(&dtn_extract(&sol, DtnMethod::DifferenceQuotient).unwrap(), &exact)
        };
        let (coarse, fine) = (err(16), err(64));
        assert!(fine < coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn energy_matches_spectral_pairing() {
        for s in [0.3, 0.5, 0.7] {
            let b = base(128, 2.0);
            let g = ExtensionGrid::new(&b, s, 64, 4.0, 2.0).unwrap();
            let op = assemble_extension(&g, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
            let lap = assemble_stiffness(&b, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
            let dec = decompose(&lap).unwrap();
            let phi = dec.eigenvector(5);
            let sol = solve_extension(&op, &phi).unwrap();
            let kappa = -dtn_constant(s);
            let spectral = dec.energy_norm(s, &phi).unwrap().powi(2);
            assert!((kappa * sol.energy() / spectral - 1.0).abs() < 0.05, "s={s}");
        }
    }

    #[test]
    fn discrete_green_identity() {
        let (b, op) = setup(64, 2.0, 0.4, 32, 4.0);
        let trace: Vec<f64> = (0..b.len()).map(|i| (b.axis_coord(i)).sin() + 0.3 * (3.0 * b.axis_coord(i)).cos()).collect();
        let sol = solve_extension(&op, &trace).unwrap();
        let g = op.grid();
        let test: Vec<f64> = (0..g.len())
            .map(|idx| {
                let (i, j) = (idx % b.len(), idx / b.len());
                (b.axis_coord(i) * 2.0).cos() * (-g.y()[j]).exp()
            })
            .collect();
        let lhs = -sparse::dot(&sol.dtn_raw(DtnMethod::Flux), &test[..b.len()]) * b.spacing();
        let rhs = sparse::dot(&test, &op.operator().matrix().mul_vec(sol.values()));
        assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-12));
    }

    #[test]
    fn poisson_kernel_examples() {
        for (r, y) in [(0.0, 1.0), (0.5, 0.2), (2.0, 1.0), (0.1, 3.0)] {
            let p = poisson_kernel(r, y, 0.5, 1).unwrap();
            let classical = y / (PI * (y * y + r * r));
            assert!((p / classical - 1.0).abs() < 1e-6);
            for s in [0.3, 0.7] {
                let q = poisson_kernel(r, y, s, 1).unwrap();
                assert!((q / poisson_kernel_closed_form(r, y, s, 1) - 1.0).abs() < 1e-8);
            }
        }
        for s in [0.3, 0.5, 0.7] {
            assert!((poisson_kernel_mass(1.0, s).unwrap() - 1.0).abs() < 1e-6);
        }
        assert!(poisson_kernel(1.0, 0.0, 0.5, 1).is_err());
    }

    #[test]
    fn poisson_extension_of_constant_and_agreement() {
        let b = base(128, 2.0);
        for s in [0.3, 0.5] {
            let ones = poisson_extend(&vec![1.0; 128], s, 1.0, &b).unwrap();
            assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-6), "s={s}");
        }
        let (bb, op) = setup(128, 2.0, 0.5, 64, 4.0);
        let trace: Vec<f64> = (0..128).map(|i| (PI * bb.axis_coord(i) / 2.0).sin() + 0.5).collect();
        let sol = solve_extension(&op, &trace).unwrap();
        let slice = sol.slice_at(1.0).unwrap();
        let poisson = poisson_extend(&trace, 0.5, 1.0, &bb).unwrap();
        assert!(rel(&slice, &poisson) < 0.02);
    }

    #[test]
    fn two_dimensional_smoke() {
        let b = CartesianGrid::new(2, 1.0, 16, BoundaryMode::Periodic).unwrap();
        let g = ExtensionGrid::new(&b, 0.5, 16, 2.0, 2.0).unwrap();
        let op = assemble_extension(&g, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
        let trace: Vec<f64> = b.points().map(|p| (PI * p[0]).cos() * (PI * p[1]).sin()).collect();
        let sol = solve_extension(&op, &trace).unwrap();
        let ls = dtn_extract(&sol, DtnMethod::Flux).unwrap();
        let lap = assemble_stiffness(&b, &CoefficientField::constant(&b, 1.0).unwrap()).unwrap();
        let exact = decompose(&lap).unwrap().fractional_apply(0.5, &trace).unwrap();
        assert!(rel(&ls, &exact) < 0.05);
    }
}
