//! Singular-kernel route on 1D grids: the constant `c_{n,s}`, the Gaussian
//! heat kernel, `K^s` by subordination, and the exact bilinear form
//! `B(v,w) = (c_{1,s}/2) ∬ (v(x)-v(z))(w(x)-w(z)) |x-z|^{-1-2s} dx dz`
//! over piecewise-linear nodal functions.
//!
//! On a uniform grid `B(χ_i, χ_j) = c_{1,s} h^{1-2s} β_{i-j}` with
//! `β_m = ∫_0^∞ t^{-1-2s} (2g(m) - g(m-t) - g(m+t)) dt`, where `g` is the hat
//! autocorrelation (the centred cubic B-spline). Near entries are integrated in
//! closed form piece by piece; far entries and periodic images use Gauss–Legendre
//! against `g` and Hurwitz zeta sums.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundaryMode, CartesianGrid};
use crate::error::{invalid, Error, Result};
use crate::quad::{self, GaussLegendre};
use crate::special::{gamma, gamma_neg, hurwitz_zeta, ln_gamma};

/// `c_{n,s} = Γ(n/2+s) 4^s / (|Γ(-s)| π^{n/2})`.
pub fn c_ns(n: usize, s: f64) -> Result<f64> {
    check_dim(n)?;
    check_open_order(s)?;
    let nf = n as f64;
    // |Γ(-s)| = Γ(1-s)/s
    let ln = ln_gamma(0.5 * nf + s) + s * 4f64.ln() - (ln_gamma(1.0 - s) - s.ln()) - 0.5 * nf * PI.ln();
    Ok(ln.exp())
}

/// `W_t(x,z) = (4πt)^{-n/2} exp(-|x-z|²/(4t))`, with `n = x.len()`.
pub fn gaussian_heat_kernel(t: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid!("heat kernel needs t > 0, got {t}"));
    }
    let r2 = dist2(x, z)?;
    Ok((4.0 * PI * t).powf(-0.5 * x.len() as f64) * (-r2 / (4.0 * t)).exp())
}

/// `K^s(x,z) = (2|Γ(-s)|)^{-1} ∫_0^∞ W_t(x,z) t^{-1-s} dt` by adaptive quadrature.
pub fn kernel_ks(x: &[f64], z: &[f64], s: f64, rel_tol: f64) -> Result<f64> {
    check_open_order(s)?;
    let n = x.len();
    check_dim(n)?;
    let r2 = dist2(x, z)?;
    if r2 == 0.0 {
        return Err(invalid!("kernel is singular on the diagonal"));
    }
    let nh = 0.5 * n as f64;
    let integral = quad::half_line_log(
        |t| (4.0 * PI * t).powf(-nh) * (-r2 / (4.0 * t)).exp() * t.powf(-1.0 - s),
        r2 / (4.0 * (nh + s)),
        rel_tol,
    )?;
    Ok(integral / (2.0 * gamma_neg(s).abs()))
}

/// `(c_{n,s}/2) r^{-n-2s}`.
pub fn kernel_ks_closed_form(r: f64, s: f64, n: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid!("distance must be positive, got {r}"));
    }
    Ok(0.5 * c_ns(n, s)? * r.powf(-(n as f64) - 2.0 * s))
}

/// Constants of a two-sided Gaussian heat-kernel bound
/// `c1 t^{-n/2} e^{-r²/(c2 t)} ≤ W_t ≤ c3 t^{-n/2} e^{-r²/(c4 t)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl HeatKernelBounds {
    /// Constants for which both sides equal the Gaussian kernel.
    pub fn gaussian(n: usize) -> Self {
        let c = (4.0 * PI).powf(-0.5 * n as f64);
        Self { c1: c, c2: 4.0, c3: c, c4: 4.0 }
    }

    /// Lower and upper bounds on `K^s` at distance `r`.
    pub fn kernel_bounds(&self, r: f64, s: f64, n: usize) -> Result<(f64, f64)> {
        check_open_order(s)?;
        if !(r > 0.0) {
            return Err(invalid!("distance must be positive, got {r}"));
        }
        let p = 0.5 * n as f64 + s;
        let base = gamma(p) / (2.0 * gamma_neg(s).abs()) * r.powf(-2.0 * p);
        Ok((self.c1 * base * self.c2.powf(p), self.c3 * base * self.c4.powf(p)))
    }
}

/// Diagnostics recorded during assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyRecord {
    /// Relative mismatch between the closed-form and Gauss–Legendre values of `β_3`.
    pub cross_check: f64,
    /// `max_i |Σ_j B_ij + exterior_i| / ‖B‖_max`.
    pub row_sum_defect: f64,
}

/// Assembled bilinear form on nodal functions of a 1D grid.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: CartesianGrid,
    s: f64,
    matrix: DMatrix<f64>,
    exterior_left: Vec<f64>,
    exterior_right: Vec<f64>,
    record: AssemblyRecord,
}

/// Tolerance on the closed-form versus quadrature check of the kernel entries.
pub const ASSEMBLY_TOLERANCE: f64 = 1e-9;

/// Assembles `B(χ_i, χ_j)`. On a zero-exterior grid the nodal functions vanish
/// beyond the box and the matrix is the exact full-line form; on a periodic grid
/// the periodised kernel is summed over all images.
pub fn assemble_fraclap_form(grid: &CartesianGrid, s: f64) -> Result<KernelMatrix> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported("kernel assembly is one-dimensional".into()));
    }
    check_open_order(s)?;
    let n = grid.len();
    let table = BetaTable::new(s);
    let cross_check = table.cross_check();
    if !(cross_check <= ASSEMBLY_TOLERANCE) {
        return Err(Error::Quadrature { estimate: table.near[3], error: cross_check });
    }
    let scale = c_ns(1, s)? * grid.spacing().powf(1.0 - 2.0 * s);
    let (band, exterior_left, exterior_right) = match grid.boundary_mode() {
        BoundaryMode::ZeroExterior => {
            let band: Vec<f64> = (0..n).map(|m| scale * table.beta(m)).collect();
            // Σ_{m ≥ i+1} β_m and Σ_{m ≥ n-i} β_m
            let left: Vec<f64> = (0..n).map(|i| scale * table.tail(i + 1)).collect();
            let right: Vec<f64> = (0..n).map(|i| scale * table.tail(n - i)).collect();
            (band, left, right)
        }
        BoundaryMode::Periodic => {
            if n < 16 {
                return Err(invalid!("periodic kernel assembly needs at least 16 nodes, got {n}"));
            }
            let mut band = vec![0.0; n];
            for m in 0..=n / 2 {
                let b = scale * (table.beta(m) + table.images(m, n));
                band[m] = b;
                band[(n - m) % n] = b;
            }
            (band, vec![0.0; n], vec![0.0; n])
        }
    };
    let periodic = grid.is_periodic();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if periodic {
            band[(i + n - j) % n]
        } else {
            band[i.abs_diff(j)]
        }
    });
    let norm = matrix.amax();
    let row_sum_defect = (0..n)
        .map(|i| (matrix.row(i).sum() + exterior_left[i] + exterior_right[i]).abs())
        .fold(0.0, f64::max)
        / norm;
    Ok(KernelMatrix {
        grid: grid.clone(),
        s,
        matrix,
        exterior_left,
        exterior_right,
        record: AssemblyRecord { cross_check, row_sum_defect },
    })
}

impl KernelMatrix {
    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn record(&self) -> AssemblyRecord {
        self.record
    }

    /// `B(χ_i, 1_{x < -R})`: coupling of node `i` to a unit constant left of the box.
    pub fn exterior_left(&self) -> &[f64] {
        &self.exterior_left
    }

    /// `B(χ_i, 1_{x > R-h})`.
    pub fn exterior_right(&self) -> &[f64] {
        &self.exterior_right
    }

    /// `B v` where `v` is continued by the constants `left` and `right` beyond the
    /// box (ignored on periodic grids).
    pub fn apply_extended(&self, v: &[f64], left: f64, right: f64) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let bv = &self.matrix * nalgebra::DVector::from_column_slice(v);
        Ok((0..self.dim()).map(|i| bv[i] + left * self.exterior_left[i] + right * self.exterior_right[i]).collect())
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(())
    }
}

/// First column of the zero-exterior form, `B_ij = band[|i-j|]`, without the dense matrix.
pub fn toeplitz_band(grid: &CartesianGrid, s: f64) -> Result<Vec<f64>> {
    if grid.dim() != 1 || grid.is_periodic() {
        return Err(Error::Unsupported("the Toeplitz band is for 1D zero-exterior grids".into()));
    }
    check_open_order(s)?;
    let table = BetaTable::new(s);
    let scale = c_ns(1, s)? * grid.spacing().powf(1.0 - 2.0 * s);
    Ok((0..grid.len()).map(|m| scale * table.beta(m)).collect())
}

/// `vᵀ B w`.
pub fn bilinear_eval(k: &KernelMatrix, v: &[f64], w: &[f64]) -> Result<f64> {
    k.check_len(v)?;
    k.check_len(w)?;
    let mut acc = 0.0;
    for j in 0..k.dim() {
        let col = k.matrix.column(j);
        let cj: f64 = col.iter().zip(v).map(|(b, x)| b * x).sum();
        acc += cj * w[j];
    }
    Ok(acc)
}

fn check_dim(n: usize) -> Result<()> {
    if n != 1 && n != 2 {
        return Err(invalid!("dimension must be 1 or 2, got {n}"));
    }
    Ok(())
}

fn check_open_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid!("fractional order must lie in (0,1), got {s}"));
    }
    Ok(())
}

fn dist2(x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: z.len() });
    }
    check_dim(x.len())?;
    Ok(x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Hat autocorrelation `g(τ) = ∫ χ(x) χ(x-τ) dx` for unit spacing.
fn hat_autocorrelation(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a <= 2.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        0.0
    }
}

/// Monomial coefficients of `g` on `[j, j+1]`, `j ∈ {-2,-1,0,1}`.
fn hat_piece(j: i64) -> [f64; 4] {
    match j {
        -2 => [4.0 / 3.0, 2.0, 1.0, 1.0 / 6.0],
        -1 => [2.0 / 3.0, 0.0, -1.0, -0.5],
        0 => [2.0 / 3.0, 0.0, -1.0, 0.5],
        1 => [4.0 / 3.0, -2.0, 1.0, -1.0 / 6.0],
        _ => [0.0; 4],
    }
}

/// Coefficients in `t` of `p(a + b t)`.
fn compose_affine(p: [f64; 4], a: f64, b: f64) -> [f64; 4] {
    const BINOM: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    let mut out = [0.0; 4];
    for (d, &pd) in p.iter().enumerate() {
        for k in 0..=d {
            out[k] += pd * BINOM[d][k] * a.powi((d - k) as i32) * b.powi(k as i32);
        }
    }
    out
}

/// `∫_lo^hi t^e dt`.
fn monomial_integral(e: f64, lo: f64, hi: f64) -> f64 {
    if (e + 1.0).abs() < 1e-14 {
        (hi / lo).ln()
    } else {
        (hi.powf(e + 1.0) - lo.powf(e + 1.0)) / (e + 1.0)
    }
}

const NEAR: usize = 4;

struct BetaTable {
    sigma: f64,
    gl: GaussLegendre,
    near: [f64; NEAR],
}

impl BetaTable {
    fn new(s: f64) -> Self {
        let gl = GaussLegendre::new(24);
        let mut near = [0.0; NEAR];
        for (m, b) in near.iter_mut().enumerate() {
            *b = beta_closed_form(m as i64, s);
        }
        Self { sigma: 1.0 + 2.0 * s, gl, near }
    }

    /// `∫ g(τ) φ(τ) dτ` panel by panel.
    fn against_g<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        (-2..2).map(|j| self.gl.integrate(j as f64, j as f64 + 1.0, |t| hat_autocorrelation(t) * f(t))).sum()
    }

    /// `-∫ g(τ) (m-τ)^{-σ} dτ`, valid for `m ≥ 3`.
    fn beta_far(&self, m: usize) -> f64 {
        let m = m as f64;
        -self.against_g(|t| (m - t).powf(-self.sigma))
    }

    fn beta(&self, m: usize) -> f64 {
        if m < NEAR {
            self.near[m]
        } else {
            self.beta_far(m)
        }
    }

    fn cross_check(&self) -> f64 {
        (self.near[3] - self.beta_far(3)).abs() / self.near[3].abs()
    }

    /// `Σ_{m ≥ start} β_m` for `start ≥ 1`.
    fn tail(&self, start: usize) -> f64 {
        let head: f64 = (start..3).map(|m| self.near[m]).sum();
        let from = start.max(3) as f64;
        head - self.against_g(|t| hurwitz_zeta(self.sigma, from - t))
    }

    /// `Σ_{k ≠ 0} β_{m + kn}` for `0 ≤ m ≤ n/2`, `n ≥ 16`.
    fn images(&self, m: usize, n: usize) -> f64 {
        let (m, nf) = (m as f64, n as f64);
        let sig = self.sigma;
        -self.against_g(|t| {
            let d = (m - t) / nf;
            nf.powf(-sig) * (hurwitz_zeta(sig, 1.0 + d) + hurwitz_zeta(sig, 1.0 - d))
        })
    }
}

/// `β_m` by exact integration of the piecewise-cubic integrand.
fn beta_closed_form(m: i64, s: f64) -> f64 {
    let m = m.abs();
    let gm = hat_autocorrelation(m as f64);
    let top = m + 2;
    let mut total = 0.0;
    for k in 0..top {
        // on t ∈ [k, k+1]: m - t ∈ [m-k-1, m-k], m + t ∈ [m+k, m+k+1]
        let left = shifted_piece(m - k - 1, m as f64, -1.0);
        let right = shifted_piece(m + k, m as f64, 1.0);
        let mut q = [0.0; 4];
        for d in 0..4 {
            q[d] = -left[d] - right[d];
        }
        q[0] += 2.0 * gm;
        if k == 0 {
            // q(0) = q'(0) = 0
            q[0] = 0.0;
            q[1] = 0.0;
        }
        let (lo, hi) = (k as f64, k as f64 + 1.0);
        for (d, &c) in q.iter().enumerate() {
            if c != 0.0 {
                total += c * monomial_integral(d as f64 - 1.0 - 2.0 * s, lo, hi);
            }
        }
    }
    total + 2.0 * gm * (top as f64).powf(-2.0 * s) / (2.0 * s)
}

/// Coefficients in `t` of `g(m + b t)` where `m + b t` ranges over the piece `[j, j+1]`.
fn shifted_piece(j: i64, m: f64, b: f64) -> [f64; 4] {
    compose_affine(hat_piece(j), m, b)
}
