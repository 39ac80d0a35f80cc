//! Spectral functional calculus on a symmetric discrete operator: the discrete
//! resolution of identity `L = Σ λ_k φ_k φ_kᵀ` and the functions `L^s`,
//! `L^{s/2}`, `e^{-tL}` built from it, plus the semigroup quadrature
//! `L^s v = Γ(-s)^{-1} ∫_0^∞ (e^{-tL}v - v) t^{-1-s} dt` as an independent route.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::local_op::DiscreteOperator;
use crate::quad;
use crate::special::gamma_neg;

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Relative tolerance (against `‖L‖_max`) for the semidefiniteness check.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    weight: f64,
    norm: f64,
}

/// Full dense decomposition of `op` (size capped at [`DEFAULT_DENSE_CAP`]).
pub fn decompose(op: &DiscreteOperator) -> Result<SpectralDecomposition> {
    SpectralDecomposition::from_operator(op, DEFAULT_DENSE_CAP)
}

impl SpectralDecomposition {
    pub fn from_operator(op: &DiscreteOperator, cap: usize) -> Result<Self> {
        if op.dim() > cap {
            return Err(Error::SizeOverCap { size: op.dim(), cap });
        }
        Self::from_dense(op.matrix().to_dense(), op.grid().cell_volume(), cap, PSD_TOLERANCE)
    }

    /// Decomposes a dense symmetric semidefinite matrix. `weight` is the
    /// discrete L² weight used by [`energy_norm`](Self::energy_norm).
    pub fn from_dense(matrix: DMatrix<f64>, weight: f64, cap: usize, psd_tol: f64) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.ncols() });
        }
        if n > cap {
            return Err(Error::SizeOverCap { size: n, cap });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 0.0 {
            return Err(Error::NotSymmetric { max_asymmetry: asym });
        }
        let norm = matrix.amax();
        let eig = SymmetricEigen::new(matrix);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        if let Some(&low) = eigenvalues.first() {
            if low < -psd_tol * norm {
                return Err(invalid!("operator is not semidefinite: smallest eigenvalue {low:e}"));
            }
        }
        Ok(Self { eigenvalues, vectors, weight, norm })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`eigenvalues`](Self::eigenvalues).
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `‖L‖_max` of the source operator.
    pub fn operator_norm(&self) -> f64 {
        self.norm
    }

    /// Eigenvalue with round-off below the semidefiniteness tolerance set to zero.
    fn clamped(&self, k: usize) -> f64 {
        let l = self.eigenvalues[k];
        if l.abs() <= PSD_TOLERANCE * self.norm {
            0.0
        } else {
            l
        }
    }

    fn kernel_dim(&self) -> usize {
        (0..self.dim()).take_while(|&k| self.clamped(k) == 0.0).count()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(())
    }

    /// `Φᵀ v`: the spectral coefficients `(v·φ_k)`.
    pub fn coefficients(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let c = self.vectors.tr_mul(&DVector::from_column_slice(v));
        Ok(c.iter().copied().collect())
    }

    fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let y = &self.vectors * DVector::from_column_slice(c);
        y.iter().copied().collect()
    }

    /// Values `φ(λ_k)`, failing if any is not finite.
    fn symbol<F: Fn(f64) -> f64>(&self, phi: F) -> Result<Vec<f64>> {
        (0..self.dim())
            .map(|k| {
                let lam = self.clamped(k);
                let v = phi(lam);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(alloc::format!("φ({lam:e}) = {v}")))
                }
            })
            .collect()
    }

    /// `φ(L) v = Σ_k φ(λ_k) (v·φ_k) φ_k`.
    pub fn apply_phi<F: Fn(f64) -> f64>(&self, phi: F, v: &[f64]) -> Result<Vec<f64>> {
        let sym = self.symbol(phi)?;
        let mut c = self.coefficients(v)?;
        for (ck, sk) in c.iter_mut().zip(&sym) {
            *ck *= sk;
        }
        Ok(self.synthesize(&c))
    }

    /// Dense matrix `φ(L) = Φ diag(φ(λ)) Φᵀ`.
    pub fn matrix_function<F: Fn(f64) -> f64>(&self, phi: F) -> Result<DMatrix<f64>> {
        let sym = self.symbol(phi)?;
        let mut scaled = self.vectors.clone();
        for (k, s) in sym.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*s);
        }
        Ok(scaled * self.vectors.transpose())
    }

    /// `L^s v` for `s ∈ (0, 1]`.
    pub fn fractional_apply(&self, s: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_order(s)?;
        self.apply_phi(|l| power(l, s), v)
    }

    /// `L^{s/2} v`.
    pub fn half_apply(&self, s: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_order(s)?;
        self.apply_phi(|l| power(l, 0.5 * s), v)
    }

    /// `e^{-tL} v`.
    pub fn heat_apply(&self, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(invalid!("heat time must be non-negative, got {t}"));
        }
        self.apply_phi(|l| (-t * l).exp(), v)
    }

    /// `L^s v` through the semigroup integral, trapezoid rule in `ln t` on
    /// `[t_min, t_max]`. The kernel component of `v` is annihilated exactly and
    /// the two truncated tails are added in closed form per eigenvalue.
    pub fn balakrishnan_apply(&self, s: f64, v: &[f64], spec: &QuadSpec) -> Result<Vec<f64>> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid!("semigroup quadrature needs s in (0,1), got {s}"));
        }
        spec.validate()?;
        let mut coeffs = self.coefficients(v)?;
        for c in coeffs.iter_mut().take(self.kernel_dim()) {
            *c = 0.0;
        }
        let v_perp = self.synthesize(&coeffs);

        let m = spec.nodes;
        let (lo, hi) = (spec.t_min.ln(), spec.t_max.ln());
        let step = (hi - lo) / (m - 1) as f64;
        let mut acc = alloc::vec![0.0; v.len()];
        for k in 0..m {
            let t = (lo + k as f64 * step).exp();
            let w = if k == 0 || k == m - 1 { 0.5 * step } else { step } * t.powf(-s);
            let heat = self.heat_apply(t, &v_perp)?;
            for ((a, e), x) in acc.iter_mut().zip(&heat).zip(&v_perp) {
                *a += w * (e - x);
            }
        }
        let tails = self.apply_phi(|l| if l == 0.0 { 0.0 } else { lower_tail(l, s, spec.t_min) + upper_tail(l, s, spec.t_max) }, &v_perp)?;
        let g = gamma_neg(s);
        Ok(acc.iter().zip(&tails).map(|(a, t)| (a + t) / g).collect())
    }

    /// `‖L^{s/2} v‖` in the discrete L² norm (weight `h^dim`).
    pub fn energy_norm(&self, s: f64, v: &[f64]) -> Result<f64> {
        let w = self.half_apply(s, v)?;
        Ok(crate::sparse::norm(&w) * self.weight.sqrt())
    }

    /// `‖ΦᵀΦ - I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        (self.vectors.tr_mul(&self.vectors) - DMatrix::identity(n, n)).amax()
    }

    /// `‖L - Φ diag(λ) Φᵀ‖_max`.
    pub fn reconstruction_error(&self, matrix: &DMatrix<f64>) -> f64 {
        let mut scaled = self.vectors.clone();
        for (k, l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*l);
        }
        (matrix - scaled * self.vectors.transpose()).amax()
    }
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(invalid!("fractional order must lie in (0,1], got {s}"));
    }
    Ok(())
}

fn power(l: f64, p: f64) -> f64 {
    if l == 0.0 {
        0.0
    } else {
        l.powf(p)
    }
}

// ∫_0^{t0} (e^{-λt} - 1) t^{-1-s} dt
fn lower_tail(lam: f64, s: f64, t0: f64) -> f64 {
    let x = lam * t0;
    if x <= 1.0 {
        // Σ_{j≥1} (-λ)^j t0^{j-s} / (j! (j - s))
        let mut term = 1.0;
        let mut sum = 0.0;
        for j in 1..60 {
            term *= -x / j as f64;
            let add = term / (j as f64 - s);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum * t0.powf(-s)
    } else {
        quad::adaptive(|t| (-lam * t).exp_m1() * t.powf(-1.0 - s), 0.0, t0, 0.0, 1e-13).unwrap_or(f64::NAN)
    }
}

// ∫_{t1}^∞ (e^{-λt} - 1) t^{-1-s} dt
fn upper_tail(lam: f64, s: f64, t1: f64) -> f64 {
    let mut value = -t1.powf(-s) / s;
    if lam * t1 < 60.0 {
        let end = t1 + 60.0 / lam;
        value += quad::adaptive(|t| (-lam * t).exp() * t.powf(-1.0 - s), t1, end, 0.0, 1e-13).unwrap_or(f64::NAN);
    }
    value
}

/// Log-uniform node set for the semigroup quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub nodes: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { nodes: 200, t_min: 1e-8, t_max: 1e4 }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || !(self.t_min > 0.0) || !(self.t_max > self.t_min) || !self.t_max.is_finite() {
            return Err(invalid!("empty quadrature range {self:?}"));
        }
        Ok(())
    }
}
