//! Route-against-route checks shared by the `validate` command and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use frachom_core::kernel::{kernel_ks, kernel_ks_closed_form, HeatKernelBounds};
use frachom_core::sparse::{dot, norm};
use frachom_core::spectral::{QuadSpec, SpectralDecomposition, PSD_TOLERANCE};

use crate::error::RunError;

/// `count` vectors of length `n` with entries uniform in `[-1, 1)`, reproducible from `seed`.
pub fn random_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&d)
    } else {
        norm(&d) / nb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCalculusCheck {
    pub s: f64,
    /// `max_k ‖L^s φ_k - λ_k^s φ_k‖ / ‖λ_k^s φ_k‖`; kernel modes are measured against `‖L‖^s` instead.
    pub eigen_error: f64,
    /// `max_v |⟨L^s v, v⟩ - ‖L^{s/2} v‖²| / ‖L^{s/2} v‖²`.
    pub identity_error: f64,
}

pub fn functional_calculus(dec: &SpectralDecomposition, s: f64, vectors: &[Vec<f64>]) -> Result<FunctionalCalculusCheck, RunError> {
    let norm_s = dec.operator_norm().powf(s);
    let mut eigen_error: f64 = 0.0;
    for (k, &lambda) in dec.eigenvalues().iter().enumerate() {
        let phi = dec.eigenvector(k);
        let got = dec.fractional_apply(s, &phi)?;
        // round-off eigenvalues of the kernel count as exact zeros
        let scale = if lambda.abs() <= PSD_TOLERANCE * dec.operator_norm() { 0.0 } else { lambda.powf(s) };
        let expect: Vec<f64> = phi.iter().map(|v| scale * v).collect();
        let d: Vec<f64> = got.iter().zip(&expect).map(|(a, b)| a - b).collect();
        let denom = if scale > 0.0 { norm(&expect) } else { norm_s * norm(&phi) };
        eigen_error = eigen_error.max(norm(&d) / denom);
    }
    let mut identity_error: f64 = 0.0;
    for v in vectors {
        let lhs = dot(&dec.fractional_apply(s, v)?, v);
        let half = dec.half_apply(s, v)?;
        let rhs = dot(&half, &half);
        identity_error = identity_error.max((lhs - rhs).abs() / rhs);
    }
    Ok(FunctionalCalculusCheck { s, eigen_error, identity_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalakrishnanCheck {
    pub s: f64,
    pub nodes: Vec<usize>,
    /// Relative ℓ² error against the spectral route for each node count.
    pub errors: Vec<f64>,
}

impl BalakrishnanCheck {
    pub fn monotone(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }

    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("at least one node count")
    }
}

pub fn balakrishnan(dec: &SpectralDecomposition, s: f64, v: &[f64], nodes: &[usize]) -> Result<BalakrishnanCheck, RunError> {
    let exact = dec.fractional_apply(s, v)?;
    let errors = nodes
        .iter()
        .map(|&m| {
            let spec = QuadSpec { nodes: m, ..QuadSpec::default() };
            Ok(relative(&dec.balakrishnan_apply(s, v, &spec)?, &exact))
        })
        .collect::<Result<Vec<f64>, RunError>>()?;
    Ok(BalakrishnanCheck { s, nodes: nodes.to_vec(), errors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub n: usize,
    pub s: f64,
    pub r: f64,
    pub quadrature: f64,
    pub closed_form: f64,
    pub rel_error: f64,
    pub lower: f64,
    pub upper: f64,
}

impl KernelCheck {
    /// Bounds hold up to the relative tolerance `tol` (they coincide for the Gaussian kernel).
    pub fn within_bounds(&self, tol: f64) -> bool {
        self.quadrature >= self.lower * (1.0 - tol) && self.quadrature <= self.upper * (1.0 + tol)
    }
}

/// Subordination quadrature of the `A = I` kernel against its closed form.
pub fn kernel_closed_form(dims: &[usize], s_values: &[f64], distances: &[f64], rel_tol: f64) -> Result<Vec<KernelCheck>, RunError> {
    let mut out = Vec::new();
    for &n in dims {
        let bounds = HeatKernelBounds::gaussian(n);
        for &s in s_values {
            for &r in distances {
                let x = vec![0.0; n];
                let mut z = vec![0.0; n];
                z[0] = r;
                let quadrature = kernel_ks(&x, &z, s, rel_tol)?;
                let closed_form = kernel_ks_closed_form(r, s, n)?;
                let (lower, upper) = bounds.kernel_bounds(r, s, n)?;
                out.push(KernelCheck {
                    n,
                    s,
                    r,
                    quadrature,
                    closed_form,
                    rel_error: (quadrature / closed_form - 1.0).abs(),
                    lower,
                    upper,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_vectors_are_reproducible() {
        let a = random_vectors(8, 3, 42);
        assert_eq!(a, random_vectors(8, 3, 42));
        assert_ne!(a, random_vectors(8, 3, 43));
        assert!(a.iter().flatten().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-2, 1e1, 20);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1e-2).abs() < 1e-16 && (g[19] - 10.0).abs() < 1e-12);
    }
}
