//! Perforated domains: the radial corrector family, its hypothesis checks,
//! fractional and local sweeps over shrinking hole lattices, and the
//! criticality classifier for the limiting hole capacity.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{galerkin_defect, solve_nonlocal, ExteriorValueProblem, FractionalForm, Route, SolveReport};
use crate::domain::{
    hole_measure, mask_domain, BoundaryMode, CartesianGrid, CoefficientField, DomainMask, HoleFamily, RadiusRule, Region,
};
use crate::error::{invalid, Error, Result};
use crate::homogenize::{bump, Exterior, Source};
use crate::kernel::{self, assemble_fraclap_form};
use crate::local_op::{assemble_stiffness, solve_local_dirichlet};
use crate::quad;
use crate::sparse;
use crate::spectral::decompose;

/// Radial correctors `w_ε(r)`: 0 inside the hole `r ≤ a_ε`, 1 for `r ≥ ε`, and
/// the capacitary potential of the annulus in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorFamily {
    pub dim: usize,
    pub radius_rule: RadiusRule,
}

impl CorrectorFamily {
    pub fn new(dim: usize, radius_rule: RadiusRule) -> Result<Self> {
        if dim < 2 {
            return Err(invalid!("radial correctors need dimension at least 2, got {dim}"));
        }
        radius_rule.validate()?;
        Ok(Self { dim, radius_rule })
    }

    fn check(&self, epsilon: f64) -> Result<f64> {
        let ln_a = self.radius_rule.ln_radius(epsilon);
        if !(epsilon > 0.0 && epsilon < 1.0) || !(ln_a < epsilon.ln()) {
            return Err(invalid!("need 0 < a_ε < ε < 1, got ε = {epsilon}, ln a_ε = {ln_a}"));
        }
        Ok(ln_a)
    }

    /// `w_ε` as a function of `ρ = ln r` on the annulus.
    fn profile(&self, ln_a: f64, ln_eps: f64, rho: f64) -> f64 {
        if rho <= ln_a {
            return 0.0;
        }
        if rho >= ln_eps {
            return 1.0;
        }
        if self.dim == 2 {
            (ln_a - rho) / (ln_a - ln_eps)
        } else {
            // (a^{-k} - r^{-k}) / (a^{-k} - ε^{-k}) = (1 - (a/r)^k) / (1 - (a/ε)^k)
            let k = (self.dim - 2) as f64;
            let num = -(k * (ln_a - rho)).exp_m1();
            let den = -(k * (ln_a - ln_eps)).exp_m1();
            num / den
        }
    }

    /// `|S^{n-1}|`.
    fn sphere_area(&self) -> f64 {
        let n = self.dim as f64;
        2.0 * PI.powf(0.5 * n) / crate::special::gamma(0.5 * n)
    }
}

/// `w_ε(r)`.
pub fn corrector_eval(family: &CorrectorFamily, epsilon: f64, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid!("radius must be non-negative, got {r}"));
    }
    let ln_a = family.check(epsilon)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(family.profile(ln_a, epsilon.ln(), r.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub epsilon: f64,
    pub ln_radius: f64,
    /// Largest `|w_ε|` on the hole (exactly 0 by construction).
    pub hole_max: f64,
    /// `|∇w_ε|²` integrated over one annulus.
    pub cell_gradient: f64,
    /// `‖∇w_ε‖²_{L²(O)}` with `ε^{-n}` cells of side `2ε` in `O = (-1,1)^n`.
    pub gradient_energy: f64,
    /// `‖w_ε - 1‖_{L²(O)}`.
    pub l2_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub dim: usize,
    pub rows: Vec<HypothesisRow>,
    pub endpoints_exact: bool,
    pub gradient_bounded: bool,
    pub l2_decreasing: bool,
}

/// Bound on the gradient energy accepted as "bounded across ε".
pub const GRADIENT_ENERGY_BOUND: f64 = 1e3;

/// Gauss-Legendre over unit panels of `[a, b]`, one panel if `b - a` is huge.
fn panels(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let rule = quad::GaussLegendre::new(24);
    let count = ((b - a).ceil() as usize).clamp(1, 256);
    let w = (b - a) / count as f64;
    (0..count).map(|k| rule.integrate(a + k as f64 * w, a + (k + 1) as f64 * w, &f)).sum()
}

/// Checks the corrector hypotheses by quadrature in `ln r` on each annulus.
pub fn hypothesis_check(family: &CorrectorFamily, epsilons: &[f64]) -> Result<HypothesisReport> {
    let mut rows = Vec::with_capacity(epsilons.len());
    let mut endpoints_exact = true;
    let n = family.dim as f64;
    let area = family.sphere_area();
    for &eps in epsilons {
        let ln_a = family.check(eps)?;
        let ln_e = eps.ln();
        let a = ln_a.exp();
        endpoints_exact &= family.profile(ln_a, ln_e, ln_a) == 0.0 && family.profile(ln_a, ln_e, ln_e) == 1.0;
        if a > 0.0 {
            endpoints_exact &= corrector_eval(family, eps, a)? == 0.0 && corrector_eval(family, eps, eps)? == 1.0;
        }
        let hole_max = [0.0, 0.5, 1.0]
            .iter()
            .map(|t| family.profile(ln_a, ln_e, ln_a + (t - 1.0) * 10.0).abs())
            .fold(0.0, f64::max);

        // dw/dρ by central differences of the closed form would lose digits; use
        // the exact derivative r w'(r) in ρ.
        let dw = |rho: f64| -> f64 {
            if family.dim == 2 {
                1.0 / (ln_e - ln_a)
            } else {
                let k = n - 2.0;
                let den = -(k * (ln_a - ln_e)).exp_m1();
                k * (k * (ln_a - rho)).exp() / den
            }
        };
        // ∫ |w'|² r^{n-1} dr = ∫ (r w')² r^{n-2} dρ: constant in ρ for n = 2,
        // concentrated within a few units above ln a for n ≥ 3
        let hi = if family.dim == 2 { ln_e } else { ln_e.min(ln_a + 80.0) };
        let cell_gradient = area * panels(|rho| dw(rho).powi(2) * ((n - 2.0) * rho).exp(), ln_a, hi);
        // ∫ (1 - w)² r^{n-1} dr = ∫ (1 - w)² r^n dρ, negligible far below ln ε
        let lo = ln_a.max(ln_e - 80.0);
        let annulus = area * panels(|rho| (1.0 - family.profile(ln_a, ln_e, rho)).powi(2) * (n * rho).exp(), lo, ln_e);
        let hole_volume = area / n * (n * ln_a).exp();
        let cells = eps.powf(-n);
        rows.push(HypothesisRow {
            epsilon: eps,
            ln_radius: ln_a,
            hole_max,
            cell_gradient,
            gradient_energy: cells * cell_gradient,
            l2_defect: (cells * (annulus + hole_volume)).sqrt(),
        });
    }
    let gradient_bounded = rows.iter().all(|r| r.gradient_energy.is_finite() && r.gradient_energy <= GRADIENT_ENERGY_BOUND);
    let l2_decreasing = rows.windows(2).all(|w| w[1].l2_defect < w[0].l2_defect);
    Ok(HypothesisReport { dim: family.dim, rows, endpoints_exact, gradient_bounded, l2_decreasing })
}

/// Fractional solve with the holes pinned to the exterior datum.
pub fn solve_perforated(form: &FractionalForm, mask: &DomainMask, f: &[f64], g: &[f64]) -> Result<SolveReport> {
    let problem = ExteriorValueProblem::new(mask.clone(), f.to_vec(), g.to_vec())?;
    solve_nonlocal(form, &problem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerforatedConfig {
    pub s: f64,
    pub route: Route,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    pub boundary_mode: BoundaryMode,
    pub region: Region,
    pub radius_rule: RadiusRule,
    pub epsilons: Vec<f64>,
    pub source: Source,
    pub exterior: Exterior,
    /// Final relative gap bound for NOSTRANGE.
    pub tolerance: f64,
    /// Allowed increase between consecutive gaps.
    pub trend_slack: f64,
    /// Drop the holes (degenerate sweep).
    #[serde(default)]
    pub without_holes: bool,
}

impl PerforatedConfig {
    /// 1D desk configuration: `O = (-1,1)`, `f = 1`, `g = 0`, `a_ε = ε³`.
    pub fn desk(s: f64) -> Self {
        Self {
            s,
            route: Route::Spectral,
            half_width: 4.0,
            nodes_per_axis: 512,
            boundary_mode: BoundaryMode::Periodic,
            region: Region::symmetric(1, 1.0),
            radius_rule: RadiusRule::Power { coefficient: 1.0, exponent: 3.0 },
            epsilons: vec![0.125, 0.0625, 0.03125],
            source: Source::Constant { value: 1.0 },
            exterior: Exterior::Zero,
            tolerance: 0.05,
            trend_slack: 1e-3,
            without_holes: false,
        }
    }

    pub fn validate(&self) -> Result<CartesianGrid> {
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(invalid!("fractional order must lie in (0,1], got {}", self.s));
        }
        if self.region.dim() != 1 {
            return Err(Error::Unsupported("perforated sweeps are one-dimensional".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid!("epsilon list must be non-empty and strictly descending"));
        }
        for (name, v) in [("tolerance", self.tolerance), ("trend_slack", self.trend_slack)] {
            if !(1e-12..=1.0).contains(&v) {
                return Err(invalid!("{name} = {v} outside [1e-12, 1]"));
            }
        }
        if self.route == Route::SpectralDirichlet {
            return Err(Error::Unsupported("perforated sweeps use the spectral or kernel route".into()));
        }
        self.radius_rule.validate()?;
        CartesianGrid::new(1, self.half_width, self.nodes_per_axis, self.boundary_mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerforatedRow {
    pub epsilon: f64,
    pub radius: f64,
    pub holes: usize,
    pub hole_nodes: usize,
    /// Pinned-node count times `h`.
    pub hole_measure: f64,
    /// `#holes · 2 a_ε`.
    pub hole_measure_exact: f64,
    /// `‖u_ε - u‖ / ‖u‖` against the clean-domain solution.
    pub gap: f64,
    pub max_abs: f64,
    pub residual: f64,
    pub galerkin_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerforatedReport {
    pub s: f64,
    pub local: bool,
    pub clean_max: f64,
    pub rows: Vec<PerforatedRow>,
    pub tolerance: f64,
    pub complete: bool,
    pub failure: Option<String>,
    /// Final gap within tolerance and the last three gaps non-increasing.
    pub nostrange: Option<bool>,
}

impl PerforatedReport {
    fn finish(&mut self, slack: f64) {
        self.complete = true;
        let gaps: Vec<f64> = self.rows.iter().map(|r| r.gap).collect();
        if let Some(&last) = gaps.last() {
            let tail = &gaps[gaps.len().saturating_sub(3)..];
            self.nostrange = Some(last <= self.tolerance && tail.windows(2).all(|w| w[1] <= w[0] + slack));
        }
    }

    /// Every row's gap is at least `bound`.
    pub fn gaps_at_least(&self, bound: f64) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.gap >= bound)
    }
}

fn relative_gap(u: &[f64], reference: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(reference).map(|(a, b)| a - b).collect();
    let n = sparse::norm(reference);
    if n == 0.0 {
        sparse::norm(&d)
    } else {
        sparse::norm(&d) / n
    }
}

fn masks(config: &PerforatedConfig, grid: &CartesianGrid) -> Result<Vec<(f64, Option<HoleFamily>, DomainMask)>> {
    config
        .epsilons
        .iter()
        .map(|&eps| {
            let family = HoleFamily::new(1, eps, config.radius_rule)?;
            let holes = if config.without_holes { None } else { Some(family) };
            let mask = mask_domain(grid, &config.region, holes.as_ref())?;
            Ok((eps, Some(family), mask))
        })
        .collect()
}

fn row(eps: f64, family: &HoleFamily, config: &PerforatedConfig, mask: &DomainMask, u: &[f64], clean: &[f64]) -> PerforatedRow {
    let holes = if config.without_holes { 0 } else { family.centers(&config.region).len() };
    PerforatedRow {
        epsilon: eps,
        radius: family.radius(),
        holes,
        hole_nodes: mask.hole_nodes().len(),
        hole_measure: hole_measure(mask),
        hole_measure_exact: holes as f64 * 2.0 * family.radius(),
        gap: relative_gap(u, clean),
        max_abs: u.iter().fold(0.0, |m, v| m.max(v.abs())),
        residual: 0.0,
        galerkin_defect: 0.0,
    }
}

/// Fractional sweep against the clean-domain solution.
pub fn run_perforated_sweep(config: &PerforatedConfig) -> Result<PerforatedReport> {
    let grid = config.validate()?;
    if config.s >= 1.0 {
        return Err(invalid!("use the local comparison sweep for s = 1"));
    }
    let form = match config.route {
        Route::Kernel => FractionalForm::kernel(&assemble_fraclap_form(&grid, config.s)?),
        _ => {
            let op = assemble_stiffness(&grid, &CoefficientField::constant(&grid, 1.0)?)?;
            FractionalForm::spectral(&decompose(&op)?, &grid, config.s, true)?
        }
    };
    let f = config.source.sample(&grid);
    let g = config.exterior.sample(&grid);
    let clean_mask = mask_domain(&grid, &config.region, None)?;
    let clean = solve_perforated(&form, &clean_mask, &f, &g)?.u;
    let mut report = PerforatedReport {
        s: config.s,
        local: false,
        clean_max: clean.iter().fold(0.0, |m, v| m.max(v.abs())),
        rows: Vec::new(),
        tolerance: config.tolerance,
        complete: false,
        failure: None,
        nostrange: None,
    };
    for (eps, family, mask) in masks(config, &grid)? {
        let family = family.expect("family is always built");
        let problem = ExteriorValueProblem::new(mask.clone(), f.clone(), g.clone())?;
        match solve_nonlocal(&form, &problem) {
            Ok(sol) => {
                let mut r = row(eps, &family, config, &mask, &sol.u, &clean);
                r.residual = sol.norms.residual;
                r.galerkin_defect = galerkin_defect(&form, &problem, &sol.u)?;
                report.rows.push(r);
            }
            Err(e) => {
                report.failure = Some(format!("epsilon {eps}: {e}"));
                return Ok(report);
            }
        }
    }
    report.finish(config.trend_slack);
    Ok(report)
}

/// The same masks with the local operator `-Δ` (`s = 1`).
pub fn local_comparison_sweep(config: &PerforatedConfig) -> Result<PerforatedReport> {
    let grid = config.validate()?;
    let op = assemble_stiffness(&grid, &CoefficientField::constant(&grid, 1.0)?)?;
    let f = config.source.sample(&grid);
    let g = config.exterior.sample(&grid);
    let clean_mask = mask_domain(&grid, &config.region, None)?;
    let clean = solve_local_dirichlet(&op, &clean_mask, &f, &g)?;
    let mut report = PerforatedReport {
        s: 1.0,
        local: true,
        clean_max: clean.iter().fold(0.0, |m, v| m.max(v.abs())),
        rows: Vec::new(),
        tolerance: config.tolerance,
        complete: false,
        failure: None,
        nostrange: None,
    };
    for (eps, family, mask) in masks(config, &grid)? {
        let family = family.expect("family is always built");
        match solve_local_dirichlet(&op, &mask, &f, &g) {
            Ok(u) => {
                let mut r = row(eps, &family, config, &mask, &u, &clean);
                let lu = crate::local_op::apply(&op, &u)?;
                let interior = mask.interior_nodes();
                let res: Vec<f64> = interior.iter().map(|&i| lu[i] - f[i]).collect();
                let fi: Vec<f64> = interior.iter().map(|&i| f[i]).collect();
                r.residual = sparse::norm(&res) / (sparse::norm(&fi) + op.max_abs() * sparse::norm(&g)).max(f64::MIN_POSITIVE);
                r.galerkin_defect = r.residual;
                report.rows.push(r);
            }
            Err(e) => {
                report.failure = Some(format!("epsilon {eps}: {e}"));
                return Ok(report);
            }
        }
    }
    report.finish(config.trend_slack);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    /// The capacity density tends to zero: no extra term in the limit.
    Vanishing,
    NonVanishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Limit {
    Zero,
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub n: usize,
    pub rule: String,
    pub limit_expression: String,
    pub limit: Limit,
    pub verdict: Criticality,
    /// Set when the criterion is applied as printed for `n ≥ 3`.
    pub note: Option<String>,
}

fn rule_text(rule: &RadiusRule) -> String {
    match *rule {
        RadiusRule::Power { coefficient, exponent } => format!("a_eps = {coefficient} * eps^{exponent}"),
        RadiusRule::Exponential { coefficient, exponent } => format!("a_eps = exp(-{coefficient} / eps^{exponent})"),
    }
}

/// `lim_{ε→0} c ε^p`.
fn power_limit(c: f64, p: f64) -> Limit {
    if p > 0.0 {
        Limit::Zero
    } else if p == 0.0 {
        Limit::Finite(c)
    } else {
        Limit::Infinite
    }
}

/// Evaluates `lim (-ln a_ε)^{-1} / ε²` for `n = 2` and `lim a_ε / ε³` for
/// `n = 3` in closed form.
pub fn criticality_classify(n: usize, rule: &RadiusRule) -> Result<Classification> {
    rule.validate()?;
    let (expression, limit, note) = match n {
        2 => {
            let limit = match *rule {
                // (-ln c - α ln ε)^{-1} ε^{-2} → ∞
                RadiusRule::Power { .. } => Limit::Infinite,
                // ε^β / c / ε² = ε^{β-2} / c
                RadiusRule::Exponential { coefficient, exponent } => power_limit(1.0 / coefficient, exponent - 2.0),
            };
            ("lim (-ln a_eps)^(-1) / eps^2", limit, None)
        }
        3 => {
            let limit = match *rule {
                RadiusRule::Power { coefficient, exponent } => power_limit(coefficient, exponent - 3.0),
                RadiusRule::Exponential { .. } => Limit::Zero,
            };
            (
                "lim a_eps / eps^3",
                limit,
                Some("criterion for n >= 3 applied as printed (exponent 3), not the dimension-general n/(n-2)".into()),
            )
        }
        _ => return Err(Error::Unsupported(format!("criticality criterion for n = {n}"))),
    };
    Ok(Classification {
        n,
        rule: rule_text(rule),
        limit_expression: expression.into(),
        limit,
        verdict: if limit == Limit::Zero { Criticality::Vanishing } else { Criticality::NonVanishing },
        note,
    })
}

/// Seminorms of `w_ε φ - φ` for a 1D surrogate corrector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongConvergenceRow {
    pub epsilon: f64,
    /// `‖(-Δ)^{s/2}(w_ε φ - φ)‖`.
    pub fractional: f64,
    /// `‖∇(w_ε φ - φ)‖`.
    pub gradient: f64,
}

/// 1D surrogate of the corrector: 0 at the lattice points `(k+½)ε`, rising
/// linearly to 1 over a distance `δ = ε²` on either side.
pub fn ramp_corrector(x: f64, epsilon: f64) -> f64 {
    let delta = epsilon * epsilon;
    let k = (x / epsilon - 0.5).round();
    let d = (x - (k + 0.5) * epsilon).abs();
    (d / delta).min(1.0)
}

/// Evaluates the fractional and gradient seminorms of `w_ε φ - φ` for the bump
/// `φ` of radius `radius` at the origin, on a zero-exterior grid.
pub fn strong_convergence_surrogate(
    s: f64,
    epsilons: &[f64],
    half_width: f64,
    nodes: usize,
    radius: f64,
) -> Result<Vec<StrongConvergenceRow>> {
    let grid = CartesianGrid::new(1, half_width, nodes, BoundaryMode::ZeroExterior)?;
    let band = kernel::toeplitz_band(&grid, s)?;
    let h = grid.spacing();
    epsilons
        .iter()
        .map(|&eps| {
            let v: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.axis_coord(i);
                    let phi = bump([x, 0.0], [0.0, 0.0], radius, 1);
                    (ramp_corrector(x, eps) - 1.0) * phi
                })
                .collect();
            let support: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
            let mut energy = 0.0;
            for &i in &support {
                let mut row = 0.0;
                for &j in &support {
                    row += band[i.abs_diff(j)] * v[j];
                }
                energy += row * v[i];
            }
            let gradient = (v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h).sqrt();
            Ok(StrongConvergenceRow { epsilon: eps, fractional: energy.max(0.0).sqrt(), gradient })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log2d(c: f64, e: f64) -> CorrectorFamily {
        CorrectorFamily::new(2, RadiusRule::Exponential { coefficient: c, exponent: e }).unwrap()
    }

    #[test]
    fn corrector_endpoints_and_values() {
        let fam = CorrectorFamily::new(2, RadiusRule::Power { coefficient: 1.0, exponent: 4.0 }).unwrap();
        let eps = 0.1;
        let a = 1e-4;
        assert_eq!(corrector_eval(&fam, eps, a).unwrap(), 0.0);
        assert_eq!(corrector_eval(&fam, eps, eps).unwrap(), 1.0);
        assert!((corrector_eval(&fam, eps, eps * eps).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(corrector_eval(&fam, eps, 0.5).unwrap(), 1.0);
        assert_eq!(corrector_eval(&fam, eps, 1e-6).unwrap(), 0.0);
        assert!(corrector_eval(&fam, eps, -1.0).is_err());
        let fam3 = CorrectorFamily::new(3, RadiusRule::Power { coefficient: 1.0, exponent: 2.0 }).unwrap();
        assert_eq!(corrector_eval(&fam3, 0.2, 0.04).unwrap(), 0.0);
        assert_eq!(corrector_eval(&fam3, 0.2, 0.2).unwrap(), 1.0);
        // (a^{-1} - r^{-1}) / (a^{-1} - ε^{-1})
        let expect = (25.0 - 10.0) / (25.0 - 5.0);
        assert!((corrector_eval(&fam3, 0.2, 0.1).unwrap() - expect).abs() < 1e-12);
        for k in 0..50 {
            let r = 0.04 + 0.16 * k as f64 / 49.0;
            let w = corrector_eval(&fam3, 0.2, r).unwrap();
            assert!((0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn hypotheses_for_exponential_radii() {
        let fam = log2d(1.0, 3.0);
        let eps = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
        let r = hypothesis_check(&fam, &eps).unwrap();
        assert!(r.endpoints_exact && r.gradient_bounded && r.l2_decreasing);
        for row in &r.rows {
            assert_eq!(row.hole_max, 0.0);
            // 2π / ln(ε / a_ε) per annulus
            let closed = 2.0 * PI / (row.epsilon.ln() - row.ln_radius);
            assert!((row.cell_gradient / closed - 1.0).abs() < 1e-9);
        }
        let g: Vec<f64> = r.rows.iter().map(|r| r.gradient_energy).collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn three_dimensional_gradient_matches_capacity() {
        let fam = CorrectorFamily::new(3, RadiusRule::Power { coefficient: 1.0, exponent: 3.0 }).unwrap();
        let r = hypothesis_check(&fam, &[0.25, 0.125]).unwrap();
        for row in &r.rows {
            let (a, e) = (row.ln_radius.exp(), row.epsilon);
            let closed = 4.0 * PI / (1.0 / a - 1.0 / e);
            assert!((row.cell_gradient / closed - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn classifier_examples() {
        let c = criticality_classify(2, &RadiusRule::Exponential { coefficient: 1.0, exponent: 3.0 }).unwrap();
        assert_eq!(c.verdict, Criticality::Vanishing);
        let c = criticality_classify(2, &RadiusRule::Exponential { coefficient: 1.0, exponent: 2.0 }).unwrap();
        assert_eq!((c.verdict, c.limit), (Criticality::NonVanishing, Limit::Finite(1.0)));
        let c = criticality_classify(3, &RadiusRule::Power { coefficient: 1.0, exponent: 4.0 }).unwrap();
        assert_eq!(c.verdict, Criticality::Vanishing);
        assert!(c.note.is_some());
        let c = criticality_classify(2, &RadiusRule::Power { coefficient: 1.0, exponent: 3.0 }).unwrap();
        assert_eq!((c.verdict, c.limit), (Criticality::NonVanishing, Limit::Infinite));
        assert!(criticality_classify(4, &RadiusRule::Power { coefficient: 1.0, exponent: 3.0 }).is_err());
    }

    fn small(s: f64) -> PerforatedConfig {
        let mut c = PerforatedConfig::desk(s);
        c.half_width = 2.0;
        c.nodes_per_axis = 256;
        c
    }

    #[test]
    fn no_holes_match_clean_solution() {
        let mut c = small(0.4);
        c.without_holes = true;
        let r = run_perforated_sweep(&c).unwrap();
        assert!(r.rows.iter().all(|row| row.gap < 1e-12 && row.hole_nodes == 0));
        assert_eq!(r.nostrange, Some(true));
        let l = local_comparison_sweep(&c).unwrap();
        assert!(l.rows.iter().all(|row| row.gap < 1e-10));
    }

    #[test]
    fn constant_datum_survives_holes() {
        let c = small(0.4);
        let grid = c.validate().unwrap();
        let op = assemble_stiffness(&grid, &CoefficientField::constant(&grid, 1.0).unwrap()).unwrap();
        let form = FractionalForm::spectral(&decompose(&op).unwrap(), &grid, 0.4, true).unwrap();
        let fam = HoleFamily::new(1, 0.125, c.radius_rule).unwrap();
        let mask = mask_domain(&grid, &c.region, Some(&fam)).unwrap();
        let sol = solve_perforated(&form, &mask, &vec![0.0; grid.len()], &vec![0.7; grid.len()]).unwrap();
        assert!(sol.u.iter().all(|v| (v - 0.7).abs() < 1e-9));
        let sol = solve_perforated(&form, &mask, &vec![1.0; grid.len()], &vec![0.0; grid.len()]).unwrap();
        for k in mask.hole_nodes() {
            assert_eq!(sol.u[k], 0.0);
        }
    }

    #[test]
    fn local_sweep_keeps_a_large_gap() {
        let r = local_comparison_sweep(&small(0.4)).unwrap();
        assert!(r.gaps_at_least(0.5));
        assert_eq!(r.nostrange, Some(false));
        for row in &r.rows {
            assert!(row.max_abs <= row.epsilon * row.epsilon / 8.0 * 1.05, "{row:?}");
            assert_eq!(row.holes, (2.0 / row.epsilon).round() as usize);
        }
        assert!((r.clean_max - 0.5).abs() < 1e-3);
        // exact hole measure 2/ε · 2ε³ = 4ε²
        for row in &r.rows {
            assert!((row.hole_measure_exact / (4.0 * row.epsilon * row.epsilon) - 1.0).abs() < 1e-12);
        }
        assert!(r.rows.windows(2).all(|w| w[1].hole_measure_exact < w[0].hole_measure_exact));
    }

    #[test]
    fn fractional_sweep_records_galerkin_exactness() {
        let r = run_perforated_sweep(&small(0.4)).unwrap();
        assert!(r.complete);
        for row in &r.rows {
            assert!(row.residual <= 1e-8 && row.galerkin_defect < 1e-8);
            assert!(row.gap < 1.0);
        }
    }

    #[test]
    fn strong_convergence_dichotomy() {
        let rows = strong_convergence_surrogate(0.1, &[0.25, 0.125, 0.0625], 1.0, 2048, 0.8).unwrap();
        assert!(rows.windows(2).all(|w| w[1].fractional < w[0].fractional), "{rows:?}");
        assert!(rows.windows(2).all(|w| w[1].gradient > w[0].gradient), "{rows:?}");
    }
}
