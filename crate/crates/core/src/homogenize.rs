//! ε-sweeps for oscillating coefficients `A(x/ε)`: solve the fractional problem
//! for each ε, solve the problem with the H-limit `A_*`, and compare weak
//! pairings, flux pairings and energies.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{
    flux_ratio, solve_nonlocal_with_reference, stability_ratio, ExteriorValueProblem,
    FractionalForm, Route, SolveReport,
};
use crate::domain::{
    mask_domain, periodic_coefficient, BoundaryMode, CartesianGrid, CoefficientField, DomainMask, Profile, Region,
    SymMatrix,
};
use crate::error::{invalid, Error, Result};
use crate::kernel::assemble_fraclap_form;
use crate::local_op::assemble_stiffness;
use crate::sparse;
use crate::spectral::{decompose, SpectralDecomposition};

/// Source term on the interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Constant { value: f64 },
    /// Smooth compactly supported bump `amplitude · exp(1 - 1/(1 - |x-c|²/r²))`.
    Bump { amplitude: f64, center: [f64; 2], radius: f64 },
}

impl Source {
    pub fn sample(&self, grid: &CartesianGrid) -> Vec<f64> {
        match *self {
            Source::Constant { value } => vec![value; grid.len()],
            Source::Bump { amplitude, center, radius } => {
                grid.points().map(|p| amplitude * bump(p, center, radius, grid.dim())).collect()
            }
        }
    }
}

/// Exterior datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exterior {
    Zero,
    Constant { value: f64 },
}

impl Exterior {
    pub fn sample(&self, grid: &CartesianGrid) -> Vec<f64> {
        match *self {
            Exterior::Zero => vec![0.0; grid.len()],
            Exterior::Constant { value } => vec![value; grid.len()],
        }
    }
}

/// `exp(1 - 1/(1 - ρ²))` for `ρ = |x - c|/r < 1`, else 0; peak value 1.
pub fn bump(p: [f64; 2], center: [f64; 2], radius: f64, dim: usize) -> f64 {
    let rho2: f64 = (0..dim).map(|a| ((p[a] - center[a]) / radius).powi(2)).sum();
    if rho2 < 1.0 {
        (1.0 - 1.0 / (1.0 - rho2)).exp()
    } else {
        0.0
    }
}

/// Named analytic test function supported in the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Bump { center: [f64; 2], radius: f64 },
    /// `Π_a sin(πk(x_a - lo_a)/(hi_a - lo_a))` inside the region, 0 outside.
    Fourier { k: u32 },
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            TestFunction::Bump { center, radius } => alloc::format!("bump({:.3},{:.3};{:.3})", center[0], center[1], radius),
            TestFunction::Fourier { k } => alloc::format!("fourier({k})"),
        }
    }

    pub fn sample(&self, grid: &CartesianGrid, region: &Region) -> Vec<f64> {
        let (lo, hi) = region_bounds(region);
        grid.points()
            .map(|p| match *self {
                TestFunction::Bump { center, radius } => bump(p, center, radius, grid.dim()),
                TestFunction::Fourier { k } => {
                    if region.contains(p) {
                        (0..grid.dim())
                            .map(|a| (PI * k as f64 * (p[a] - lo[a]) / (hi[a] - lo[a])).sin())
                            .product()
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }
}

fn region_bounds(region: &Region) -> ([f64; 2], [f64; 2]) {
    match *region {
        Region::Interval { lo, hi } => ([lo, 0.0], [hi, 0.0]),
        Region::Box { lo, hi } => (lo, hi),
    }
}

/// Five bumps spread across the region and the first three Fourier modes.
pub fn default_test_set(region: &Region) -> Vec<TestFunction> {
    let (lo, hi) = region_bounds(region);
    let dim = region.dim();
    let width = (0..dim).map(|a| hi[a] - lo[a]).fold(f64::INFINITY, f64::min);
    let radius = 0.175 * width;
    let mut set: Vec<TestFunction> = [0.2, 0.35, 0.5, 0.65, 0.8]
        .iter()
        .map(|&t| {
            let mut c = [0.0; 2];
            for a in 0..dim {
                c[a] = lo[a] + t * (hi[a] - lo[a]);
            }
            TestFunction::Bump { center: c, radius }
        })
        .collect();
    set.extend((1..=3).map(|k| TestFunction::Fourier { k }));
    set
}

/// `h^dim Σ u φ_m` for each test function.
pub fn weak_pairing(u: &[f64], grid: &CartesianGrid, tests: &[Vec<f64>]) -> Result<Vec<f64>> {
    if u.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: u.len() });
    }
    let w = grid.cell_volume();
    tests
        .iter()
        .map(|phi| {
            if phi.len() != u.len() {
                return Err(Error::DimensionMismatch { expected: u.len(), found: phi.len() });
            }
            Ok(w * sparse::dot(u, phi))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTolerances {
    /// Final weak gap bound, relative to `‖φ‖_{L²}`.
    pub weak: f64,
    /// Final flux gap bound, relative to `‖ψ‖_{L²}`.
    pub flux: f64,
    /// Final relative energy gap.
    pub energy: f64,
    /// Allowed increase between consecutive gaps, relative to `‖φ‖_{L²}`.
    pub trend_slack: f64,
}

impl Default for SweepTolerances {
    fn default() -> Self {
        Self { weak: 2e-2, flux: 2e-2, energy: 5e-2, trend_slack: 1e-3 }
    }
}

impl SweepTolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("weak", self.weak), ("flux", self.flux), ("energy", self.energy), ("trend_slack", self.trend_slack)] {
            if !(1e-12..=1.0).contains(&v) {
                return Err(invalid!("tolerance {name} = {v} outside [1e-12, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub s: f64,
    pub route: Route,
    pub profile: Profile,
    pub epsilons: Vec<f64>,
    pub dim: usize,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    pub boundary_mode: BoundaryMode,
    pub region: Region,
    pub source: Source,
    pub exterior: Exterior,
    pub tests: Vec<TestFunction>,
    pub tolerances: SweepTolerances,
    /// Replaces the closed-form `A_*` by `diag(v, v)` (negative control).
    #[serde(default)]
    pub a_star_override: Option<f64>,
}

impl SweepConfig {
    /// The sin1d desk configuration on `(-1, 1)` with `f = 1`, `g = 0`.
    pub fn sin1d_desk(s: f64, nodes_per_axis: usize) -> Self {
        let region = Region::symmetric(1, 1.0);
        Self {
            s,
            route: Route::Spectral,
            profile: Profile::Sin1d { mean: 2.0 },
            epsilons: vec![0.25, 0.125, 0.0625, 0.03125],
            dim: 1,
            half_width: 4.0,
            nodes_per_axis,
            boundary_mode: BoundaryMode::Periodic,
            region,
            source: Source::Constant { value: 1.0 },
            exterior: Exterior::Zero,
            tests: default_test_set(&region),
            tolerances: SweepTolerances::default(),
            a_star_override: None,
        }
    }

    pub fn grid(&self) -> Result<CartesianGrid> {
        CartesianGrid::new(self.dim, self.half_width, self.nodes_per_axis, self.boundary_mode)
    }

    pub fn validate(&self) -> Result<CartesianGrid> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid!("fractional order must lie in (0,1), got {}", self.s));
        }
        self.profile.validate()?;
        self.tolerances.validate()?;
        let grid = self.grid()?;
        if self.epsilons.is_empty() {
            return Err(invalid!("empty epsilon list"));
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid!("epsilon list must be strictly descending"));
        }
        let h = grid.spacing();
        if let Some(&e) = self.epsilons.iter().find(|&&e| !(e >= 4.0 * h - 1e-12)) {
            return Err(invalid!("epsilon {e} resolves fewer than 4 cells of size {h}"));
        }
        if self.tests.is_empty() {
            return Err(invalid!("empty test-function set"));
        }
        if self.route == Route::Kernel && !self.profile.is_constant() {
            return Err(Error::Unsupported("the kernel route takes constant coefficients only".into()));
        }
        if self.route == Route::SpectralDirichlet {
            return Err(Error::Unsupported("sweeps use the spectral or kernel route".into()));
        }
        if let Some(v) = self.a_star_override {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Ellipticity(alloc::format!("A_* override {v} is not positive")));
            }
        }
        Ok(grid)
    }
}

/// Metrics of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `None` on the homogenized row.
    pub epsilon: Option<f64>,
    pub weak: Vec<f64>,
    /// `‖L^{s/2} u‖²`.
    pub energy: f64,
    /// `⟨L^{s/2} u, ψ_m⟩`.
    pub flux: Vec<f64>,
    pub stability_ratio: f64,
    pub flux_ratio: f64,
    pub residual: f64,
    /// `max_ψ |⟨L^s u, ψ⟩ - ⟨f, ψ⟩|`, relative.
    pub pairing_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub weak: bool,
    pub flux: bool,
    pub energy: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.weak && self.flux && self.energy
    }
}

/// Gaps of every ε row against the homogenized row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaps {
    /// `[row][test]` of `|∫(u_ε - u)φ| / ‖φ‖`.
    pub weak: Vec<Vec<f64>>,
    pub flux: Vec<Vec<f64>>,
    /// `|E_ε - E_*| / E_*` per row.
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub s: f64,
    pub a_star: [f64; 2],
    pub test_names: Vec<String>,
    pub test_norms: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub homogenized: Option<SweepRow>,
    pub tolerances: SweepTolerances,
    pub complete: bool,
    pub failure: Option<String>,
    pub verdicts: Option<Verdicts>,
}

impl ConvergenceReport {
    /// `max / min` of the stability ratio over the ε rows.
    pub fn stability_spread(&self) -> f64 {
        spread(self.rows.iter().map(|r| r.stability_ratio))
    }

    pub fn flux_spread(&self) -> f64 {
        spread(self.rows.iter().map(|r| r.flux_ratio))
    }

    /// Gaps of each ε row relative to the homogenized row.
    pub fn gaps(&self) -> Result<Gaps> {
        let hom = self.homogenized.as_ref().ok_or_else(|| invalid!("report has no homogenized row"))?;
        let rel = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).zip(&self.test_norms).map(|((x, y), n)| (x - y).abs() / n).collect()
        };
        Ok(Gaps {
            weak: self.rows.iter().map(|r| rel(&r.weak, &hom.weak)).collect(),
            flux: self.rows.iter().map(|r| rel(&r.flux, &hom.flux)).collect(),
            energy: self.rows.iter().map(|r| relative_gap(r.energy, hom.energy)).collect(),
        })
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > 0.0 {
        hi / lo
    } else if hi == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Shared per-sweep state: grid, mask, data and the `A = I` reference form.
struct Bench {
    grid: CartesianGrid,
    mask: DomainMask,
    problem: ExteriorValueProblem,
    tests: Vec<Vec<f64>>,
    reference: FractionalForm,
    /// `h^{-dim} B` of the kernel reference, decomposed for `L^{s/2}`.
    kernel_half: Option<SpectralDecomposition>,
}

impl Bench {
    fn new(config: &SweepConfig) -> Result<Self> {
        let grid = config.validate()?;
        let mask = mask_domain(&grid, &config.region, None)?;
        let problem = ExteriorValueProblem::new(mask.clone(), config.source.sample(&grid), config.exterior.sample(&grid))?;
        let tests: Vec<Vec<f64>> = config.tests.iter().map(|t| t.sample(&grid, &config.region)).collect();
        let (reference, kernel_half) = match config.route {
            Route::Kernel => {
                let form = FractionalForm::kernel(&assemble_fraclap_form(&grid, config.s)?);
                let w = grid.cell_volume();
                let dec = SpectralDecomposition::from_dense(form.matrix() / w, w, crate::spectral::DEFAULT_DENSE_CAP, 1e-9)?;
                (form, Some(dec))
            }
            _ => {
                let op = assemble_stiffness(&grid, &CoefficientField::constant(&grid, 1.0)?)?;
                (FractionalForm::spectral(&decompose(&op)?, &grid, config.s, true)?, None)
            }
        };
        Ok(Self { grid, mask, problem, tests, reference, kernel_half })
    }

    fn solve(&self, config: &SweepConfig, coeff: &CoefficientField, epsilon: Option<f64>) -> Result<(SolveReport, SweepRow)> {
        let s = config.s;
        let (form, half): (FractionalForm, Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + '_>) = match &self.kernel_half {
            Some(dec) => {
                // A = c I: L^s = c^s (-Δ)^s
                let scale = coeff.samples()[0].xx.powf(s);
                let mut form = self.reference.clone();
                form.scale(scale)?;
                let root = scale.sqrt();
                (form, Box::new(move |v: &[f64]| dec.apply_phi(|l| root * l.max(0.0).sqrt(), v)))
            }
            _ => {
                let op = assemble_stiffness(&self.grid, coeff)?;
                let dec = decompose(&op)?;
                let form = FractionalForm::spectral(&dec, &self.grid, s, false)?;
                (form, Box::new(move |v: &[f64]| dec.half_apply(s, v)))
            }
        };
        let report = solve_nonlocal_with_reference(&form, &self.reference, &self.problem)?;
        let u = &report.u;
        let weak = weak_pairing(u, &self.grid, &self.tests)?;
        let lhalf = half(u)?;
        let flux = weak_pairing(&lhalf, &self.grid, &self.tests)?;
        let row = SweepRow {
            epsilon,
            weak,
            energy: report.norms.flux * report.norms.flux,
            flux,
            stability_ratio: stability_ratio(&report)?,
            flux_ratio: flux_ratio(&report)?,
            residual: report.norms.residual,
            pairing_defect: self.pairing_defect(&form, u)?,
        };
        Ok((report, row))
    }

    fn pairing_defect(&self, form: &FractionalForm, u: &[f64]) -> Result<f64> {
        let bu = form.apply(u)?;
        let w = self.grid.cell_volume();
        let mut worst: f64 = 0.0;
        for phi in &self.tests {
            let inside = phi.iter().enumerate().all(|(k, &v)| v == 0.0 || self.mask.labels[k] == crate::domain::NodeLabel::Interior);
            if !inside {
                continue;
            }
            let lhs = sparse::dot(&bu, phi);
            let rhs = w * sparse::dot(&self.problem.f, phi);
            let scale = rhs.abs().max(form.matrix().amax() * sparse::norm(u) * sparse::norm(phi));
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
        Ok(worst)
    }
}

fn constant_field(grid: &CartesianGrid, a: [f64; 2]) -> Result<CoefficientField> {
    CoefficientField::from_samples(grid, vec![SymMatrix::diagonal(a[0], a[1]); grid.len()])
}

/// The `A_*` used for the homogenized solve (override included).
pub fn homogenized_coefficient(config: &SweepConfig) -> Result<[f64; 2]> {
    match config.a_star_override {
        Some(v) => Ok([v, v]),
        None => config.profile.h_limit(config.dim),
    }
}

/// Solve with the constant field `A_*`.
pub fn homogenized_solve(config: &SweepConfig) -> Result<SolveReport> {
    let bench = Bench::new(config)?;
    let a = homogenized_coefficient(config)?;
    Ok(bench.solve(config, &constant_field(&bench.grid, a)?, None)?.0)
}

/// Runs every ε, then the homogenized problem, then the verdicts. A failing
/// solve stops the sweep and returns the rows computed so far, marked incomplete.
pub fn run_sweep(config: &SweepConfig) -> Result<ConvergenceReport> {
    let bench = Bench::new(config)?;
    let a_star = homogenized_coefficient(config)?;
    let mut report = ConvergenceReport {
        s: config.s,
        a_star,
        test_names: config.tests.iter().map(|t| t.name()).collect(),
        test_norms: bench.tests.iter().map(|t| sparse::norm(t) * bench.grid.cell_volume().sqrt()).collect(),
        rows: Vec::new(),
        homogenized: None,
        tolerances: config.tolerances,
        complete: false,
        failure: None,
        verdicts: None,
    };
    if let Some(k) = report.test_norms.iter().position(|&n| n == 0.0) {
        return Err(invalid!("test function {} vanishes on the grid", report.test_names[k]));
    }
    for &eps in &config.epsilons {
        let step = periodic_coefficient(&config.profile, eps, &bench.grid)
            .and_then(|coeff| bench.solve(config, &coeff, Some(eps)));
        match step {
            Ok((_, row)) => report.rows.push(row),
            Err(e) => {
                report.failure = Some(alloc::format!("epsilon {eps}: {e}"));
                return Ok(report);
            }
        }
    }
    match constant_field(&bench.grid, a_star).and_then(|c| bench.solve(config, &c, None)) {
        Ok((_, row)) => report.homogenized = Some(row),
        Err(e) => {
            report.failure = Some(alloc::format!("homogenized solve: {e}"));
            return Ok(report);
        }
    }
    report.complete = true;
    if report.rows.len() >= 3 {
        report.verdicts = Some(verify_theorem1(&report, &config.tolerances)?);
    }
    Ok(report)
}

/// True when the last three values never increase by more than `slack`.
fn tail_non_increasing(values: &[f64], slack: f64) -> bool {
    let tail = &values[values.len().saturating_sub(3)..];
    tail.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// WEAK and FLUX: each test function's final gap within tolerance and its last
/// three gaps non-increasing. ENERGY: final relative gap within tolerance.
pub fn verify_theorem1(report: &ConvergenceReport, tol: &SweepTolerances) -> Result<Verdicts> {
    if !report.complete {
        return Err(invalid!("report is incomplete"));
    }
    if report.rows.len() < 3 {
        return Err(invalid!("trend needs at least 3 epsilon values, got {}", report.rows.len()));
    }
    let gaps = report.gaps()?;
    let per_test = |g: &[Vec<f64>], bound: f64| {
        (0..report.test_norms.len()).all(|m| {
            let series: Vec<f64> = g.iter().map(|row| row[m]).collect();
            series[series.len() - 1] <= bound && tail_non_increasing(&series, tol.trend_slack)
        })
    };
    Ok(Verdicts {
        weak: per_test(&gaps.weak, tol.weak),
        flux: per_test(&gaps.flux, tol.flux),
        energy: gaps.energy[gaps.energy.len() - 1] <= tol.energy,
    })
}

impl core::fmt::Display for Verdicts {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let word = |b: bool| if b { "pass" } else { "fail" };
        write!(f, "WEAK {} FLUX {} ENERGY {}", word(self.weak), word(self.flux), word(self.energy))
    }
}
