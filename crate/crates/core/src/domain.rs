//! Grids, domain masks with periodic hole families, sampled coefficient fields
//! and closed-form H-limits for the supported periodic profiles.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::{self, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Index `N` is identified with index `0` on each axis.
    Periodic,
    /// Values beyond the box are zero.
    ZeroExterior,
}

/// Uniform node grid on `[-R, R)^dim` with `x_i = -R + i h`, `h = 2R/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRecord", into = "GridRecord")]
pub struct CartesianGrid {
    dim: usize,
    half_width: f64,
    nodes_per_axis: usize,
    boundary_mode: BoundaryMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridRecord {
    dim: usize,
    half_width: f64,
    nodes_per_axis: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
    boundary_mode: BoundaryMode,
}

impl TryFrom<GridRecord> for CartesianGrid {
    type Error = Error;
    fn try_from(r: GridRecord) -> Result<Self> {
        let grid = CartesianGrid::new(r.dim, r.half_width, r.nodes_per_axis, r.boundary_mode)?;
        if let Some(h) = r.spacing {
            if (h - grid.spacing()).abs() > 1e-12 * grid.spacing() {
                return Err(invalid!("spacing {h} inconsistent with 2R/N = {}", grid.spacing()));
            }
        }
        Ok(grid)
    }
}

impl From<CartesianGrid> for GridRecord {
    fn from(g: CartesianGrid) -> Self {
        GridRecord {
            dim: g.dim,
            half_width: g.half_width,
            nodes_per_axis: g.nodes_per_axis,
            spacing: None,
            boundary_mode: g.boundary_mode,
        }
    }
}

impl CartesianGrid {
    pub fn new(dim: usize, half_width: f64, nodes_per_axis: usize, mode: BoundaryMode) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid!("grid dimension must be 1 or 2, got {dim}"));
        }
        if nodes_per_axis < 4 || nodes_per_axis % 2 != 0 {
            return Err(invalid!("nodes per axis must be even and at least 4, got {nodes_per_axis}"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid!("half width must be positive, got {half_width}"));
        }
        Ok(Self { dim, half_width, nodes_per_axis, boundary_mode: mode })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary_mode
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary_mode == BoundaryMode::Periodic
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.nodes_per_axis as f64
    }

    /// Discrete L² weight `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of nodes, `N^dim`.
    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Per-axis indices of a node; the second entry is 0 in 1D.
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let n = self.nodes_per_axis;
        if self.dim == 1 {
            [node, 0]
        } else {
            [node % n, node / n]
        }
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        ix + iy * self.nodes_per_axis
    }

    /// Coordinates of a node; the second entry is 0 in 1D.
    pub fn point(&self, node: usize) -> [f64; 2] {
        let [ix, iy] = self.multi_index(node);
        let y = if self.dim == 2 { self.axis_coord(iy) } else { 0.0 };
        [self.axis_coord(ix), y]
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Neighbour one step in the positive direction of `axis`, if it is a grid node.
    pub fn forward_neighbor(&self, node: usize, axis: usize) -> Option<usize> {
        let mut idx = self.multi_index(node);
        let n = self.nodes_per_axis;
        if idx[axis] + 1 < n {
            idx[axis] += 1;
        } else if self.is_periodic() {
            idx[axis] = 0;
        } else {
            return None;
        }
        Some(self.node(idx[0], idx[1]))
    }

    /// Node nearest to a point (rounded per axis, wrapped in periodic mode).
    pub fn nearest_node(&self, p: [f64; 2]) -> Option<usize> {
        let h = self.spacing();
        let n = self.nodes_per_axis as i64;
        let mut idx = [0usize; 2];
        for axis in 0..self.dim {
            let mut k = ((p[axis] + self.half_width) / h).round() as i64;
            if self.is_periodic() {
                k = k.rem_euclid(n);
            } else if k < 0 || k >= n {
                return None;
            }
            idx[axis] = k as usize;
        }
        Some(self.node(idx[0], idx[1]))
    }
}

/// One-periodic scalar profile `a(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Profile1d {
    Constant { value: f64 },
    /// `a(y) = mean + sin(2πy)`, elliptic for `mean > 1`.
    Sin1d { mean: f64 },
    /// Piecewise constant with equal-length steps on `[0, 1)`.
    Steps { values: Vec<f64> },
}

impl Profile1d {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile1d::Constant { value } if !(*value > 0.0 && value.is_finite()) => {
                Err(Error::Ellipticity(alloc::format!("constant profile {value} is not positive")))
            }
            Profile1d::Sin1d { mean } if !(*mean > 1.0 && mean.is_finite()) => Err(Error::Ellipticity(
                alloc::format!("sin1d profile needs mean > 1, got {mean}"),
            )),
            Profile1d::Steps { values } if values.is_empty() => Err(invalid!("steps profile has no values")),
            Profile1d::Steps { values } if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) => {
                Err(Error::Ellipticity("steps profile has a non-positive value".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Profile1d::Constant { value } => *value,
            Profile1d::Sin1d { mean } => mean + (2.0 * core::f64::consts::PI * y).sin(),
            Profile1d::Steps { values } => {
                let frac = y - y.floor();
                let k = ((frac * values.len() as f64) as usize).min(values.len() - 1);
                values[k]
            }
        }
    }

    /// Exact `(inf, sup)` of the profile.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Profile1d::Constant { value } => (*value, *value),
            Profile1d::Sin1d { mean } => (mean - 1.0, mean + 1.0),
            Profile1d::Steps { values } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile1d::Steps { values } => {
                (0..=values.len()).map(|k| k as f64 / values.len() as f64).collect()
            }
            _ => alloc::vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }

    /// `∫_0^1 a(y) dy`.
    pub fn arithmetic_mean(&self) -> Result<f64> {
        self.validate()?;
        quad::adaptive_panels(|y| self.eval(y), &self.breakpoints(), 1e-14, 1e-14)
    }

    /// `(∫_0^1 a(y)^{-1} dy)^{-1}`, the one-dimensional H-limit.
    pub fn harmonic_mean(&self) -> Result<f64> {
        self.validate()?;
        let inv = quad::adaptive_panels(|y| 1.0 / self.eval(y), &self.breakpoints(), 1e-14, 1e-14)?;
        Ok(1.0 / inv)
    }

    /// Average of `1/a` over `[y0, y1]`.
    pub fn mean_inverse_over(&self, y0: f64, y1: f64) -> f64 {
        debug_assert!(y1 > y0);
        match self {
            Profile1d::Constant { value } => 1.0 / value,
            Profile1d::Steps { values } => {
                let m = values.len() as f64;
                let mut acc = 0.0;
                let mut lo = y0;
                while lo < y1 {
                    let next = ((lo * m).floor() + 1.0) / m;
                    let hi = next.min(y1);
                    acc += (hi - lo) / self.eval(0.5 * (lo + hi));
                    lo = hi;
                }
                acc / (y1 - y0)
            }
            Profile1d::Sin1d { .. } => {
                let gl = GaussLegendre::new(16);
                let panels = ((y1 - y0) / 0.125).ceil().max(1.0) as usize;
                let w = (y1 - y0) / panels as f64;
                let total: f64 = (0..panels)
                    .map(|k| {
                        let a = y0 + k as f64 * w;
                        gl.integrate(a, a + w, |y| 1.0 / self.eval(y))
                    })
                    .sum();
                total / (y1 - y0)
            }
        }
    }
}

/// Named periodic coefficient family sampled as `A(x/ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    Sin1d { mean: f64 },
    Steps { values: Vec<f64> },
    /// `diag(first(x₁/ε), second(x₁/ε))`: layers varying in `x₁` only.
    Laminate2d { first: Profile1d, second: Profile1d },
}

impl Profile {
    /// The two diagonal entries as functions of `x₁/ε`. Scalar profiles act isotropically.
    pub fn diagonal(&self) -> (Profile1d, Profile1d) {
        let scalar = |p: Profile1d| (p.clone(), p);
        match self {
            Profile::Constant { value } => scalar(Profile1d::Constant { value: *value }),
            Profile::Sin1d { mean } => scalar(Profile1d::Sin1d { mean: *mean }),
            Profile::Steps { values } => scalar(Profile1d::Steps { values: values.clone() }),
            Profile::Laminate2d { first, second } => (first.clone(), second.clone()),
        }
    }

    pub fn is_constant(&self) -> bool {
        let (a, b) = self.diagonal();
        matches!((a, b), (Profile1d::Constant { value: x }, Profile1d::Constant { value: y }) if x == y)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.diagonal();
        a.validate()?;
        b.validate()
    }

    /// Closed-form H-limit on a grid of dimension `dim`: the harmonic mean in
    /// 1D, `diag(harmonic(first), arithmetic(second))` for layered 2D media.
    pub fn h_limit(&self, dim: usize) -> Result<[f64; 2]> {
        match dim {
            1 => {
                if matches!(self, Profile::Laminate2d { .. }) {
                    return Err(Error::Unsupported("laminate profile on a 1D grid".into()));
                }
                let a = h_limit_1d(&self.diagonal().0)?;
                Ok([a, a])
            }
            2 => {
                let (first, second) = self.diagonal();
                h_limit_laminate(&first, &second)
            }
            _ => Err(invalid!("dimension {dim}")),
        }
    }
}

/// One-dimensional H-limit `A_* = (∫_0^1 a^{-1})^{-1}`.
pub fn h_limit_1d(profile: &Profile1d) -> Result<f64> {
    profile.harmonic_mean()
}

/// H-limit of a laminate `diag(a₁(x₁/ε), a₂(x₁/ε))`, returned as the diagonal of `A_*`.
pub fn h_limit_laminate(first: &Profile1d, second: &Profile1d) -> Result<[f64; 2]> {
    Ok([first.harmonic_mean()?, second.arithmetic_mean()?])
}

/// Symmetric 2×2 matrix; in 1D only `xx` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMatrix {
    pub fn diagonal(xx: f64, yy: f64) -> Self {
        Self { xx, xy: 0.0, yy }
    }

    pub fn scalar(a: f64) -> Self {
        Self::diagonal(a, a)
    }

    /// Eigenvalues (ascending) of the leading `dim × dim` block.
    pub fn eigenvalues(&self, dim: usize) -> (f64, f64) {
        if dim == 1 {
            return (self.xx, self.xx);
        }
        let m = 0.5 * (self.xx + self.yy);
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m - d, m + d)
    }
}

/// Node samples of a symmetric coefficient `A(x)` with face conductances for
/// the flux-form stencil and an ellipticity certificate `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: CartesianGrid,
    samples: Vec<SymMatrix>,
    /// `faces[node][axis]`: coefficient on the face between `node` and its forward neighbour.
    faces: Vec<[f64; 2]>,
    ellipticity: f64,
}

impl CoefficientField {
    pub fn constant(grid: &CartesianGrid, value: f64) -> Result<Self> {
        Self::from_samples(grid, alloc::vec![SymMatrix::scalar(value); grid.len()])
    }

    /// Field from raw node samples; face values are harmonic means of the two
    /// adjacent node values.
    pub fn from_samples(grid: &CartesianGrid, samples: Vec<SymMatrix>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: samples.len() });
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for s in &samples {
            let (a, b) = s.eigenvalues(grid.dim());
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::Ellipticity(alloc::format!("sample eigenvalues span [{lo}, {hi}]")));
        }
        let ellipticity = hi.max(1.0 / lo).max(1.0);
        let diag = |s: &SymMatrix, axis: usize| if axis == 0 { s.xx } else { s.yy };
        let faces = (0..grid.len())
            .map(|i| {
                let mut f = [0.0; 2];
                for (axis, fa) in f.iter_mut().enumerate().take(grid.dim()) {
                    let a = diag(&samples[i], axis);
                    *fa = match grid.forward_neighbor(i, axis) {
                        Some(j) => {
                            let b = diag(&samples[j], axis);
                            2.0 * a * b / (a + b)
                        }
                        None => a,
                    };
                }
                f
            })
            .collect();
        let field = Self { grid: grid.clone(), samples, faces, ellipticity };
        field.certify()?;
        Ok(field)
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[SymMatrix] {
        &self.samples
    }

    pub fn face(&self, node: usize, axis: usize) -> f64 {
        self.faces[node][axis]
    }

    /// Ellipticity bound `λ ≥ 1` with `λ^{-1}|ξ|² ≤ ξ·Aξ ≤ λ|ξ|²`.
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn is_diagonal(&self) -> bool {
        self.grid.dim() == 1 || self.samples.iter().all(|s| s.xy == 0.0)
    }

    /// Scans every node sample (and face value) against the certificate.
    pub fn certify(&self) -> Result<()> {
        let lam = self.ellipticity;
        let slack = 1e-12;
        for (i, s) in self.samples.iter().enumerate() {
            let (a, b) = s.eigenvalues(self.grid.dim());
            if a < (1.0 - slack) / lam || b > lam * (1.0 + slack) {
                return Err(Error::Ellipticity(alloc::format!(
                    "node {i}: eigenvalues ({a}, {b}) outside [1/{lam}, {lam}]"
                )));
            }
        }
        for f in &self.faces {
            for &v in f.iter().take(self.grid.dim()) {
                if v < (1.0 - slack) / lam || v > lam * (1.0 + slack) {
                    return Err(Error::Ellipticity(alloc::format!("face value {v} outside certificate")));
                }
            }
        }
        Ok(())
    }
}

/// Samples `A_ε(x) = A(x/ε)` from a one-periodic profile. Faces along `x₁`
/// carry the exact cell harmonic average of the profile; the certificate comes
/// from the profile's exact bounds and is verified on every sample.
pub fn periodic_coefficient(profile: &Profile, epsilon: f64, grid: &CartesianGrid) -> Result<CoefficientField> {
    profile.validate()?;
    if grid.dim() == 1 && matches!(profile, Profile::Laminate2d { .. }) {
        return Err(Error::Unsupported("laminate profile on a 1D grid".into()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid!("epsilon must be positive, got {epsilon}"));
    }
    let (first, second) = profile.diagonal();
    let h = grid.spacing();
    let (lo1, hi1) = first.bounds();
    let (lo2, hi2) = second.bounds();
    let (lo, hi) = if grid.dim() == 1 { (lo1, hi1) } else { (lo1.min(lo2), hi1.max(hi2)) };
    let ellipticity = hi.max(1.0 / lo).max(1.0);

    let samples: Vec<SymMatrix> = grid
        .points()
        .map(|p| {
            let y = p[0] / epsilon;
            SymMatrix::diagonal(first.eval(y), second.eval(y))
        })
        .collect();
    let faces = (0..grid.len())
        .map(|i| {
            let x = grid.point(i)[0];
            let along = 1.0 / first.mean_inverse_over(x / epsilon, (x + h) / epsilon);
            let across = if grid.dim() == 2 { second.eval(x / epsilon) } else { 0.0 };
            [along, across]
        })
        .collect();
    let field = CoefficientField { grid: grid.clone(), samples, faces, ellipticity };
    field.certify()?;
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLabel {
    Interior,
    Exterior,
    Hole,
}

/// The bounded open set `O`: an interval in 1D, an axis-aligned box in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    Box { lo: [f64; 2], hi: [f64; 2] },
}

impl Region {
    pub fn symmetric(dim: usize, half: f64) -> Self {
        if dim == 1 {
            Region::Interval { lo: -half, hi: half }
        } else {
            Region::Box { lo: [-half; 2], hi: [half; 2] }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Interval { .. } => 1,
            Region::Box { .. } => 2,
        }
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Region::Interval { lo, hi } => ([lo, 0.0], [hi, 0.0]),
            Region::Box { lo, hi } => (lo, hi),
        }
    }

    /// Strict containment in the open set.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (lo, hi) = self.bounds();
        (0..self.dim()).all(|a| lo[a] < p[a] && p[a] < hi[a])
    }

    pub fn measure(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (0..self.dim()).map(|a| hi[a] - lo[a]).product()
    }
}

/// Hole radius as a function of the cell size `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RadiusRule {
    /// `a_ε = c ε^α`
    Power { coefficient: f64, exponent: f64 },
    /// `a_ε = exp(-c / ε^β)`
    Exponential { coefficient: f64, exponent: f64 },
}

impl RadiusRule {
    pub fn validate(&self) -> Result<()> {
        let (c, e) = match *self {
            RadiusRule::Power { coefficient, exponent } => (coefficient, exponent),
            RadiusRule::Exponential { coefficient, exponent } => (coefficient, exponent),
        };
        if !(c > 0.0 && c.is_finite() && e > 0.0 && e.is_finite()) {
            return Err(invalid!("radius rule needs positive finite parameters, got {self:?}"));
        }
        Ok(())
    }

    /// `ln a_ε`, exact even when `a_ε` underflows.
    pub fn ln_radius(&self, epsilon: f64) -> f64 {
        match *self {
            RadiusRule::Power { coefficient, exponent } => coefficient.ln() + exponent * epsilon.ln(),
            RadiusRule::Exponential { coefficient, exponent } => -coefficient / epsilon.powf(exponent),
        }
    }

    pub fn radius(&self, epsilon: f64) -> f64 {
        self.ln_radius(epsilon).exp()
    }
}

/// Holes of radius `a_ε` centred at `(k + ½) ε` on each axis (one hole per cell of side `ε`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleFamily {
    pub dim: usize,
    pub epsilon: f64,
    pub radius_rule: RadiusRule,
}

impl HoleFamily {
    pub fn new(dim: usize, epsilon: f64, radius_rule: RadiusRule) -> Result<Self> {
        radius_rule.validate()?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid!("epsilon must be positive, got {epsilon}"));
        }
        let family = Self { dim, epsilon, radius_rule };
        let a = family.radius();
        if !(a > 0.0) || a >= 0.5 * epsilon {
            return Err(invalid!("hole radius {a} does not fit in a cell of size {epsilon}"));
        }
        Ok(family)
    }

    pub fn radius(&self) -> f64 {
        self.radius_rule.radius(self.epsilon)
    }

    /// Lattice centres lying in `region`.
    pub fn centers(&self, region: &Region) -> Vec<[f64; 2]> {
        let (lo, hi) = region.bounds();
        let eps = self.epsilon;
        let axis_centers = |a: usize| -> Vec<f64> {
            let k0 = (lo[a] / eps - 0.5).floor() as i64;
            let k1 = (hi[a] / eps - 0.5).ceil() as i64;
            (k0..=k1)
                .map(|k| (k as f64 + 0.5) * eps)
                .filter(|&c| lo[a] < c && c < hi[a])
                .collect()
        };
        let xs = axis_centers(0);
        if region.dim() == 1 {
            xs.into_iter().map(|x| [x, 0.0]).collect()
        } else {
            let ys = axis_centers(1);
            ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect()
        }
    }
}

/// Labels every grid node as interior to `O`, exterior, or inside a hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMask {
    pub grid: CartesianGrid,
    pub region: Region,
    pub holes: Option<HoleFamily>,
    pub labels: Vec<NodeLabel>,
}

impl DomainMask {
    pub fn label(&self, node: usize) -> NodeLabel {
        self.labels[node]
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        self.nodes_with(|l| l == NodeLabel::Interior)
    }

    /// Exterior and hole nodes, where the Dirichlet datum is imposed.
    pub fn pinned_nodes(&self) -> Vec<usize> {
        self.nodes_with(|l| l != NodeLabel::Interior)
    }

    pub fn hole_nodes(&self) -> Vec<usize> {
        self.nodes_with(|l| l == NodeLabel::Hole)
    }

    fn nodes_with(&self, pred: impl Fn(NodeLabel) -> bool) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| pred(l)).map(|(i, _)| i).collect()
    }

    /// The same region without holes.
    pub fn without_holes(&self) -> DomainMask {
        let labels = self
            .labels
            .iter()
            .map(|&l| if l == NodeLabel::Hole { NodeLabel::Interior } else { l })
            .collect();
        DomainMask { grid: self.grid.clone(), region: self.region, holes: None, labels }
    }
}

/// Builds the mask. Nodes within `a_ε` of a hole centre become holes; holes
/// smaller than half a cell snap to the nearest node.
pub fn mask_domain(grid: &CartesianGrid, region: &Region, holes: Option<&HoleFamily>) -> Result<DomainMask> {
    if region.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: region.dim() });
    }
    let (lo, hi) = region.bounds();
    let r = grid.half_width();
    let h = grid.spacing();
    for a in 0..grid.dim() {
        if !(lo[a] < hi[a]) {
            return Err(invalid!("empty region along axis {a}"));
        }
        if !(-r < lo[a] && hi[a] < r - h) {
            return Err(invalid!(
                "region [{}, {}] touches the truncation box [{}, {}]",
                lo[a],
                hi[a],
                -r,
                r - h
            ));
        }
    }
    let mut labels: Vec<NodeLabel> = grid
        .points()
        .map(|p| if region.contains(p) { NodeLabel::Interior } else { NodeLabel::Exterior })
        .collect();
    if let Some(family) = holes {
        if family.dim != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: family.dim });
        }
        let a = family.radius();
        for c in family.centers(region) {
            if a < 0.5 * h {
                if let Some(k) = grid.nearest_node(c) {
                    if labels[k] == NodeLabel::Interior {
                        labels[k] = NodeLabel::Hole;
                    }
                }
            } else {
                for (k, p) in grid.points().enumerate() {
                    let d2: f64 = (0..grid.dim()).map(|ax| (p[ax] - c[ax]).powi(2)).sum();
                    if d2 <= a * a && labels[k] == NodeLabel::Interior {
                        labels[k] = NodeLabel::Hole;
                    }
                }
            }
        }
    }
    Ok(DomainMask { grid: grid.clone(), region: *region, holes: holes.copied(), labels })
}

/// Discrete `|O \ O_ε|`: the number of hole nodes times `h^dim`.
pub fn hole_measure(mask: &DomainMask) -> f64 {
    mask.hole_nodes().len() as f64 * mask.grid.cell_volume()
}
