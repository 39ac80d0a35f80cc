//! The experiment configuration document.
//!
//! Every module parameter is a field here; the only defaults are the ones
//! marked `#[serde(default)]`, all listed in `docs/CONFIG.md`.

use serde::{Deserialize, Serialize};

use frachom_core::dirichlet::Route;
use frachom_core::domain::{BoundaryMode, CartesianGrid, Profile, RadiusRule, Region};
use frachom_core::extension::{DtnMethod, ExtensionGrid};
use frachom_core::homogenize::{Exterior, Source, SweepConfig};
use frachom_core::perforated::{Criticality, PerforatedConfig};

use crate::error::RunError;

/// Admissible range of every tolerance.
pub const TOLERANCE_RANGE: (f64, f64) = (1e-12, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Sweep,
    Perforated,
    Extension,
    Classify,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Perforated => "perforated",
            Command::Extension => "extension",
            Command::Classify => "classify",
            Command::Validate => "validate",
        }
    }
}

/// Overrides applied on top of the per-experiment tolerances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend_slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nostrange: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<f64>,
}

impl ToleranceOverrides {
    fn entries(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("weak", self.weak),
            ("flux", self.flux),
            ("energy", self.energy),
            ("trend_slack", self.trend_slack),
            ("nostrange", self.nostrange),
            ("dtn", self.dtn),
            ("route", self.route),
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.entries().iter().all(|(_, v)| v.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    pub epsilon: f64,
    pub radius_rule: RadiusRule,
}

/// Optional file exports of a single solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exports {
    #[serde(default)]
    pub eigenvalues: bool,
    /// Dense binary and CSV copies of the kernel form (kernel route only).
    #[serde(default)]
    pub kernel_matrix: bool,
    #[serde(default)]
    pub operator_triplets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveExperiment {
    pub s: f64,
    pub route: Route,
    pub dim: usize,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    pub boundary_mode: BoundaryMode,
    pub region: Region,
    pub profile: Profile,
    /// Period of the coefficient; required for non-constant profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub source: Source,
    pub exterior: Exterior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holes: Option<HoleSpec>,
    /// Second route solved on the same data for a relative ℓ² comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_route: Option<Route>,
    pub route_tolerance: f64,
    #[serde(default)]
    pub exports: Exports,
}

impl SolveExperiment {
    pub fn grid(&self) -> Result<CartesianGrid, RunError> {
        Ok(CartesianGrid::new(self.dim, self.half_width, self.nodes_per_axis, self.boundary_mode)?)
    }

    fn validate(&self) -> Result<(), RunError> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(RunError::Schema(format!("solve: s = {} outside (0,1)", self.s)));
        }
        self.grid()?;
        self.profile.validate()?;
        if self.region.dim() != self.dim {
            return Err(RunError::Schema("solve: region dimension differs from the grid".into()));
        }
        if !self.profile.is_constant() && !self.epsilon.is_some_and(|e| e > 0.0) {
            return Err(RunError::Schema("solve: non-constant profiles need a positive epsilon".into()));
        }
        for route in std::iter::once(self.route).chain(self.compare_route) {
            if route == Route::Kernel && !self.profile.is_constant() {
                return Err(RunError::Schema("solve: the kernel route needs a constant profile".into()));
            }
        }
        if let Some(h) = &self.holes {
            h.radius_rule.validate()?;
            if !(h.epsilon > 0.0) {
                return Err(RunError::Schema("solve: hole spacing must be positive".into()));
            }
        }
        check_tolerance("solve.route_tolerance", self.route_tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub s: f64,
    pub epsilons: Vec<f64>,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    /// Radius of the bump `φ` centred at the origin.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerforatedExperiment {
    pub sweep: PerforatedConfig,
    /// Also run the `s = 1` sweep on the identical masks.
    pub local_comparison: bool,
    /// Lower bound every local gap must respect for the local sweep to count as failing NOSTRANGE.
    pub local_gap_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionExperiment {
    pub s: f64,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    pub boundary_mode: BoundaryMode,
    pub layers: usize,
    pub height: f64,
    pub grading: f64,
    pub method: DtnMethod,
    /// Eigenvector indices of the `A = I` base operator summed into the trace.
    pub modes: Vec<usize>,
    pub tolerance: f64,
    /// Heights at which `U(·, y)` is exported.
    pub slices: Vec<f64>,
}

impl ExtensionExperiment {
    pub fn base(&self) -> Result<CartesianGrid, RunError> {
        Ok(CartesianGrid::new(1, self.half_width, self.nodes_per_axis, self.boundary_mode)?)
    }

    fn validate(&self) -> Result<(), RunError> {
        let base = self.base()?;
        ExtensionGrid::new(&base, self.s, self.layers, self.height, self.grading)?;
        if self.modes.is_empty() || self.modes.iter().any(|&k| k >= base.len()) {
            return Err(RunError::Schema("extension: modes must be non-empty eigenvector indices".into()));
        }
        if self.slices.iter().any(|&y| !(0.0..=self.height).contains(&y)) {
            return Err(RunError::Schema("extension: slice heights must lie in [0, height]".into()));
        }
        check_tolerance("extension.tolerance", self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyCase {
    pub n: usize,
    pub radius_rule: RadiusRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Criticality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub dim: usize,
    pub radius_rule: RadiusRule,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyExperiment {
    pub cases: Vec<ClassifyCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisSpec>,
}

/// Self-checks of the functional calculus, the Balakrishnan route and the kernel closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateExperiment {
    pub nodes_per_axis: usize,
    pub half_width: f64,
    pub s_values: Vec<f64>,
    /// Number of seeded random vectors for the energy identity.
    pub random_vectors: usize,
    pub spectral_tolerance: f64,
    pub balakrishnan_tolerance: f64,
    pub balakrishnan_nodes: Vec<usize>,
    pub kernel_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Seed of the random test vectors; nothing else in the pipeline is random.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "ToleranceOverrides::is_empty")]
    pub tolerances: ToleranceOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perforated: Option<PerforatedExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<ExtensionExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateExperiment>,
}

fn check_tolerance(name: &str, v: f64) -> Result<(), RunError> {
    let (lo, hi) = TOLERANCE_RANGE;
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(RunError::Schema(format!("{name} = {v} outside [{lo:e}, {hi}]")))
    }
}

fn missing(command: Command) -> RunError {
    RunError::Schema(format!("command `{}` needs a `{}` section", command.name(), command.name()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Canonical compact form hashed into the manifest.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Schema and range checks, with the tolerance overrides applied.
    pub fn validate(&self) -> Result<(), RunError> {
        for (name, v) in self.tolerances.entries() {
            if let Some(v) = v {
                check_tolerance(&format!("tolerances.{name}"), v)?;
            }
        }
        let cfg = self.effective();
        match cfg.command {
            Command::Solve => cfg.solve.as_ref().ok_or_else(|| missing(cfg.command))?.validate(),
            Command::Sweep => {
                let sweep = cfg.sweep.as_ref().ok_or_else(|| missing(cfg.command))?;
                sweep.validate()?;
                Ok(())
            }
            Command::Perforated => {
                let p = cfg.perforated.as_ref().ok_or_else(|| missing(cfg.command))?;
                p.sweep.validate()?;
                check_tolerance("perforated.local_gap_floor", p.local_gap_floor)?;
                if let Some(sur) = &p.surrogate {
                    if !(sur.s > 0.0 && sur.s < 1.0) || sur.epsilons.is_empty() || !(sur.radius > 0.0 && sur.radius < sur.half_width) {
                        return Err(RunError::Schema("perforated.surrogate: bad parameters".into()));
                    }
                    CartesianGrid::new(1, sur.half_width, sur.nodes_per_axis, BoundaryMode::ZeroExterior)?;
                }
                Ok(())
            }
            Command::Extension => cfg.extension.as_ref().ok_or_else(|| missing(cfg.command))?.validate(),
            Command::Classify => {
                let c = cfg.classify.as_ref().ok_or_else(|| missing(cfg.command))?;
                if c.cases.is_empty() && c.hypotheses.is_none() {
                    return Err(RunError::Schema("classify: nothing to do".into()));
                }
                for case in &c.cases {
                    case.radius_rule.validate()?;
                }
                Ok(())
            }
            Command::Validate => {
                let v = cfg.validate.as_ref().ok_or_else(|| missing(cfg.command))?;
                CartesianGrid::new(1, v.half_width, v.nodes_per_axis, BoundaryMode::Periodic)?;
                if v.s_values.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
                    return Err(RunError::Schema("validate: s_values must lie in (0,1)".into()));
                }
                if v.balakrishnan_nodes.is_empty() || v.balakrishnan_nodes.iter().any(|&m| m < 2) {
                    return Err(RunError::Schema("validate: balakrishnan_nodes must be at least 2".into()));
                }
                check_tolerance("validate.spectral_tolerance", v.spectral_tolerance)?;
                check_tolerance("validate.balakrishnan_tolerance", v.balakrishnan_tolerance)?;
                check_tolerance("validate.kernel_tolerance", v.kernel_tolerance)
            }
        }
    }

    /// The configuration with every tolerance override written into its experiment section.
    pub fn effective(&self) -> Self {
        let mut cfg = self.clone();
        let t = &self.tolerances;
        if let Some(sweep) = cfg.sweep.as_mut() {
            let tol = &mut sweep.tolerances;
            tol.weak = t.weak.unwrap_or(tol.weak);
            tol.flux = t.flux.unwrap_or(tol.flux);
            tol.energy = t.energy.unwrap_or(tol.energy);
            tol.trend_slack = t.trend_slack.unwrap_or(tol.trend_slack);
        }
        if let Some(p) = cfg.perforated.as_mut() {
            p.sweep.tolerance = t.nostrange.unwrap_or(p.sweep.tolerance);
            p.sweep.trend_slack = t.trend_slack.unwrap_or(p.sweep.trend_slack);
        }
        if let Some(e) = cfg.extension.as_mut() {
            e.tolerance = t.dtn.unwrap_or(e.tolerance);
        }
        if let Some(s) = cfg.solve.as_mut() {
            s.route_tolerance = t.route.unwrap_or(s.route_tolerance);
        }
        cfg
    }
}
