//! Executes one [`ExperimentConfig`] and collects its report artifacts and verdicts.

use std::collections::BTreeMap;

use serde::Serialize;

use frachom_core::dirichlet::{galerkin_defect, solve_nonlocal, ExteriorValueProblem, FractionalForm, Route, RESIDUAL_TOLERANCE};
use frachom_core::domain::{mask_domain, periodic_coefficient, CartesianGrid, CoefficientField, DomainMask, HoleFamily, Profile};
use frachom_core::extension::{assemble_extension, dtn_constant, dtn_extract, solve_extension, ExtensionGrid};
use frachom_core::homogenize::{run_sweep, ConvergenceReport};
use frachom_core::kernel::assemble_fraclap_form;
use frachom_core::local_op::{assemble_stiffness, DiscreteOperator};
use frachom_core::perforated::{
    criticality_classify, hypothesis_check, local_comparison_sweep, run_perforated_sweep, strong_convergence_surrogate,
    Classification, CorrectorFamily, PerforatedReport,
};
use frachom_core::sparse::norm;
use frachom_core::spectral::{decompose, SpectralDecomposition};

use crate::checks;
use crate::config::{
    ClassifyExperiment, Command, ExperimentConfig, ExtensionExperiment, PerforatedExperiment, SolveExperiment, ValidateExperiment,
};
use crate::error::RunError;
use crate::export;
use crate::report::{num, sha256_hex, Artifact, Table};

/// Result of a run: files to write, named verdicts, and an optional partial-failure message.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub artifacts: Vec<Artifact>,
    pub verdicts: BTreeMap<String, bool>,
    /// Set when a solver failed part-way; the artifacts then hold the partial report.
    pub failure: Option<String>,
}

impl Outcome {
    fn new(command: Command) -> Self {
        Self { command, artifacts: Vec::new(), verdicts: BTreeMap::new(), failure: None }
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.verdicts.values().all(|&v| v)
    }

    /// 0 when every verdict passes, 1 on a verdict failure, 3 after a solver failure.
    pub fn exit_code(&self) -> u8 {
        if self.failure.is_some() {
            3
        } else if self.passed() {
            0
        } else {
            1
        }
    }

    fn verdict(&mut self, name: &str, value: bool) {
        self.verdicts.insert(name.to_string(), value);
    }

    fn push_verdicts(&mut self) {
        #[derive(Serialize)]
        struct Doc<'a> {
            command: &'static str,
            passed: bool,
            failure: &'a Option<String>,
            verdicts: &'a BTreeMap<String, bool>,
        }
        let doc = Doc { command: self.command.name(), passed: self.passed(), failure: &self.failure, verdicts: &self.verdicts };
        self.artifacts.push(Artifact::json("verdicts.json", &doc));
    }
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    sha256_hex(config.canonical().as_bytes())
}

/// Validates the configuration and runs its command.
pub fn run(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    config.validate()?;
    let cfg = config.effective();
    let mut outcome = match cfg.command {
        Command::Solve => run_solve(cfg.solve.as_ref().expect("validated"))?,
        Command::Sweep => sweep_outcome(run_sweep(cfg.sweep.as_ref().expect("validated"))?)?,
        Command::Perforated => run_perforated(cfg.perforated.as_ref().expect("validated"))?,
        Command::Extension => run_extension(cfg.extension.as_ref().expect("validated"))?,
        Command::Classify => run_classify(cfg.classify.as_ref().expect("validated"))?,
        Command::Validate => run_validate(cfg.validate.as_ref().expect("validated"), cfg.seed)?,
    };
    outcome.push_verdicts();
    Ok(outcome)
}

struct BuiltForm {
    form: FractionalForm,
    op: DiscreteOperator,
    dec: Option<SpectralDecomposition>,
    kernel: Option<frachom_core::kernel::KernelMatrix>,
}

fn coefficient(exp: &SolveExperiment, grid: &CartesianGrid) -> Result<CoefficientField, RunError> {
    Ok(match exp.profile {
        Profile::Constant { value } => CoefficientField::constant(grid, value)?,
        ref p => periodic_coefficient(p, exp.epsilon.expect("validated"), grid)?,
    })
}

fn build_form(exp: &SolveExperiment, route: Route, grid: &CartesianGrid, mask: &DomainMask) -> Result<BuiltForm, RunError> {
    let op = assemble_stiffness(grid, &coefficient(exp, grid)?)?;
    let unit = matches!(exp.profile, Profile::Constant { value } if value == 1.0);
    Ok(match route {
        Route::Spectral => {
            let dec = decompose(&op)?;
            let form = FractionalForm::spectral(&dec, grid, exp.s, unit)?;
            BuiltForm { form, op, dec: Some(dec), kernel: None }
        }
        Route::Kernel => {
            let k = assemble_fraclap_form(grid, exp.s)?;
            let mut form = FractionalForm::kernel(&k);
            if let Profile::Constant { value } = exp.profile {
                if value != 1.0 {
                    form.scale(value.powf(exp.s))?;
                }
            }
            BuiltForm { form, op, dec: None, kernel: Some(k) }
        }
        Route::SpectralDirichlet => {
            let form = FractionalForm::spectral_dirichlet(&op, mask, exp.s)?;
            BuiltForm { form, op, dec: None, kernel: None }
        }
    })
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&d)
    } else {
        norm(&d) / nb
    }
}

fn run_solve(exp: &SolveExperiment) -> Result<Outcome, RunError> {
    let mut out = Outcome::new(Command::Solve);
    let grid = exp.grid()?;
    let holes = exp.holes.as_ref().map(|h| HoleFamily::new(exp.dim, h.epsilon, h.radius_rule)).transpose()?;
    let mask = mask_domain(&grid, &exp.region, holes.as_ref())?;
    let problem = ExteriorValueProblem::new(mask.clone(), exp.source.sample(&grid), exp.exterior.sample(&grid))?;

    let built = build_form(exp, exp.route, &grid, &mask)?;
    let report = solve_nonlocal(&built.form, &problem)?;
    let defect = galerkin_defect(&built.form, &problem, &report.u)?;
    out.verdict("residual", report.norms.residual <= RESIDUAL_TOLERANCE);
    out.artifacts.push(Artifact::json("solve.json", &report));

    let mut columns: Vec<(&str, &[f64])> = vec![("u", &report.u)];
    let compared;
    let mut summary = BTreeMap::new();
    summary.insert("galerkin_defect", defect);
    if let Some(route) = exp.compare_route {
        let other = build_form(exp, route, &grid, &mask)?;
        compared = solve_nonlocal(&other.form, &problem)?;
        let gap = relative_gap(&report.u, &compared.u);
        summary.insert("route_gap", gap);
        out.verdict("route_agreement", gap <= exp.route_tolerance);
        columns.push(("u_compare", &compared.u));
    }
    out.artifacts.push(export::nodal_csv(&grid, &columns, "solution.csv")?);
    out.artifacts.push(Artifact::json("summary.json", &summary));

    if exp.exports.eigenvalues {
        let dec = match built.dec {
            Some(dec) => dec,
            None => decompose(&built.op)?,
        };
        out.artifacts.push(export::eigenvalues_csv(&dec, "eigenvalues.csv")?);
    }
    if exp.exports.kernel_matrix {
        let k = match built.kernel {
            Some(k) => k,
            None => assemble_fraclap_form(&grid, exp.s)?,
        };
        out.artifacts.push(Artifact::new("kernel.bin", export::kernel_binary(&k)));
        out.artifacts.push(export::kernel_csv(&k, "kernel.csv")?);
    }
    if exp.exports.operator_triplets {
        out.artifacts.push(export::operator_triplets(&built.op, "operator.txt"));
    }
    Ok(out)
}

/// One row per ε, then the gap columns; the homogenized row lives in `sweep.json`.
pub fn sweep_table(report: &ConvergenceReport) -> Table {
    let mut header: Vec<String> =
        ["epsilon", "energy", "stability_ratio", "flux_ratio", "residual", "pairing_defect", "energy_gap"].map(String::from).to_vec();
    for prefix in ["weak", "flux", "weak_gap", "flux_gap"] {
        header.extend(report.test_names.iter().map(|n| format!("{prefix}:{n}")));
    }
    let gaps = report.gaps().ok();
    let mut t = Table::new(header);
    for (k, r) in report.rows.iter().enumerate() {
        let gap = |g: Option<&Vec<f64>>| -> Vec<String> {
            match g {
                Some(v) => v.iter().map(|x| num(*x)).collect(),
                None => vec![String::new(); report.test_names.len()],
            }
        };
        let mut row = vec![
            r.epsilon.map(num).unwrap_or_default(),
            num(r.energy),
            num(r.stability_ratio),
            num(r.flux_ratio),
            num(r.residual),
            num(r.pairing_defect),
            gaps.as_ref().map(|g| num(g.energy[k])).unwrap_or_default(),
        ];
        row.extend(r.weak.iter().map(|x| num(*x)));
        row.extend(r.flux.iter().map(|x| num(*x)));
        row.extend(gap(gaps.as_ref().map(|g| &g.weak[k])));
        row.extend(gap(gaps.as_ref().map(|g| &g.flux[k])));
        t.push(row);
    }
    t
}

fn sweep_outcome(report: ConvergenceReport) -> Result<Outcome, RunError> {
    let mut out = Outcome::new(Command::Sweep);
    out.artifacts.push(sweep_table(&report).into_artifact("sweep.csv")?);
    out.artifacts.push(Artifact::json("sweep.json", &report));
    out.failure = report.failure.clone();
    if let Some(v) = report.verdicts {
        out.verdict("weak", v.weak);
        out.verdict("flux", v.flux);
        out.verdict("energy", v.energy);
    }
    Ok(out)
}

pub fn perforated_table(report: &PerforatedReport) -> Table {
    let mut t = Table::new([
        "epsilon",
        "radius",
        "holes",
        "hole_nodes",
        "hole_measure",
        "hole_measure_exact",
        "gap",
        "max_abs",
        "residual",
        "galerkin_defect",
    ]);
    for r in &report.rows {
        t.push(vec![
            num(r.epsilon),
            num(r.radius),
            r.holes.to_string(),
            r.hole_nodes.to_string(),
            num(r.hole_measure),
            num(r.hole_measure_exact),
            num(r.gap),
            num(r.max_abs),
            num(r.residual),
            num(r.galerkin_defect),
        ]);
    }
    t
}

fn run_perforated(exp: &PerforatedExperiment) -> Result<Outcome, RunError> {
    let mut out = Outcome::new(Command::Perforated);
    let frac = run_perforated_sweep(&exp.sweep)?;
    out.artifacts.push(perforated_table(&frac).into_artifact("perforated.csv")?);
    out.artifacts.push(Artifact::json("perforated.json", &frac));
    if let Some(f) = &frac.failure {
        out.failure = Some(f.clone());
    }
    out.verdict("nostrange_fractional", frac.nostrange == Some(true));
    if exp.local_comparison {
        let local = local_comparison_sweep(&exp.sweep)?;
        out.artifacts.push(perforated_table(&local).into_artifact("local.csv")?);
        out.artifacts.push(Artifact::json("local.json", &local));
        if let Some(f) = &local.failure {
            out.failure.get_or_insert_with(|| f.clone());
        }
        out.verdict("nostrange_local_fails", local.nostrange == Some(false) && local.gaps_at_least(exp.local_gap_floor));
    }
    if let Some(sur) = &exp.surrogate {
        let rows = strong_convergence_surrogate(sur.s, &sur.epsilons, sur.half_width, sur.nodes_per_axis, sur.radius)?;
        let mut t = Table::new(["epsilon", "fractional", "gradient"]);
        for r in &rows {
            t.push(vec![num(r.epsilon), num(r.fractional), num(r.gradient)]);
        }
        out.artifacts.push(t.into_artifact("surrogate.csv")?);
        out.verdict("surrogate_fractional_decreasing", rows.windows(2).all(|w| w[1].fractional < w[0].fractional));
        out.verdict("surrogate_gradient_not_decreasing", rows.windows(2).all(|w| w[1].gradient >= w[0].gradient));
    }
    Ok(out)
}

fn run_extension(exp: &ExtensionExperiment) -> Result<Outcome, RunError> {
    let mut out = Outcome::new(Command::Extension);
    let base = exp.base()?;
    let unit = CoefficientField::constant(&base, 1.0)?;
    let dec = decompose(&assemble_stiffness(&base, &unit)?)?;
    let mut trace = vec![0.0; base.len()];
    for &k in &exp.modes {
        for (t, v) in trace.iter_mut().zip(dec.eigenvector(k)) {
            *t += v;
        }
    }
    let grid = ExtensionGrid::new(&base, exp.s, exp.layers, exp.height, exp.grading)?;
    let sol = solve_extension(&assemble_extension(&grid, &unit)?, &trace)?;
    let dtn = dtn_extract(&sol, exp.method)?;
    let spectral = dec.fractional_apply(exp.s, &trace)?;
    let gap = relative_gap(&dtn, &spectral);
    let energy = dec.energy_norm(exp.s, &trace)?.powi(2);
    let energy_gap = (-dtn_constant(exp.s) * sol.energy() / energy - 1.0).abs();

    out.verdict("dtn", gap <= exp.tolerance);
    out.artifacts.push(Artifact::json("extension.json", &export::extension_summary(&sol, exp.method)?));
    out.artifacts.push(export::nodal_csv(&base, &[("trace", &trace), ("dtn", &dtn), ("spectral", &spectral)], "dtn.csv")?);
    let mut summary = BTreeMap::new();
    summary.insert("dtn_gap", gap);
    summary.insert("energy_gap", energy_gap);
    summary.insert("iterations", sol.iterations() as f64);
    out.artifacts.push(Artifact::json("summary.json", &summary));
    out.artifacts.extend(export::extension_slices(&sol, &exp.slices)?);
    Ok(out)
}

/// The one-line classifier record.
#[derive(Debug, Clone, Serialize)]
struct ClassifierLine<'a> {
    n: usize,
    rule: &'a str,
    limit_expression: &'a str,
    verdict: frachom_core::perforated::Criticality,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: &'a Option<String>,
}

fn run_classify(exp: &ClassifyExperiment) -> Result<Outcome, RunError> {
    let mut out = Outcome::new(Command::Classify);
    let results: Vec<Classification> =
        exp.cases.iter().map(|c| criticality_classify(c.n, &c.radius_rule)).collect::<Result<_, _>>()?;
    let lines: Vec<ClassifierLine> = results
        .iter()
        .map(|c| ClassifierLine { n: c.n, rule: &c.rule, limit_expression: &c.limit_expression, verdict: c.verdict, note: &c.note })
        .collect();
    out.artifacts.push(Artifact::json_lines("classify.jsonl", &lines));
    for (k, (case, got)) in exp.cases.iter().zip(&results).enumerate() {
        if let Some(expect) = case.expect {
            out.verdict(&format!("case_{k:02}"), got.verdict == expect);
        }
    }
    if let Some(h) = &exp.hypotheses {
        let family = CorrectorFamily::new(h.dim, h.radius_rule)?;
        let report = hypothesis_check(&family, &h.epsilons)?;
        let mut t = Table::new(["epsilon", "ln_radius", "hole_max", "cell_gradient", "gradient_energy", "l2_defect"]);
        for r in &report.rows {
            t.push(vec![
                num(r.epsilon),
                num(r.ln_radius),
                num(r.hole_max),
                num(r.cell_gradient),
                num(r.gradient_energy),
                num(r.l2_defect),
            ]);
        }
        out.artifacts.push(t.into_artifact("hypotheses.csv")?);
        out.verdict("corrector_endpoints", report.endpoints_exact);
        out.verdict("corrector_gradient_bounded", report.gradient_bounded);
        out.verdict("corrector_l2_decreasing", report.l2_decreasing);
    }
    Ok(out)
}

/// Distances of the kernel closed-form check.
pub const KERNEL_DISTANCES: (f64, f64, usize) = (1e-2, 1e1, 20);

fn run_validate(exp: &ValidateExperiment, seed: u64) -> Result<Outcome, RunError> {
    let mut out = Outcome::new(Command::Validate);
    let grid = CartesianGrid::new(1, exp.half_width, exp.nodes_per_axis, frachom_core::domain::BoundaryMode::Periodic)?;
    let dec = decompose(&assemble_stiffness(&grid, &CoefficientField::constant(&grid, 1.0)?)?)?;
    let vectors = checks::random_vectors(grid.len(), exp.random_vectors, seed);

    let mut calculus = Vec::new();
    let mut quadrature = Vec::new();
    for &s in &exp.s_values {
        let fc = checks::functional_calculus(&dec, s, &vectors)?;
        out.verdict(&format!("functional_calculus_s{s}"), fc.eigen_error <= exp.spectral_tolerance && fc.identity_error <= exp.spectral_tolerance);
        calculus.push(fc);
        if let Some(v) = vectors.first() {
            let b = checks::balakrishnan(&dec, s, v, &exp.balakrishnan_nodes)?;
            out.verdict(&format!("balakrishnan_s{s}"), b.monotone() && b.final_error() <= exp.balakrishnan_tolerance);
            quadrature.push(b);
        }
    }
    let (lo, hi, count) = KERNEL_DISTANCES;
    let kernel = checks::kernel_closed_form(&[1, 2], &exp.s_values, &checks::log_grid(lo, hi, count), exp.kernel_tolerance * 1e-2)?;
    out.verdict("kernel_closed_form", kernel.iter().all(|k| k.rel_error <= exp.kernel_tolerance));
    out.verdict("kernel_bounds", kernel.iter().all(|k| k.within_bounds(exp.kernel_tolerance)));

    #[derive(Serialize)]
    struct Doc<'a> {
        functional_calculus: &'a [checks::FunctionalCalculusCheck],
        balakrishnan: &'a [checks::BalakrishnanCheck],
    }
    out.artifacts.push(Artifact::json("validate.json", &Doc { functional_calculus: &calculus, balakrishnan: &quadrature }));
    let mut t = Table::new(["n", "s", "r", "quadrature", "closed_form", "rel_error", "lower", "upper"]);
    for k in &kernel {
        t.push(vec![
            k.n.to_string(),
            num(k.s),
            num(k.r),
            num(k.quadrature),
            num(k.closed_form),
            num(k.rel_error),
            num(k.lower),
            num(k.upper),
        ]);
    }
    out.artifacts.push(t.into_artifact("kernel_check.csv")?);
    out.artifacts.push(export::eigenvalues_csv(&dec, "eigenvalues.csv")?);
    Ok(out)
}
