//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p frachom --test acceptance -- --nocapture` to see the lines.

use std::f64::consts::PI;
use std::path::PathBuf;

use frachom::checks::{balakrishnan, functional_calculus, kernel_closed_form, log_grid, random_vectors};
use frachom::report::emit_report;
use frachom::runner::{config_hash, run};
use frachom::ExperimentConfig;
use frachom_core::dirichlet::{solve_nonlocal, ExteriorValueProblem, FractionalForm};
use frachom_core::domain::{mask_domain, BoundaryMode, CartesianGrid, CoefficientField, Profile, RadiusRule, Region};
use frachom_core::extension::{assemble_extension, dtn_extract, poisson_kernel, solve_extension, DtnMethod, ExtensionGrid};
use frachom_core::homogenize::{homogenized_coefficient, run_sweep, SweepConfig};
use frachom_core::kernel::assemble_fraclap_form;
use frachom_core::local_op::assemble_stiffness;
use frachom_core::perforated::{
    criticality_classify, hypothesis_check, local_comparison_sweep, run_perforated_sweep, CorrectorFamily, Criticality,
    PerforatedConfig,
};
use frachom_core::sparse::norm;
use frachom_core::spectral::{decompose, SpectralDecomposition};

const ORDERS: [f64; 3] = [0.3, 0.5, 0.7];
const SEED: u64 = 20240601;

// criterion 1
const SPECTRAL_TOL: f64 = 1e-10;
const RANDOM_VECTORS: usize = 20;
// criterion 2
const BALAKRISHNAN_TOL: f64 = 1e-4;
const BALAKRISHNAN_NODES: [usize; 3] = [50, 100, 200];
// criterion 3
const KERNEL_TOL: f64 = 1e-6;
const KERNEL_POINTS: usize = 20;
// criterion 4
const ROUTE_TOL: f64 = 0.03;
const DTN_TOL: f64 = 0.05;
const POISSON_TOL: f64 = 1e-6;
// criterion 5
const A_STAR_TOL: f64 = 1e-10;
const WEAK_TOL: f64 = 2e-2;
const ENERGY_TOL: f64 = 5e-2;
const NEGATIVE_CONTROL: f64 = 2.0;
// criterion 6
const NOSTRANGE_TOL: f64 = 0.05;
const LOCAL_GAP_FLOOR: f64 = 0.5;
const CLEAN_MAX: f64 = 0.5;
/// Slack on the per-cell bound `ε²/8`, standing in for its `1 + o(1)` factor.
const CELL_BOUND_SLACK: f64 = 1e-9;
// criterion 7
const CORRECTOR_EPSILONS: [f64; 5] = [0.25, 0.125, 0.0625, 0.03125, 0.015625];

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id} ({name}): {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

fn unit_periodic(n: usize, r: f64) -> (CartesianGrid, SpectralDecomposition) {
    let grid = CartesianGrid::new(1, r, n, BoundaryMode::Periodic).unwrap();
    let op = assemble_stiffness(&grid, &CoefficientField::constant(&grid, 1.0).unwrap()).unwrap();
    let dec = decompose(&op).unwrap();
    (grid, dec)
}

#[test]
fn criterion_1_functional_calculus_exactness() {
    let (grid, dec) = unit_periodic(512, 4.0);
    let vectors = random_vectors(grid.len(), RANDOM_VECTORS, SEED);
    let mut pass = true;
    let mut detail = String::new();
    for s in ORDERS {
        let c = functional_calculus(&dec, s, &vectors).unwrap();
        pass &= c.eigen_error <= SPECTRAL_TOL && c.identity_error <= SPECTRAL_TOL;
        detail += &format!("[s={s} eigen {:.2e} identity {:.2e}] ", c.eigen_error, c.identity_error);
    }
    verdict(1, "functional calculus", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_2_balakrishnan_agreement() {
    let (grid, dec) = unit_periodic(512, 4.0);
    let v = &random_vectors(grid.len(), 1, SEED)[0];
    let mut pass = true;
    let mut detail = String::new();
    for s in ORDERS {
        let b = balakrishnan(&dec, s, v, &BALAKRISHNAN_NODES).unwrap();
        pass &= b.monotone() && b.final_error() <= BALAKRISHNAN_TOL;
        detail += &format!("[s={s} errors {:.2e} {:.2e} {:.2e}] ", b.errors[0], b.errors[1], b.errors[2]);
    }
    verdict(2, "Balakrishnan route", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_3_kernel_closed_form() {
    let checks = kernel_closed_form(&[1, 2], &ORDERS, &log_grid(1e-2, 1e1, KERNEL_POINTS), KERNEL_TOL * 1e-2).unwrap();
    assert_eq!(checks.len(), 2 * 3 * KERNEL_POINTS);
    let worst = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    let bounded = checks.iter().all(|c| c.within_bounds(KERNEL_TOL));
    let pass = worst <= KERNEL_TOL && bounded;
    verdict(3, "kernel closed form", pass, &format!("max rel error {worst:.2e}, within bounds {bounded}"));
    assert!(pass);
}

#[test]
fn criterion_4_three_route_consistency() {
    let s = 0.5;
    let (grid, dec) = unit_periodic(512, 4.0);
    let mask = mask_domain(&grid, &Region::symmetric(1, 1.0), None).unwrap();
    let problem = ExteriorValueProblem::constant_source(mask, 1.0).unwrap();
    let spectral = solve_nonlocal(&FractionalForm::spectral(&dec, &grid, s, true).unwrap(), &problem).unwrap();
    let kernel = solve_nonlocal(&FractionalForm::kernel(&assemble_fraclap_form(&grid, s).unwrap()), &problem).unwrap();
    let route_gap = relative(&kernel.u, &spectral.u);

    // band-limited traces: the spectral solution projected on its 32 lowest modes, and a sum of modes
    let coeffs = dec.coefficients(&spectral.u).unwrap();
    let projected = dec.apply_phi(|_| 1.0, &{
        let mut v = vec![0.0; grid.len()];
        for (k, c) in coeffs.iter().enumerate().take(32) {
            for (vi, p) in v.iter_mut().zip(dec.eigenvector(k)) {
                *vi += c * p;
            }
        }
        v
    })
    .unwrap();
    let mut modes = vec![0.0; grid.len()];
    for k in 1..=16 {
        for (m, p) in modes.iter_mut().zip(dec.eigenvector(k)) {
            *m += p;
        }
    }
    let unit = CoefficientField::constant(&grid, 1.0).unwrap();
    let ext = assemble_extension(&ExtensionGrid::new(&grid, s, 64, 8.0, 2.0).unwrap(), &unit).unwrap();
    let mut dtn_gap: f64 = 0.0;
    for trace in [&projected, &modes] {
        let sol = solve_extension(&ext, trace).unwrap();
        let dtn = dtn_extract(&sol, DtnMethod::DifferenceQuotient).unwrap();
        dtn_gap = dtn_gap.max(relative(&dtn, &dec.fractional_apply(s, trace).unwrap()));
    }

    let mut poisson_gap: f64 = 0.0;
    for r in [0.0, 0.1, 0.5, 1.0, 3.0] {
        for y in [0.05, 0.5, 1.0, 4.0] {
            let classical = y / (PI * (r * r + y * y));
            poisson_gap = poisson_gap.max((poisson_kernel(r, y, s, 1).unwrap() / classical - 1.0).abs());
        }
    }
    let pass = route_gap <= ROUTE_TOL && dtn_gap <= DTN_TOL && poisson_gap <= POISSON_TOL;
    verdict(
        4,
        "three-route consistency",
        pass,
        &format!("spectral/kernel {route_gap:.2e}, DtN {dtn_gap:.2e}, Poisson {poisson_gap:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_homogenization_sweep() {
    let config = SweepConfig::sin1d_desk(0.5, 1024);
    assert!(matches!(config.profile, Profile::Sin1d { mean } if mean == 2.0));
    assert_eq!(config.epsilons, vec![0.25, 0.125, 0.0625, 0.03125]);
    assert_eq!((config.tolerances.weak, config.tolerances.energy), (WEAK_TOL, ENERGY_TOL));
    let a_star = homogenized_coefficient(&config).unwrap()[0];
    let a_star_ok = (a_star - 3f64.sqrt()).abs() <= A_STAR_TOL;

    let report = run_sweep(&config).unwrap();
    assert!(report.complete, "{:?}", report.failure);
    let v = report.verdicts.unwrap();
    let gaps = report.gaps().unwrap();
    let final_energy = *gaps.energy.last().unwrap();
    let final_weak = gaps.weak.last().unwrap().iter().cloned().fold(0.0, f64::max);

    let mut control = config.clone();
    control.a_star_override = Some(NEGATIVE_CONTROL);
    let control_report = run_sweep(&control).unwrap();
    let control_fails = !control_report.verdicts.unwrap().energy;

    let pass = a_star_ok && v.weak && v.energy && control_fails;
    verdict(
        5,
        "homogenization sweep",
        pass,
        &format!(
            "A_* {a_star:.12}, final weak gap {final_weak:.2e}, final energy gap {final_energy:.2e}, flux {}, control fails ENERGY {control_fails}",
            v.flux
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_perforated_dichotomy() {
    let config = PerforatedConfig::desk(0.4);
    assert_eq!(config.epsilons, vec![0.125, 0.0625, 0.03125]);
    assert_eq!(config.radius_rule, RadiusRule::Power { coefficient: 1.0, exponent: 3.0 });
    assert_eq!(config.tolerance, NOSTRANGE_TOL);
    let frac = run_perforated_sweep(&config).unwrap();
    let local = local_comparison_sweep(&config).unwrap();
    assert!(frac.complete && local.complete);

    let local_fails = local.nostrange == Some(false) && local.gaps_at_least(LOCAL_GAP_FLOOR);
    let cell_bound =
        local.rows.iter().all(|r| r.max_abs <= r.epsilon * r.epsilon / 8.0 * (1.0 + CELL_BOUND_SLACK)) && (local.clean_max - CLEAN_MAX).abs() < 1e-3;
    let frac_passes = frac.nostrange == Some(true);
    let gaps = |r: &frachom_core::perforated::PerforatedReport| r.rows.iter().map(|x| format!("{:.3}", x.gap)).collect::<Vec<_>>().join(" ");
    let pass = frac_passes && local_fails && cell_bound;
    verdict(
        6,
        "perforated dichotomy",
        pass,
        &format!(
            "fractional NOSTRANGE {frac_passes} (gaps {}), local fails NOSTRANGE {local_fails} (gaps {}), cell bound {cell_bound}",
            gaps(&frac),
            gaps(&local)
        ),
    );
    assert!(local_fails && cell_bound, "local half of the dichotomy");
    assert!(frac_passes, "fractional sweep does not pass NOSTRANGE");
}

#[test]
fn criterion_7_corrector_hypotheses() {
    let family = CorrectorFamily::new(2, RadiusRule::Exponential { coefficient: 1.0, exponent: 3.0 }).unwrap();
    let report = hypothesis_check(&family, &CORRECTOR_EPSILONS).unwrap();
    let pass = report.endpoints_exact && report.gradient_bounded && report.l2_decreasing;
    let energies: Vec<String> = report.rows.iter().map(|r| format!("{:.3e}", r.gradient_energy)).collect();
    verdict(7, "corrector hypotheses", pass, &format!("gradient energies {}", energies.join(" ")));
    assert!(pass);
}

#[test]
fn criterion_8_criticality_classifier() {
    let cases = [
        (2, RadiusRule::Exponential { coefficient: 1.0, exponent: 3.0 }, Criticality::Vanishing),
        (2, RadiusRule::Exponential { coefficient: 1.0, exponent: 2.0 }, Criticality::NonVanishing),
        (3, RadiusRule::Power { coefficient: 1.0, exponent: 4.0 }, Criticality::Vanishing),
    ];
    let pass = cases.iter().all(|(n, rule, expect)| criticality_classify(*n, rule).unwrap().verdict == *expect);
    verdict(8, "criticality classifier", pass, "");
    assert!(pass);
}

fn shipped(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn criterion_9_determinism() {
    let mut pass = true;
    let names = ["validate.json", "classify.json", "solve_three_route.json", "extension.json", "sweep_constant.json", "perforated.json"];
    for name in names {
        let config = shipped(name);
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let outcome = run(&config).unwrap();
            emit_report(&outcome.artifacts, d.path(), &config_hash(&config)).unwrap();
        }
        let list = |d: &tempfile::TempDir| {
            let mut v: Vec<_> = std::fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
            v.sort();
            v
        };
        let (a, b) = (list(&dirs[0]), list(&dirs[1]));
        let same = a == b && a.iter().all(|f| std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap());
        if !same {
            println!("non-deterministic reports for {name}");
        }
        pass &= same;
    }
    verdict(9, "determinism", pass, &format!("{} configs rerun", names.len()));
    assert!(pass);
}
