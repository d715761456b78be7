//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `--nocapture` to see them on success). Tolerances are
//! pinned here, not calibrated elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::sync::Arc;

use wwlab_core::dno::DnoConfig;
use wwlab_core::field::Field;
use wwlab_core::grid::PeriodicGrid;
use wwlab_core::hamiltonians::{
    eval, gradient, homological_residual, normal_form_defect, structure_defect, Functional,
    FunctionalKind,
};
use wwlab_core::models::ModelState;
use wwlab_core::params::Params;
use wwlab_core::spectral::{anti_derivative, derivative, fmu_symbol, norm_hs};
use wwlab_harness::config::ExperimentConfig;
use wwlab_harness::experiments;
use wwlab_harness::report::fit_loglog_1d;

const N: usize = 256;
const DOMAIN: f64 = 40.0 * std::f64::consts::PI;

fn grid() -> Arc<PeriodicGrid> {
    PeriodicGrid::new(N, DOMAIN).unwrap()
}

fn check(criterion: &str, pass: bool, detail: &str) {
    println!("{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion}: {detail}");
}

fn band(grid: &Arc<PeriodicGrid>, seed: u64, k_max: usize, amp: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::random_band_limited(grid.clone(), &mut rng, k_max, amp).unwrap()
}

fn load_config(name: &str) -> ExperimentConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn criterion_01_symbol_suite() {
    let grid = grid();
    let mut worst_v = f64::MIN;
    let mut worst_d = f64::MIN;
    for &mu in &[0.01, 0.1, 1.0] {
        for &xi in grid.frequencies() {
            worst_v = worst_v.max((fmu_symbol(xi, mu) - 1.0).abs() - 0.17 * mu * xi * xi);
            let d = 1e-6;
            let fp = (fmu_symbol(xi + d, mu) - fmu_symbol(xi - d, mu)) / (2.0 * d);
            worst_d = worst_d.max(fp.abs() - 0.5 * mu * xi.abs());
        }
    }
    check(
        "criterion 1 (symbol bounds |F-1| <= 0.17 mu xi^2, |F'| <= 0.5 mu |xi|)",
        worst_v <= 0.0 && worst_d <= 0.0,
        &format!("margins {worst_v:.3e} / {worst_d:.3e} over mu in {{0.01, 0.1, 1}}"),
    );
}

#[test]
fn criterion_02_operator_algebra() {
    let grid = grid();
    let mut worst_skew = 0.0_f64;
    let mut worst_round = 0.0_f64;
    for i in 0..50u64 {
        let f = band(&grid, 900 + 2 * i, N / 10, 1.0);
        let g = band(&grid, 901 + 2 * i, N / 10, 1.0);
        let skew = (anti_derivative(&f).unwrap().inner(&g).unwrap()
            + f.inner(&anti_derivative(&g).unwrap()).unwrap())
        .abs()
            / (1.0 + f.norm_l2() * g.norm_l2());
        worst_skew = worst_skew.max(skew);
        for h in [&f, &g] {
            let round = derivative(&anti_derivative(h).unwrap()).unwrap().sub(h).unwrap().norm_inf()
                / (1.0 + h.norm_inf());
            worst_round = worst_round.max(round);
        }
    }
    check(
        "criterion 2 (antiderivative skew-adjoint 1e-12, dx o D^{-1} = id 1e-10, 100 fields)",
        worst_skew <= 1e-12 && worst_round <= 1e-10,
        &format!("skew {worst_skew:.3e}, round-trip {worst_round:.3e}"),
    );
}

#[test]
fn criterion_03_gradient_suite() {
    let grid = grid();
    let p = Params::new(0.1, 0.05).unwrap();
    let dno = DnoConfig::exact_products(2);
    let kb = N / 10;
    let kinds = [
        FunctionalKind::HWw,
        FunctionalKind::H0EpsH1,
        FunctionalKind::HBw,
        FunctionalKind::HWh,
        FunctionalKind::LQuad,
        FunctionalKind::ZCubic,
        FunctionalKind::WCoupling,
        FunctionalKind::GAux,
    ];
    let mut worst = 0.0_f64;
    let mut worst_kind = String::new();
    for (i, kind) in kinds.iter().enumerate() {
        let f = Functional::with_dno(*kind, p, dno);
        let a = band(&grid, 40 + 2 * i as u64, kb, 0.4);
        let b = band(&grid, 41 + 2 * i as u64, kb, 0.4);
        let state = match kind {
            FunctionalKind::HWw | FunctionalKind::H0EpsH1 => {
                ModelState::SurfacePotential { zeta: a, psi: b }
            }
            _ => ModelState::Diagonal { a, b },
        };
        let grad = gradient(&f, &state).unwrap();
        let gscale: f64 = grad
            .components()
            .iter()
            .map(|c| norm_hs(c, 0.0).unwrap().powi(2))
            .sum::<f64>()
            .sqrt();
        for d in 0..20u64 {
            let da = band(&grid, 7000 + 100 * i as u64 + 2 * d, kb, 1.0);
            let db = band(&grid, 7001 + 100 * i as u64 + 2 * d, kb, 1.0);
            let dir = state.same_chart_pair(da, db);
            let h = 1e-5;
            let fd = (eval(&f, &state.add_scaled(h, &dir).unwrap()).unwrap()
                - eval(&f, &state.add_scaled(-h, &dir).unwrap()).unwrap())
                / (2.0 * h);
            let an: f64 = grad
                .components()
                .iter()
                .zip(dir.components())
                .map(|(gc, dc)| gc.inner(dc).unwrap())
                .sum();
            let dscale: f64 = dir
                .components()
                .iter()
                .map(|c| norm_hs(c, 0.0).unwrap().powi(2))
                .sum::<f64>()
                .sqrt();
            let rel = (fd - an).abs() / (gscale * dscale).max(1e-300);
            if rel > worst {
                worst = rel;
                worst_kind = format!("{kind:?}");
            }
        }
    }
    check(
        "criterion 3 (all functionals pass central-FD gradient checks at 1e-6, 20 directions)",
        worst <= 1e-6,
        &format!("worst relative gap {worst:.3e} ({worst_kind})"),
    );
}

#[test]
fn criterion_04_homological_identity() {
    let grid = grid();
    let p = Params::new(0.1, 0.2).unwrap();
    let mut worst = 0.0_f64;
    for i in 0..50u64 {
        let r = band(&grid, 100 + 2 * i, N / 10, 0.8);
        let s = band(&grid, 101 + 2 * i, N / 10, 0.8);
        let rep = homological_residual(&r, &s, &p).unwrap();
        let scale = 1.0 + r.norm_l2().powi(3) + s.norm_l2().powi(3);
        worst = worst.max(rep.residual / scale);
    }
    check(
        "criterion 4 (|{L,G}_simp + W| <= 1e-10 scaled, 50 mean-zero pairs)",
        worst <= 1e-10,
        &format!("worst scaled residual {worst:.3e}"),
    );
}

#[test]
fn criterion_05_normal_form_defect() {
    let grid = grid();
    let r = band(&grid, 300, N / 10, 0.25);
    let s = band(&grid, 301, N / 10, 0.25);
    let scaled: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&e| normal_form_defect(&r, &s, &Params::new(0.3, e).unwrap()).unwrap() / (e * e))
        .collect();
    let max = scaled.iter().copied().fold(f64::MIN, f64::max);
    let min = scaled.iter().copied().fold(f64::MAX, f64::min);
    let spread = (max - min) / min;
    check(
        "criterion 5 (|H_BW o T_B - H_Wh| / eps^2 invariant within 5% over eps {0.2,0.1,0.05})",
        spread <= 0.05,
        &format!("spread {:.3}% (values {scaled:?})", spread * 100.0),
    );
}

#[test]
fn criterion_06_structure_preservation() {
    let grid = grid();
    let r = band(&grid, 400, N / 10, 0.3);
    let s = band(&grid, 401, N / 10, 0.3);
    let mut pts = Vec::new();
    for &e in &[0.2_f64, 0.1, 0.05] {
        let p = Params::new(e, e).unwrap();
        let mut sum_sq = 0.0;
        for i in 0..10u64 {
            let a = band(&grid, 500 + 2 * i, N / 10, 1.0);
            let b = band(&grid, 501 + 2 * i, N / 10, 1.0);
            let d = structure_defect(&r, &s, (&a, &b), &p).unwrap();
            sum_sq += d * d;
        }
        pts.push((e, (sum_sq / 10.0).sqrt()));
    }
    let (order, half) = fit_loglog_1d(&pts).unwrap();
    check(
        "criterion 6 (structure defect fitted total order >= 1.8 along mu=eps, 10 test pairs)",
        order >= 1.8,
        &format!("fitted order {order:.3} +/- {half:.3}"),
    );
}

#[test]
fn criterion_07_diagonalization_consistency() {
    let cfg = load_config("consistency_diag.toml");
    let report = experiments::run(&cfg, 1, 0).unwrap();
    let fit = &report.fitted_slopes["diag_residual_max"];
    let (a, b) = (fit.slope_mu.unwrap(), fit.slope_eps.unwrap());
    let floor_ok = report
        .verdicts
        .get("diag_residual_max_degenerate_rows_at_floor")
        .map(|v| v.pass)
        .unwrap_or(true);
    check(
        "criterion 7 (diagonalized-system residual slopes in [0.8, 1.2], 3x3 grid, t_end = 10)",
        (0.8..=1.2).contains(&a) && (0.8..=1.2).contains(&b) && floor_ok,
        &format!("slope_mu = {a:.3}, slope_eps = {b:.3}, degenerate rows at floor: {floor_ok}"),
    );
}

#[test]
fn criterion_08_one_sided_approximation() {
    let cfg = load_config("corollary_onesided.toml");
    let report = experiments::run(&cfg, 1, 0).unwrap();
    let fit = &report.fitted_slopes["onesided_growth_rate"];
    let (a, b) = (fit.slope_mu.unwrap(), fit.slope_eps.unwrap());
    let mirror = report.verdicts["onesided_mirror_symmetry"].pass;
    check(
        "criterion 8 (one-sided error growth-rate slopes in [0.75, 1.25], diagonal reference)",
        (0.75..=1.25).contains(&a) && (0.75..=1.25).contains(&b) && mirror,
        &format!("slope_mu = {a:.3}, slope_eps = {b:.3}, mirror symmetry: {mirror}"),
    );
}

#[test]
fn criterion_09_full_pipeline() {
    let cfg = load_config("theorem_pipeline.toml");
    let report = experiments::run(&cfg, 1, 0).unwrap();
    let ratio = &report.verdicts["pipeline_initial_mismatch_ratio"];
    let order = &report.verdicts["pipeline_defect_total_order"];
    check(
        "criterion 9 (t=0 mismatch ratio 4 +/- 0.5 under eps halving; defect total order >= 1.7)",
        ratio.pass && order.pass,
        &format!("{} | {}", ratio.witness, order.witness),
    );
}

#[test]
fn criterion_10_conservation_integrator_suite() {
    let cfg = load_config("suites.toml");
    let mut report =
        wwlab_harness::report::ScalingReport::new(experiments::provenance(&cfg, 1));
    wwlab_harness::suites::dispersion_suite(&cfg, 1, &mut report).unwrap();
    let failed: Vec<String> = report
        .verdicts
        .iter()
        .filter(|(name, v)| {
            !v.pass
                && (name.starts_with("mean_conservation")
                    || name.starts_with("linear_phase")
                    || name.as_str() == "hamiltonian_drift_order"
                    || name.as_str() == "rk4_fourth_order"
                    || name.as_str() == "ifrk4_linear_exact")
        })
        .map(|(name, v)| format!("{name}: {}", v.witness))
        .collect();
    check(
        "criterion 10 (mean conservation 1e-10; drift Richardson 16 +/- 3; phase speeds 1e-8)",
        failed.is_empty(),
        &if failed.is_empty() {
            format!("{} checks green", report.verdicts.len())
        } else {
            failed.join(" | ")
        },
    );
}

#[test]
fn criterion_11_determinism() {
    let cfg = load_config("suites.toml");
    let a = experiments::run_all_suites(&cfg, 7, 0).unwrap().to_csv();
    let b = experiments::run_all_suites(&cfg, 7, 0).unwrap().to_csv();
    check(
        "criterion 11 (two `suites` runs with identical config and seed are byte-identical)",
        a == b,
        &format!("{} bytes of CSV compared", a.len()),
    );
}
