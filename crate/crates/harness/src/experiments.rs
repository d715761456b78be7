//! The measurement campaigns: consistency of the diagonalized system,
//! consistency of the one-sided Whitham equation, the one-sided
//! approximation error growth, and the full normal-form pipeline, plus the
//! generic model-run entry point used by `simulate`.

use std::sync::Arc;

use anyhow::{anyhow, bail};
use rayon::prelude::*;

use wwlab_core::dno::DnoConfig;
use wwlab_core::field::Field;
use wwlab_core::grid::PeriodicGrid;
use wwlab_core::hamiltonians::{self, Functional, FunctionalKind};
use wwlab_core::models::{evolve, rhs, ModelKind, ModelState, Scheme};
use wwlab_core::params::Params;
use wwlab_core::spectral::{apply_multiplier, derivative, norm_hs, norm_hs_dot, MultiplierSymbol};
use wwlab_core::transforms;
use wwlab_core::Result as CoreResult;

use crate::config::{ExperimentConfig, ExperimentKind, ReferenceTier};
use crate::report::{
    fit_linear_in_t, fit_loglog_1d, fit_loglog_mu_eps, run_id, Provenance, ScalingReport,
};
use crate::suites;

pub const CODE_VERSION: &str = concat!("wwlab ", env!("CARGO_PKG_VERSION"));

pub fn provenance(cfg: &ExperimentConfig, seed: u64) -> Provenance {
    let material = format!("{}\nseed={seed}\n{}", cfg.echo(), CODE_VERSION);
    Provenance {
        experiment: cfg.experiment.name().to_string(),
        grid_n_points: cfg.grid.n_points,
        grid_length: cfg.grid.length,
        stepper: format!(
            "dt={} scheme={:?} t_end={:?} cfl_guard={}",
            cfg.stepper.dt, cfg.stepper.scheme, cfg.stepper.t_end, cfg.stepper.cfl_guard
        ),
        seed,
        code_version: CODE_VERSION.to_string(),
        run_id: run_id(&material),
    }
}

/// Run the configured experiment on `workers` threads (0 = rayon default).
pub fn run(cfg: &ExperimentConfig, seed: u64, workers: usize) -> anyhow::Result<ScalingReport> {
    cfg.validate()?;
    let body = || match cfg.experiment {
        ExperimentKind::ConsistencyDiag => run_consistency_diag(cfg, seed),
        ExperimentKind::ConsistencyWhitham => run_consistency_whitham(cfg, seed),
        ExperimentKind::CorollaryOnesided => run_corollary_onesided(cfg, seed),
        ExperimentKind::TheoremPipeline => run_theorem_pipeline(cfg, seed),
        ExperimentKind::HamiltonianSuite
        | ExperimentKind::TransformSuite
        | ExperimentKind::DispersionSuite => run_suites(cfg, seed),
    };
    let mut report = if workers == 0 {
        body()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| anyhow!("thread pool: {e}"))?
            .install(body)?
    };
    report.sort_rows();
    Ok(report)
}

/// sqrt(|zeta_diff|_{H^0}^2 + |psi_diff|_{H^1-dot}^2): the H^0 x H^1-dot
/// distance used throughout (the psi gauge constant is invisible).
fn pair_error(zeta_a: &Field, psi_a: &Field, zeta_b: &Field, psi_b: &Field) -> CoreResult<f64> {
    let dz = norm_hs(&zeta_a.sub(zeta_b)?, 0.0)?;
    let dp = norm_hs_dot(&psi_a.sub(psi_b)?, 0.0)?;
    Ok((dz * dz + dp * dp).sqrt())
}

fn h0_pair(a: &Field, b: &Field) -> CoreResult<f64> {
    let na = norm_hs(a, 0.0)?;
    let nb = norm_hs(b, 0.0)?;
    Ok((na * na + nb * nb).sqrt())
}

/// Surface-chart initial data: a bump in zeta and a second, wider and
/// shifted bump in psi so both characteristics are populated.
fn surface_initial_data(cfg: &ExperimentConfig, grid: &Arc<PeriodicGrid>) -> (Field, Field) {
    let zeta = cfg.profile(grid, 1.0, 0.0);
    let psi_shift = 0.6 * cfg.initial_data.width / grid.length();
    let psi = cfg.profile_scaled(grid, 0.75, 4.0 / 3.0, psi_shift);
    (zeta, psi)
}

struct PairOutcome {
    mu: f64,
    eps: f64,
    rows: Vec<(f64, String, f64)>,
    /// per-pair scalars used by the slope fits, keyed by metric
    summaries: Vec<(String, f64)>,
    error: Option<String>,
}

fn sweep<F>(cfg: &ExperimentConfig, body: F) -> Vec<PairOutcome>
where
    F: Fn(f64, f64) -> anyhow::Result<(Vec<(f64, String, f64)>, Vec<(String, f64)>)> + Sync,
{
    cfg.params_grid
        .par_iter()
        .map(|&[mu, eps]| match body(mu, eps) {
            Ok((rows, summaries)) => PairOutcome { mu, eps, rows, summaries, error: None },
            Err(e) => PairOutcome {
                mu,
                eps,
                rows: Vec::new(),
                summaries: Vec::new(),
                error: Some(format!("{e:#}")),
            },
        })
        .collect()
}

fn absorb(report: &mut ScalingReport, outcomes: &[PairOutcome]) {
    for o in outcomes {
        for (t, metric, value) in &o.rows {
            report.push_row(o.mu, o.eps, *t, metric, *value);
        }
        if let Some(err) = &o.error {
            report.set_verdict(
                &format!("row_completed:mu={},eps={}", o.mu, o.eps),
                false,
                err.clone(),
            );
        }
    }
}

fn summary_points(outcomes: &[PairOutcome], metric: &str) -> Vec<(f64, f64, f64)> {
    outcomes
        .iter()
        .filter_map(|o| {
            o.summaries
                .iter()
                .find(|(m, _)| m == metric)
                .map(|(_, v)| (o.mu, o.eps, *v))
        })
        .collect()
}

fn slope_verdict(
    report: &mut ScalingReport,
    metric: &str,
    points: &[(f64, f64, f64)],
    lo: f64,
    hi: f64,
) {
    let fit = fit_loglog_mu_eps(points);
    let (smu, seps) = (fit.slope_mu, fit.slope_eps);
    report.fitted_slopes.insert(metric.to_string(), fit);
    match (smu, seps) {
        (Some(a), Some(b)) => {
            let pass = (lo..=hi).contains(&a) && (lo..=hi).contains(&b);
            report.set_verdict(
                &format!("{metric}_slopes"),
                pass,
                format!("slope_mu={a:.3} slope_eps={b:.3} target [{lo},{hi}]"),
            );
        }
        _ => {
            report.set_verdict(
                &format!("{metric}_slopes"),
                false,
                "slope fit unavailable (see fitted_slopes note)".to_string(),
            );
        }
    }
}

fn floor_verdict(report: &mut ScalingReport, outcomes: &[PairOutcome], metric: &str, floor: f64) {
    let zero_rows: Vec<_> = outcomes
        .iter()
        .filter(|o| o.mu == 0.0 || o.eps == 0.0)
        .filter_map(|o| {
            o.summaries
                .iter()
                .find(|(m, _)| m == metric)
                .map(|(_, v)| (o.mu, o.eps, *v))
        })
        .collect();
    if zero_rows.is_empty() {
        return;
    }
    let worst = zero_rows.iter().map(|p| p.2).fold(0.0_f64, f64::max);
    report.set_verdict(
        &format!("{metric}_degenerate_rows_at_floor"),
        worst <= floor,
        format!("max over mu=0/eps=0 rows: {worst:.3e} (floor {floor:.1e})"),
    );
}

// ---------------------------------------------------------------- diag

fn run_consistency_diag(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<ScalingReport> {
    let mut report = ScalingReport::new(provenance(cfg, seed));
    let grid = cfg.make_grid()?;
    let dno = cfg.dno_config();

    let outcomes = sweep(cfg, |mu, eps| {
        let p = cfg.make_params(mu, eps)?;
        let (zeta0, psi0) = surface_initial_data(cfg, &grid);
        let v0 = apply_multiplier(&MultiplierSymbol::Fmu2, &derivative(&psi0)?, &p)?;
        let t_end = cfg.horizon(mu, eps);
        let stepper = cfg.stepper_for(Scheme::Rk4, t_end);
        let state0 = ModelState::SurfaceVelocity { zeta: zeta0, v: v0 };
        let traj = evolve(
            ModelKind::WhithamBoussinesq,
            &state0,
            &p,
            &stepper,
            &dno,
            &cfg.observe_times(t_end),
        )?;
        let mut rows = Vec::new();
        let mut worst = 0.0_f64;
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let res = diag_residual(state, &p, &dno)?;
            rows.push((*t, "diag_residual".to_string(), res));
            worst = worst.max(res);
        }
        Ok((rows, vec![("diag_residual_max".to_string(), worst)]))
    });

    absorb(&mut report, &outcomes);
    let points = summary_points(&outcomes, "diag_residual_max");
    slope_verdict(&mut report, "diag_residual_max", &points, 0.8, 1.2);
    floor_verdict(&mut report, &outcomes, "diag_residual_max", 1e-8);
    Ok(report)
}

/// H^0 residual of the exact diagonalized system evaluated on the Riemann
/// invariants of a Whitham-Boussinesq state (time derivatives by the chain
/// rule, not finite differencing).
fn diag_residual(state: &ModelState, p: &Params, dno: &DnoConfig) -> anyhow::Result<f64> {
    let (zeta, v) = match state {
        ModelState::SurfaceVelocity { zeta, v } => (zeta, v),
        _ => bail!("diag_residual wants the (zeta, v) chart"),
    };
    let (up, um) = transforms::riemann_map(zeta, v, p)?;
    let tangent = rhs(ModelKind::WhithamBoussinesq, state, p, dno)?;
    let (zd, vd) = match &tangent {
        ModelState::SurfaceVelocity { zeta, v } => (zeta, v),
        _ => unreachable!(),
    };
    // d/dt u± = ± zeta_dot / (2 sqrt h) + F^{-1}[v_dot] / 2
    let half_winv = apply_multiplier(&MultiplierSymbol::FmuInv, vd, p)?.scale(0.5);
    let eps = p.eps;
    let bore_dot = zd.zip_with(zeta, |dz, z| dz / (2.0 * (1.0 + eps * z).sqrt()))?;
    let up_dot = bore_dot.add(&half_winv)?;
    let um_dot = bore_dot.scale(-1.0).add(&half_winv)?;

    let fup = apply_multiplier(&MultiplierSymbol::Fmu, &derivative(&up)?, p)?;
    let fum = apply_multiplier(&MultiplierSymbol::Fmu, &derivative(&um)?, p)?;
    let coeff_p = up.zip_with(&um, |a, b| eps * (3.0 * a + b) / 2.0 + 1.0)?;
    let coeff_m = up.zip_with(&um, |a, b| eps * (a + 3.0 * b) / 2.0 - 1.0)?;
    let res_p = up_dot.add(&coeff_p.mul(&fup)?)?;
    let res_m = um_dot.add(&coeff_m.mul(&fum)?)?;
    Ok(h0_pair(&res_p, &res_m)?)
}

// ------------------------------------------------------------- whitham

fn run_consistency_whitham(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<ScalingReport> {
    let mut report = ScalingReport::new(provenance(cfg, seed));
    let grid = cfg.make_grid()?;
    let dno = cfg.dno_config();

    let outcomes = sweep(cfg, |mu, eps| {
        let p = cfg.make_params(mu, eps)?;
        let u0 = cfg.profile(&grid, 1.0, 0.0);
        let t_end = cfg.horizon(mu, eps);
        let stepper = cfg.stepper_for(Scheme::Ifrk4, t_end);
        let state0 = ModelState::Diagonal { a: u0, b: Field::zeros(grid.clone()) };
        let traj = evolve(
            ModelKind::DiagonalizedSystem,
            &state0,
            &p,
            &stepper,
            &dno,
            &cfg.observe_times(t_end),
        )?;
        let mut rows = Vec::new();
        let mut worst = 0.0_f64;
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let (up, _um) = match state {
                ModelState::Diagonal { a, b } => (a, b),
                _ => unreachable!(),
            };
            let tangent = rhs(ModelKind::DiagonalizedSystem, state, &p, &dno)?;
            let up_dot = match &tangent {
                ModelState::Diagonal { a, .. } => a,
                _ => unreachable!(),
            };
            // Whitham residual: dt u+ + F[dx u+] + (3e/2) u+ dx u+
            let lin = apply_multiplier(&MultiplierSymbol::Fmu, &derivative(up)?, &p)?;
            let adv = derivative(&up.mul(up)?)?.scale(0.75 * p.eps);
            let res = norm_hs(&up_dot.add(&lin)?.add(&adv)?, 0.0)?;
            rows.push((*t, "whitham_residual".to_string(), res));
            worst = worst.max(res);
        }
        Ok((rows, vec![("whitham_residual_max".to_string(), worst)]))
    });

    absorb(&mut report, &outcomes);
    let points = summary_points(&outcomes, "whitham_residual_max");
    slope_verdict(&mut report, "whitham_residual_max", &points, 0.75, 1.25);
    floor_verdict(&mut report, &outcomes, "whitham_residual_max", 1e-8);
    Ok(report)
}

// ------------------------------------------------------------ corollary

fn run_corollary_onesided(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<ScalingReport> {
    let mut report = ScalingReport::new(provenance(cfg, seed));
    let grid = cfg.make_grid()?;
    let dno = cfg.dno_config();

    let outcomes = sweep(cfg, |mu, eps| {
        let p = cfg.make_params(mu, eps)?;
        let u0 = cfg.profile(&grid, 1.0, 0.0);
        let t_end = cfg.horizon(mu, eps);
        let times = cfg.observe_times(t_end);
        let errs = onesided_errors(cfg, &grid, &u0, &p, &dno, t_end, &times, false)?;
        let mut rows = Vec::new();
        for (t, e) in times.iter().zip(&errs) {
            rows.push((*t, "onesided_error".to_string(), *e));
        }
        let pts: Vec<(f64, f64)> = times.iter().copied().zip(errs.iter().copied()).collect();
        let (a, b) = fit_linear_in_t(&pts).ok_or_else(|| anyhow!("time fit failed"))?;
        rows.push((0.0, "onesided_growth_rate".to_string(), b));
        rows.push((0.0, "onesided_growth_offset".to_string(), a));
        Ok((rows, vec![("onesided_growth_rate".to_string(), b)]))
    });

    absorb(&mut report, &outcomes);
    let points = summary_points(&outcomes, "onesided_growth_rate");
    slope_verdict(&mut report, "onesided_growth_rate", &points, 0.75, 1.25);

    // mirror run (left-moving statement by reflection) at the largest pair
    if let Some(&[mu, eps]) = cfg
        .params_grid
        .iter()
        .filter(|&&[m, e]| m > 0.0 && e > 0.0)
        .max_by(|a, b| (a[0] * a[1]).total_cmp(&(b[0] * b[1])))
    {
        let p = cfg.make_params(mu, eps)?;
        let u0 = cfg.profile(&grid, 1.0, 0.0);
        let t_end = cfg.horizon(mu, eps);
        let times = cfg.observe_times(t_end);
        let right = onesided_errors(cfg, &grid, &u0, &p, &dno, t_end, &times, false)?;
        let mirrored = reflect(&u0).scale(-1.0);
        let left = onesided_errors(cfg, &grid, &mirrored, &p, &dno, t_end, &times, true)?;
        let gap = right
            .iter()
            .zip(&left)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        let scale = right.iter().copied().fold(0.0_f64, f64::max);
        report.set_verdict(
            "onesided_mirror_symmetry",
            gap <= 1e-9 * (1.0 + scale),
            format!("max |err_left - err_right| = {gap:.3e} at (mu,eps)=({mu},{eps})"),
        );
    }
    Ok(report)
}

fn reflect(f: &Field) -> Field {
    let n = f.grid().n_points();
    let v = f.values();
    Field::from_values(f.grid().clone(), (0..n).map(|j| v[(n - j) % n]).collect()).unwrap()
}

/// Error curve |(zeta_ref, psi_ref) - (zeta_Wh, psi_Wh)| in H^0 x H^1-dot
/// for one-sided data; `left` runs the mirrored (u+ = 0) statement. The
/// reference is either the exact diagonalized system mapped back to
/// surface variables, or a full water-waves run from the same data.
#[allow(clippy::too_many_arguments)]
fn onesided_errors(
    cfg: &ExperimentConfig,
    grid: &Arc<PeriodicGrid>,
    u0: &Field,
    p: &Params,
    dno: &DnoConfig,
    t_end: f64,
    times: &[f64],
    left: bool,
) -> anyhow::Result<Vec<f64>> {
    let zero = Field::zeros(grid.clone());
    let stepper = cfg.stepper_for(Scheme::Ifrk4, t_end);

    let reference: Vec<(Field, Field)> = match cfg.reference_tier()? {
        ReferenceTier::DiagonalizedSystem => {
            let diag0 = if left {
                ModelState::Diagonal { a: zero.clone(), b: u0.clone() }
            } else {
                ModelState::Diagonal { a: u0.clone(), b: zero.clone() }
            };
            let diag = evolve(ModelKind::DiagonalizedSystem, &diag0, p, &stepper, dno, times)?;
            diag.states
                .iter()
                .map(|st| match st {
                    ModelState::Diagonal { a, b } => transforms::reconstruct_c(a, b, p),
                    _ => unreachable!(),
                })
                .collect::<CoreResult<_>>()?
        }
        ReferenceTier::WaterWaves => {
            let (z0, p0) = if left {
                transforms::reconstruct_c(&zero, u0, p)?
            } else {
                transforms::reconstruct_c(u0, &zero, p)?
            };
            let ww0 = ModelState::SurfacePotential { zeta: z0, psi: p0 };
            let ww_stepper = cfg.stepper_for(Scheme::Rk4, t_end);
            let ww = evolve(ModelKind::WaterWaves, &ww0, p, &ww_stepper, dno, times)?;
            ww.states
                .iter()
                .map(|st| match st {
                    ModelState::SurfacePotential { zeta, psi } => (zeta.clone(), psi.clone()),
                    _ => unreachable!(),
                })
                .collect()
        }
    };

    let whitham_kind = if left { ModelKind::WhithamLeft } else { ModelKind::WhithamRight };
    let wh = evolve(whitham_kind, &ModelState::Single(u0.clone()), p, &stepper, dno, times)?;

    let mut errs = Vec::with_capacity(reference.len());
    for ((zr, pr), ws) in reference.iter().zip(&wh.states) {
        let u = match ws {
            ModelState::Single(u) => u,
            _ => unreachable!(),
        };
        let (zw, pw) = if left {
            transforms::reconstruct_c(&zero, u, p)?
        } else {
            transforms::reconstruct_c(u, &zero, p)?
        };
        errs.push(pair_error(zr, pr, &zw, &pw)?);
    }
    Ok(errs)
}

// ------------------------------------------------------------- pipeline

fn run_theorem_pipeline(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<ScalingReport> {
    let mut report = ScalingReport::new(provenance(cfg, seed));
    let grid = cfg.make_grid()?;
    let dno = cfg.dno_config();

    let outcomes = sweep(cfg, |mu, eps| {
        let p = cfg.make_params(mu, eps)?;
        let (zeta0, psi0) = surface_initial_data(cfg, &grid);
        // initial data through the inverse pipeline (Id - eps correction)
        let (eta, w) = transforms::t_d_inv(&zeta0, &derivative(&psi0)?, &p)?;
        let (r0, s0) = transforms::t_b_inv(&eta, &w, &p)?;
        let (zw0, pw0) = transforms::pipeline_wh(&r0, &s0, &p)?;
        let mismatch = pair_error(&zw0, &pw0, &zeta0, &psi0)?;

        let t_end = cfg.horizon(mu, eps);
        let times = cfg.observe_times(t_end);
        let stepper = cfg.stepper_for(Scheme::Ifrk4, t_end);
        let pair0 = ModelState::Diagonal { a: r0, b: s0 };
        let traj = evolve(ModelKind::DecoupledWhithamPair, &pair0, &p, &stepper, &dno, &times)?;

        // reference water-waves run from the same surface data
        let ww_stepper = cfg.stepper_for(Scheme::Rk4, t_end);
        let ww0 = ModelState::SurfacePotential { zeta: zeta0.clone(), psi: psi0.clone() };
        let ww = evolve(ModelKind::WaterWaves, &ww0, &p, &ww_stepper, &dno, &times)?;

        let mut rows = vec![(0.0, "pipeline_initial_mismatch".to_string(), mismatch)];
        let mut worst_defect = 0.0_f64;
        for ((t, state), ww_state) in traj.times.iter().zip(&traj.states).zip(&ww.states) {
            let (r, s) = match state {
                ModelState::Diagonal { a, b } => (a, b),
                _ => unreachable!(),
            };
            let defect = pipeline_defect(r, s, &p, &dno)?;
            rows.push((*t, "pipeline_ww_defect".to_string(), defect));
            worst_defect = worst_defect.max(defect);

            let (zw, pw) = transforms::pipeline_wh(r, s, &p)?;
            let (zr, pr) = match ww_state {
                ModelState::SurfacePotential { zeta, psi } => (zeta, psi),
                _ => unreachable!(),
            };
            rows.push((*t, "pipeline_trajectory_error".to_string(), pair_error(&zw, &pw, zr, pr)?));
        }
        Ok((
            rows,
            vec![
                ("pipeline_initial_mismatch".to_string(), mismatch),
                ("pipeline_ww_defect_max".to_string(), worst_defect),
            ],
        ))
    });

    absorb(&mut report, &outcomes);

    // 2-D slope fit of the defect over the full grid (reported), plus the
    // total order along the diagonal mu = eps (asserted)
    let defect_points = summary_points(&outcomes, "pipeline_ww_defect_max");
    let fit = fit_loglog_mu_eps(&defect_points);
    report.fitted_slopes.insert("pipeline_ww_defect_max".to_string(), fit);

    let diag_points: Vec<(f64, f64)> = defect_points
        .iter()
        .filter(|&&(mu, eps, _)| mu == eps && mu > 0.0)
        .map(|&(mu, _, v)| (mu, v))
        .collect();
    match fit_loglog_1d(&diag_points) {
        Some((order, half)) => {
            report.set_verdict(
                "pipeline_defect_total_order",
                order >= 1.7,
                format!("fitted order {order:.3} (half-width {half:.3}); target >= 1.7 along mu=eps"),
            );
        }
        None => report.set_verdict(
            "pipeline_defect_total_order",
            false,
            "no usable diagonal pairs (need mu = eps spanning an octave)".to_string(),
        ),
    }

    // eps-halving ratios of the t = 0 mismatch along the diagonal
    let mut mismatches: Vec<(f64, f64)> = summary_points(&outcomes, "pipeline_initial_mismatch")
        .iter()
        .filter(|&&(mu, eps, _)| mu == eps && eps > 0.0)
        .map(|&(_, eps, v)| (eps, v))
        .collect();
    mismatches.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut ratios = Vec::new();
    for w in mismatches.windows(2) {
        if (w[0].0 / w[1].0 - 2.0).abs() < 1e-12 {
            ratios.push(w[0].1 / w[1].1);
        }
    }
    if ratios.is_empty() {
        report.set_verdict(
            "pipeline_initial_mismatch_ratio",
            false,
            "no eps-halving diagonal pairs in params_grid".to_string(),
        );
    } else {
        let pass = ratios.iter().all(|r| (3.5..=4.5).contains(r));
        report.set_verdict(
            "pipeline_initial_mismatch_ratio",
            pass,
            format!("ratios under eps halving: {ratios:?} (target 4 +/- 0.5)"),
        );
    }
    Ok(report)
}

/// || d/dt (zeta_Wh, psi_Wh) - J grad(H_WW)(zeta_Wh, psi_Wh) || in
/// H^0 x H^1-dot, with the time derivative taken by the chain rule through
/// T_B, T_D, T_I.
fn pipeline_defect(r: &Field, s: &Field, p: &Params, dno: &DnoConfig) -> anyhow::Result<f64> {
    let tangent = rhs(
        ModelKind::DecoupledWhithamPair,
        &ModelState::Diagonal { a: r.clone(), b: s.clone() },
        p,
        dno,
    )?;
    let (rdot, sdot) = match &tangent {
        ModelState::Diagonal { a, b } => (a, b),
        _ => unreachable!(),
    };
    let (rcd, scd) = transforms::t_b_jacobian(r, s, p, rdot, sdot)?;
    let zeta_dot = rcd.add(&scd)?;
    let v_dot = apply_multiplier(&MultiplierSymbol::FmuInv, &rcd.sub(&scd)?, p)?;

    let (zw, pw) = transforms::pipeline_wh(r, s, p)?;
    let grad = hamiltonians::gradient(
        &Functional::with_dno(FunctionalKind::HWw, *p, *dno),
        &ModelState::SurfacePotential { zeta: zw, psi: pw },
    )?;
    let (gz, gp) = match &grad {
        ModelState::SurfacePotential { zeta, psi } => (zeta, psi),
        _ => unreachable!(),
    };
    // J grad H = (delta_psi H, -delta_zeta H)
    let d1 = norm_hs(&zeta_dot.sub(gp)?, 0.0)?;
    // psi defect in the homogeneous norm: dx(psi_dot) = P v_dot
    let psi_defect_dx = v_dot.project_mean_zero().add(&derivative(gz)?)?;
    let d2 = norm_hs(&psi_defect_dx, 0.0)?;
    Ok((d1 * d1 + d2 * d2).sqrt())
}

// --------------------------------------------------------------- suites

fn run_suites(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<ScalingReport> {
    let mut report = ScalingReport::new(provenance(cfg, seed));
    match cfg.experiment {
        ExperimentKind::HamiltonianSuite => suites::hamiltonian_suite(cfg, seed, &mut report)?,
        ExperimentKind::TransformSuite => suites::transform_suite(cfg, seed, &mut report)?,
        ExperimentKind::DispersionSuite => suites::dispersion_suite(cfg, seed, &mut report)?,
        _ => unreachable!(),
    }
    Ok(report)
}

/// All three invariant suites in one report (the `suites` subcommand).
pub fn run_all_suites(cfg: &ExperimentConfig, seed: u64, workers: usize) -> anyhow::Result<ScalingReport> {
    cfg.validate()?;
    let body = || -> anyhow::Result<ScalingReport> {
        let mut report = ScalingReport::new(Provenance {
            experiment: "suites".to_string(),
            ..provenance(cfg, seed)
        });
        suites::hamiltonian_suite(cfg, seed, &mut report)?;
        suites::transform_suite(cfg, seed, &mut report)?;
        suites::dispersion_suite(cfg, seed, &mut report)?;
        Ok(report)
    };
    let mut report = if workers == 0 {
        body()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| anyhow!("thread pool: {e}"))?
            .install(body)?
    };
    report.sort_rows();
    Ok(report)
}

// -------------------------------------------------------------- simulate

pub fn parse_model(name: &str) -> anyhow::Result<ModelKind> {
    Ok(match name {
        "water_waves" => ModelKind::WaterWaves,
        "whitham_boussinesq" => ModelKind::WhithamBoussinesq,
        "whitham_boussinesq_smoothed" => ModelKind::WhithamBoussinesqSmoothed,
        "hamiltonian_wb" => ModelKind::HamiltonianWb,
        "diagonalized_system" => ModelKind::DiagonalizedSystem,
        "whitham_right" => ModelKind::WhithamRight,
        "whitham_left" => ModelKind::WhithamLeft,
        "decoupled_whitham_pair" => ModelKind::DecoupledWhithamPair,
        "kdv" => ModelKind::Kdv,
        other => bail!("unknown model {other:?}"),
    })
}

/// Evolve one model from the configured profile and record observer rows
/// (means, norms, and the matching Hamiltonian where one exists).
pub fn run_simulate(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<ScalingReport> {
    cfg.validate()?;
    let kind = parse_model(
        cfg.model.as_deref().ok_or_else(|| anyhow!("simulate needs a `model = ...` key"))?,
    )?;
    let mut report = ScalingReport::new(Provenance {
        experiment: format!("simulate:{}", cfg.model.as_deref().unwrap()),
        ..provenance(cfg, seed)
    });
    let grid = cfg.make_grid()?;
    let dno = cfg.dno_config();
    for &[mu, eps] in &cfg.params_grid {
        let p = cfg.make_params(mu, eps)?;
        let state0 = initial_state(cfg, &grid, kind, &p)?;
        let t_end = cfg.horizon(mu, eps);
        let stepper = cfg.stepper_for(kind.default_scheme(), t_end);
        let times = cfg.observe_times(t_end);
        match evolve(kind, &state0, &p, &stepper, &dno, &times) {
            Ok(traj) => {
                let functional = hamiltonian_for(kind, &p, &dno);
                for (t, state) in traj.times.iter().zip(&traj.states) {
                    for (i, f) in state.components().iter().enumerate() {
                        report.push_row(mu, eps, *t, &format!("mean_{i}"), f.mean());
                        report.push_row(mu, eps, *t, &format!("norm_h0_{i}"), norm_hs(f, 0.0)?);
                        report.push_row(mu, eps, *t, &format!("norm_inf_{i}"), f.norm_inf());
                    }
                    if let Some(fun) = &functional {
                        report.push_row(
                            mu,
                            eps,
                            *t,
                            "hamiltonian",
                            hamiltonians::eval(fun, state)?,
                        );
                    }
                }
                report.set_verdict(
                    &format!("run_completed:mu={mu},eps={eps}"),
                    true,
                    format!("t_end={t_end}"),
                );
            }
            Err(e) => {
                report.set_verdict(
                    &format!("run_completed:mu={mu},eps={eps}"),
                    false,
                    format!("run ended early: {e}"),
                );
            }
        }
    }
    report.sort_rows();
    Ok(report)
}

fn hamiltonian_for(kind: ModelKind, p: &Params, dno: &DnoConfig) -> Option<Functional> {
    match kind {
        ModelKind::WaterWaves => Some(Functional::with_dno(FunctionalKind::HWw, *p, *dno)),
        ModelKind::HamiltonianWb => Some(Functional::new(FunctionalKind::H0EpsH1, *p)),
        ModelKind::DecoupledWhithamPair => Some(Functional::new(FunctionalKind::HWh, *p)),
        _ => None,
    }
}

fn initial_state(
    cfg: &ExperimentConfig,
    grid: &Arc<PeriodicGrid>,
    kind: ModelKind,
    p: &Params,
) -> anyhow::Result<ModelState> {
    use wwlab_core::models::StateChart;
    let (zeta, psi) = surface_initial_data(cfg, grid);
    Ok(match kind.chart() {
        StateChart::SurfacePotential => ModelState::SurfacePotential { zeta, psi },
        StateChart::SurfaceVelocity => {
            let v = apply_multiplier(&MultiplierSymbol::Fmu2, &derivative(&psi)?, p)?;
            ModelState::SurfaceVelocity { zeta, v }
        }
        StateChart::Diagonal => {
            ModelState::Diagonal { a: zeta, b: Field::zeros(grid.clone()) }
        }
        StateChart::Single => ModelState::Single(zeta),
    })
}

