//! Right-hand sides and time integration for the evolution systems of the
//! hierarchy, from the full water-waves system down to the decoupled
//! Whitham pair and a KdV comparison model.
//!
//! Quadratic advection terms are realized in divergence form
//! (u dx u = dx(u^2)/2) so that conserved means are conserved to roundoff
//! and the Hamiltonian kinds agree nodewise with J grad H.

use num_complex::Complex64;

use crate::dno::{check_non_cavitation, dno_apply, DnoConfig};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::params::Params;
use crate::spectral::{
    apply_multiplier, derivative, fmu_symbol, pointwise_product, MultiplierSymbol,
};

/// Hard ceiling for the blow-up detector: Whitham-type models can break,
/// and runs must fail loudly instead of NaN-ing silently.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    WaterWaves,
    WhithamBoussinesq,
    WhithamBoussinesqSmoothed,
    HamiltonianWb,
    DiagonalizedSystem,
    WhithamRight,
    WhithamLeft,
    DecoupledWhithamPair,
    Kdv,
}

/// Shape (coordinate chart) of a model state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateChart {
    SurfacePotential,
    SurfaceVelocity,
    Diagonal,
    Single,
}

impl StateChart {
    pub fn name(self) -> &'static str {
        match self {
            StateChart::SurfacePotential => "SurfacePotential",
            StateChart::SurfaceVelocity => "SurfaceVelocity",
            StateChart::Diagonal => "Diagonal",
            StateChart::Single => "Single",
        }
    }
}

impl ModelKind {
    pub fn chart(self) -> StateChart {
        match self {
            ModelKind::WaterWaves | ModelKind::HamiltonianWb => StateChart::SurfacePotential,
            ModelKind::WhithamBoussinesq | ModelKind::WhithamBoussinesqSmoothed => {
                StateChart::SurfaceVelocity
            }
            ModelKind::DiagonalizedSystem | ModelKind::DecoupledWhithamPair => StateChart::Diagonal,
            ModelKind::WhithamRight | ModelKind::WhithamLeft | ModelKind::Kdv => StateChart::Single,
        }
    }

    /// Kinds whose linear part is a pure diagonal multiplier integrate it
    /// exactly (IFRK4); the h-dependent-flux systems use plain RK4.
    pub fn default_scheme(self) -> Scheme {
        match self {
            ModelKind::WaterWaves
            | ModelKind::WhithamBoussinesq
            | ModelKind::WhithamBoussinesqSmoothed
            | ModelKind::HamiltonianWb => Scheme::Rk4,
            _ => Scheme::Ifrk4,
        }
    }
}

/// Tagged pair (or single field) in one of the coordinate charts.
#[derive(Debug, Clone)]
pub enum ModelState {
    SurfacePotential { zeta: Field, psi: Field },
    SurfaceVelocity { zeta: Field, v: Field },
    Diagonal { a: Field, b: Field },
    Single(Field),
}

impl ModelState {
    pub fn chart(&self) -> StateChart {
        match self {
            ModelState::SurfacePotential { .. } => StateChart::SurfacePotential,
            ModelState::SurfaceVelocity { .. } => StateChart::SurfaceVelocity,
            ModelState::Diagonal { .. } => StateChart::Diagonal,
            ModelState::Single(_) => StateChart::Single,
        }
    }

    pub fn components(&self) -> Vec<&Field> {
        match self {
            ModelState::SurfacePotential { zeta, psi } => vec![zeta, psi],
            ModelState::SurfaceVelocity { zeta, v } => vec![zeta, v],
            ModelState::Diagonal { a, b } => vec![a, b],
            ModelState::Single(u) => vec![u],
        }
    }

    fn rebuild(&self, mut fields: Vec<Field>) -> ModelState {
        match self {
            ModelState::SurfacePotential { .. } => {
                let psi = fields.pop().unwrap();
                let zeta = fields.pop().unwrap();
                ModelState::SurfacePotential { zeta, psi }
            }
            ModelState::SurfaceVelocity { .. } => {
                let v = fields.pop().unwrap();
                let zeta = fields.pop().unwrap();
                ModelState::SurfaceVelocity { zeta, v }
            }
            ModelState::Diagonal { .. } => {
                let b = fields.pop().unwrap();
                let a = fields.pop().unwrap();
                ModelState::Diagonal { a, b }
            }
            ModelState::Single(_) => ModelState::Single(fields.pop().unwrap()),
        }
    }

    /// A state of the same chart built from the given pair of components.
    pub fn same_chart_pair(&self, a: Field, b: Field) -> ModelState {
        match self {
            ModelState::Single(_) => ModelState::Single(a),
            other => other.rebuild(vec![a, b]),
        }
    }

    /// self + c * other, componentwise.
    pub fn add_scaled(&self, c: f64, other: &ModelState) -> Result<ModelState> {
        let fields = self
            .components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| a.add_scaled(c, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.rebuild(fields))
    }

    pub fn norm_inf(&self) -> f64 {
        self.components().iter().map(|f| f.norm_inf()).fold(0.0, f64::max)
    }

    pub fn check_chart(&self, kind: ModelKind, context: &'static str) -> Result<()> {
        if self.chart() == kind.chart() {
            Ok(())
        } else {
            Err(Error::ChartMismatch {
                expected: kind.chart().name(),
                got: self.chart().name(),
                context,
            })
        }
    }

    fn ensure_regular(&self, context: &'static str) -> Result<()> {
        let max = self.norm_inf();
        if !max.is_finite() || max > BLOWUP_THRESHOLD {
            Err(Error::NonFinite { context, max_abs: max })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Ifrk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub cfl_guard: f64,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        StepperConfig { dt, scheme: Scheme::Ifrk4, t_end, cfl_guard: 0.5 }
    }

    pub fn for_kind(kind: ModelKind, dt: f64, t_end: f64) -> Self {
        StepperConfig { dt, scheme: kind.default_scheme(), t_end, cfl_guard: 0.5 }
    }
}

fn fmu_of(f: &Field, p: &Params) -> Result<Field> {
    apply_multiplier(&MultiplierSymbol::Fmu, f, p)
}

fn fmu2_of(f: &Field, p: &Params) -> Result<Field> {
    apply_multiplier(&MultiplierSymbol::Fmu2, f, p)
}

/// dx(f^2)/2, the divergence realization of f dx f.
fn half_dx_sq(f: &Field, dealias_product: bool) -> Result<Field> {
    let sq = pointwise_product(f, f, dealias_product)?;
    Ok(derivative(&sq)?.scale(0.5))
}

/// Time derivative of `state` under the given model.
pub fn rhs(kind: ModelKind, state: &ModelState, p: &Params, cfg: &DnoConfig) -> Result<ModelState> {
    state.check_chart(kind, "rhs")?;
    let da = cfg.dealias;
    match (kind, state) {
        (ModelKind::WaterWaves, ModelState::SurfacePotential { zeta, psi }) => {
            let g = dno_apply(zeta, psi, p, cfg)?;
            let px = derivative(psi)?;
            let zx = derivative(zeta)?;
            let num = g.add(&pointwise_product(&zx, &px, da)?.scale(p.eps))?;
            let num_sq = pointwise_product(&num, &num, da)?;
            let quot = num_sq.zip_with(&zx, |n, z| n / (1.0 + p.eps * p.eps * p.mu * z * z))?;
            let psi_dot = zeta
                .scale(-1.0)
                .add_scaled(-0.5 * p.eps, &pointwise_product(&px, &px, da)?)?
                .add_scaled(0.5 * p.mu * p.eps, &quot)?;
            Ok(ModelState::SurfacePotential { zeta: g, psi: psi_dot })
        }
        (ModelKind::WhithamBoussinesq, ModelState::SurfaceVelocity { zeta, v }) => {
            check_non_cavitation(zeta, p, "rhs(WhithamBoussinesq)")?;
            let flux = pointwise_product(zeta, v, da)?;
            let zeta_dot =
                derivative(v)?.add_scaled(p.eps, &derivative(&flux)?)?.scale(-1.0);
            let v_dot = fmu2_of(&derivative(zeta)?, p)?
                .add_scaled(p.eps, &half_dx_sq(v, da)?)?
                .scale(-1.0);
            Ok(ModelState::SurfaceVelocity { zeta: zeta_dot, v: v_dot })
        }
        (ModelKind::WhithamBoussinesqSmoothed, ModelState::SurfaceVelocity { zeta, v }) => {
            check_non_cavitation(zeta, p, "rhs(WhithamBoussinesqSmoothed)")?;
            let flux = pointwise_product(zeta, v, da)?;
            let zeta_dot = derivative(v)?
                .add_scaled(p.eps, &fmu2_of(&derivative(&flux)?, p)?)?
                .scale(-1.0);
            // the regularized system carries eps/2 F_mu^2[v dx v]
            let v_dot = fmu2_of(&derivative(zeta)?, p)?
                .add_scaled(0.5 * p.eps, &fmu2_of(&half_dx_sq(v, da)?, p)?)?
                .scale(-1.0);
            Ok(ModelState::SurfaceVelocity { zeta: zeta_dot, v: v_dot })
        }
        (ModelKind::HamiltonianWb, ModelState::SurfacePotential { zeta, psi }) => {
            let w = fmu_of(&derivative(psi)?, p)?;
            let zeta_dot = fmu2_of(&derivative(&derivative(psi)?)?, p)?
                .add_scaled(p.eps, &fmu_of(&derivative(&pointwise_product(zeta, &w, da)?)?, p)?)?
                .scale(-1.0);
            let psi_dot = zeta.add_scaled(0.5 * p.eps, &pointwise_product(&w, &w, da)?)?.scale(-1.0);
            Ok(ModelState::SurfacePotential { zeta: zeta_dot, psi: psi_dot })
        }
        (ModelKind::DiagonalizedSystem, ModelState::Diagonal { a, b }) => {
            let fa = fmu_of(&derivative(a)?, p)?;
            let fb = fmu_of(&derivative(b)?, p)?;
            let coeff_a = a.zip_with(b, |x, y| p.eps * (3.0 * x + y) / 2.0)?;
            let coeff_b = a.zip_with(b, |x, y| p.eps * (x + 3.0 * y) / 2.0)?;
            let a_dot = fa.add(&pointwise_product(&coeff_a, &fa, da)?)?.scale(-1.0);
            let b_dot = fb.sub(&pointwise_product(&coeff_b, &fb, da)?)?;
            Ok(ModelState::Diagonal { a: a_dot, b: b_dot })
        }
        (ModelKind::WhithamRight, ModelState::Single(u)) => {
            let out = fmu_of(&derivative(u)?, p)?
                .add_scaled(1.5 * p.eps, &half_dx_sq(u, da)?)?
                .scale(-1.0);
            Ok(ModelState::Single(out))
        }
        (ModelKind::WhithamLeft, ModelState::Single(u)) => {
            // Prop-1.9 convention: dt u - F dx u + (3e/2) u dx u = 0
            let out = fmu_of(&derivative(u)?, p)?
                .add_scaled(-1.5 * p.eps, &half_dx_sq(u, da)?)?;
            Ok(ModelState::Single(out))
        }
        (ModelKind::DecoupledWhithamPair, ModelState::Diagonal { a, b }) => {
            // Normal-form convention: the nonlinearity is wrapped in F_mu,
            // so the rhs is exactly J_mu grad(H_Wh).
            let a_dot = fmu_of(
                &derivative(a)?.add_scaled(1.5 * p.eps, &half_dx_sq(a, da)?)?,
                p,
            )?
            .scale(-1.0);
            let b_dot =
                fmu_of(&derivative(b)?.add_scaled(1.5 * p.eps, &half_dx_sq(b, da)?)?, p)?;
            Ok(ModelState::Diagonal { a: a_dot, b: b_dot })
        }
        (ModelKind::Kdv, ModelState::Single(u)) => {
            let ux = derivative(u)?;
            let uxxx = derivative(&derivative(&ux)?)?;
            let out = ux
                .add_scaled(1.5 * p.eps, &half_dx_sq(u, da)?)?
                .add_scaled(p.mu / 6.0, &uxxx)?
                .scale(-1.0);
            Ok(ModelState::Single(out))
        }
        _ => unreachable!("chart checked above"),
    }
}

/// Per-component linear multiplier symbols (in storage order) of the kinds
/// whose linear part is diagonal in Fourier space.
fn linear_symbols(kind: ModelKind, state: &ModelState, p: &Params) -> Option<Vec<Vec<Complex64>>> {
    let grid = state.components()[0].grid().clone();
    let nyq = grid.nyquist_index();
    let sym = |sign: f64, dispersive: bool| -> Vec<Complex64> {
        grid.frequencies()
            .iter()
            .enumerate()
            .map(|(j, &xi)| {
                if j == nyq {
                    return Complex64::new(0.0, 0.0);
                }
                let speed = if dispersive {
                    fmu_symbol(xi, p.mu)
                } else {
                    1.0 - p.mu * xi * xi / 6.0
                };
                Complex64::new(0.0, sign * xi * speed)
            })
            .collect()
    };
    match kind {
        ModelKind::DiagonalizedSystem | ModelKind::DecoupledWhithamPair => {
            Some(vec![sym(-1.0, true), sym(1.0, true)])
        }
        ModelKind::WhithamRight => Some(vec![sym(-1.0, true)]),
        ModelKind::WhithamLeft => Some(vec![sym(1.0, true)]),
        ModelKind::Kdv => Some(vec![sym(-1.0, false)]),
        _ => None,
    }
}

/// rhs minus the diagonal linear part (for the integrating-factor scheme).
fn nonlinear_rhs(
    kind: ModelKind,
    state: &ModelState,
    p: &Params,
    cfg: &DnoConfig,
) -> Result<ModelState> {
    let da = cfg.dealias;
    match (kind, state) {
        (ModelKind::DiagonalizedSystem, ModelState::Diagonal { a, b }) => {
            let fa = fmu_of(&derivative(a)?, p)?;
            let fb = fmu_of(&derivative(b)?, p)?;
            let coeff_a = a.zip_with(b, |x, y| p.eps * (3.0 * x + y) / 2.0)?;
            let coeff_b = a.zip_with(b, |x, y| p.eps * (x + 3.0 * y) / 2.0)?;
            Ok(ModelState::Diagonal {
                a: pointwise_product(&coeff_a, &fa, da)?.scale(-1.0),
                b: pointwise_product(&coeff_b, &fb, da)?.scale(-1.0),
            })
        }
        (ModelKind::DecoupledWhithamPair, ModelState::Diagonal { a, b }) => Ok(ModelState::Diagonal {
            a: fmu_of(&half_dx_sq(a, da)?, p)?.scale(-1.5 * p.eps),
            b: fmu_of(&half_dx_sq(b, da)?, p)?.scale(1.5 * p.eps),
        }),
        (ModelKind::WhithamRight, ModelState::Single(u)) => {
            Ok(ModelState::Single(half_dx_sq(u, da)?.scale(-1.5 * p.eps)))
        }
        (ModelKind::WhithamLeft, ModelState::Single(u)) => {
            Ok(ModelState::Single(half_dx_sq(u, da)?.scale(-1.5 * p.eps)))
        }
        (ModelKind::Kdv, ModelState::Single(u)) => {
            Ok(ModelState::Single(half_dx_sq(u, da)?.scale(-1.5 * p.eps)))
        }
        _ => unreachable!("only multiplier-linear kinds use the integrating factor"),
    }
}

fn check_cfl(state: &ModelState, stepper: &StepperConfig, p: &Params, dt: f64) -> Result<()> {
    let grid = state.components()[0].grid();
    let speed = 1.0 + p.eps * state.norm_inf();
    let dt_max = stepper.cfl_guard * grid.spacing() / speed;
    if dt > dt_max {
        Err(Error::CflViolated { dt, dt_max })
    } else {
        Ok(())
    }
}

fn step_rk4(kind: ModelKind, state: &ModelState, p: &Params, dt: f64, cfg: &DnoConfig) -> Result<ModelState> {
    let k1 = rhs(kind, state, p, cfg)?;
    let k2 = rhs(kind, &state.add_scaled(dt / 2.0, &k1)?, p, cfg)?;
    let k3 = rhs(kind, &state.add_scaled(dt / 2.0, &k2)?, p, cfg)?;
    let k4 = rhs(kind, &state.add_scaled(dt, &k3)?, p, cfg)?;
    state
        .add_scaled(dt / 6.0, &k1)?
        .add_scaled(dt / 3.0, &k2)?
        .add_scaled(dt / 3.0, &k3)?
        .add_scaled(dt / 6.0, &k4)
}

struct SpectralState {
    shape: ModelState,
    spectra: Vec<Vec<Complex64>>,
}

impl SpectralState {
    fn pack(state: &ModelState) -> SpectralState {
        let spectra = state.components().iter().map(|f| f.spectrum().to_vec()).collect();
        SpectralState { shape: state.clone(), spectra }
    }

    fn unpack(&self, spectra: &[Vec<Complex64>]) -> Result<ModelState> {
        let grid = self.shape.components()[0].grid().clone();
        let fields = spectra
            .iter()
            .map(|s| Field::from_spectrum(grid.clone(), s.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.shape.rebuild(fields))
    }
}

fn step_ifrk4(kind: ModelKind, state: &ModelState, p: &Params, dt: f64, cfg: &DnoConfig) -> Result<ModelState> {
    let lam = linear_symbols(kind, state, p)
        .expect("IFRK4 requires a diagonal multiplier linear part");
    let packed = SpectralState::pack(state);
    let e_half: Vec<Vec<Complex64>> = lam
        .iter()
        .map(|l| l.iter().map(|&z| (z * dt / 2.0).exp()).collect())
        .collect();
    let e_full: Vec<Vec<Complex64>> = lam
        .iter()
        .map(|l| l.iter().map(|&z| (z * dt).exp()).collect())
        .collect();

    let comb = |xs: &[Vec<Complex64>], ys: &[Vec<Complex64>], c: f64| -> Vec<Vec<Complex64>> {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| x.iter().zip(y).map(|(&a, &b)| a + b * c).collect())
            .collect()
    };
    let emul = |e: &[Vec<Complex64>], xs: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
        e.iter()
            .zip(xs)
            .map(|(ev, x)| ev.iter().zip(x).map(|(&a, &b)| a * b).collect())
            .collect()
    };
    let nl = |spectra: &[Vec<Complex64>]| -> Result<Vec<Vec<Complex64>>> {
        let s = packed.unpack(spectra)?;
        let tangent = nonlinear_rhs(kind, &s, p, cfg)?;
        Ok(tangent.components().iter().map(|f| f.spectrum().to_vec()).collect())
    };

    let v = &packed.spectra;
    let a = nl(v)?;
    let b = nl(&emul(&e_half, &comb(v, &a, dt / 2.0)))?;
    let c = nl(&comb(&emul(&e_half, v), &b, dt / 2.0))?;
    let ev = emul(&e_full, v);
    let d = nl(&comb(&ev, &emul(&e_half, &c), dt))?;

    // v' = E2 v + dt/6 (E2 a + 2 E (b + c) + d)
    let mut out = ev;
    let e2a = emul(&e_full, &a);
    out = comb(&out, &e2a, dt / 6.0);
    let bc = comb(&b, &c, 1.0);
    out = comb(&out, &emul(&e_half, &bc), dt / 3.0);
    out = comb(&out, &d, dt / 6.0);
    packed.unpack(&out)
}

/// One time step of the configured scheme.
pub fn step(
    kind: ModelKind,
    state: &ModelState,
    p: &Params,
    stepper: &StepperConfig,
    cfg: &DnoConfig,
) -> Result<ModelState> {
    state.check_chart(kind, "step")?;
    state.ensure_regular("step input")?;
    check_cfl(state, stepper, p, stepper.dt)?;
    let next = match stepper.scheme {
        Scheme::Rk4 => step_rk4(kind, state, p, stepper.dt, cfg)?,
        Scheme::Ifrk4 => step_ifrk4(kind, state, p, stepper.dt, cfg)?,
    };
    next.ensure_regular("step output")?;
    Ok(next)
}

/// States observed along an [`evolve`] run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModelState>,
}

impl Trajectory {
    pub fn final_state(&self) -> &ModelState {
        self.states.last().expect("trajectory never empty")
    }
}

/// Integrate from t = 0 to `stepper.t_end`, landing exactly on each
/// requested observation time (0 and t_end are always included). The step
/// size never exceeds `stepper.dt`; segments are subdivided evenly.
pub fn evolve(
    kind: ModelKind,
    state0: &ModelState,
    p: &Params,
    stepper: &StepperConfig,
    cfg: &DnoConfig,
    observe_times: &[f64],
) -> Result<Trajectory> {
    state0.check_chart(kind, "evolve")?;
    let mut times: Vec<f64> = observe_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < stepper.t_end)
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    times.insert(0, 0.0);
    if stepper.t_end > 0.0 {
        times.push(stepper.t_end);
    }

    let mut states = vec![state0.clone()];
    let mut current = state0.clone();
    for w in times.clone().windows(2) {
        let span = w[1] - w[0];
        let n_steps = (span / stepper.dt).ceil().max(1.0) as usize;
        let sub = StepperConfig { dt: span / n_steps as f64, ..*stepper };
        for _ in 0..n_steps {
            current = step(kind, &current, p, &sub, cfg)?;
        }
        states.push(current.clone());
    }
    Ok(Trajectory { times, states })
}
