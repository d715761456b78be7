//! The Hamiltonian ladder of the hierarchy, variational gradients, Poisson
//! tensors, Lie brackets, the normal-form generator and its homological
//! residual, and the structure-preservation defect of the normal-form map.
//!
//! Quadrature is the trapezoid rule on the uniform periodic grid, which is
//! spectrally accurate here. Interior antiderivatives act on mean-projected
//! integrands (the torus realization; the shift is a multiple of the
//! conserved means and cancels in every identity below).

use crate::dno::{dno_apply, DnoConfig};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::models::ModelState;
use crate::params::Params;
use crate::spectral::{
    anti_derivative_projected, apply_multiplier, derivative, norm_hs, MultiplierSymbol,
};
use crate::transforms::t_b;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// H_WW: full water-waves energy (uses the truncated DNO).
    HWw,
    /// H_0 + eps H_1, the shallow-water approximation of H_WW.
    H0EpsH1,
    /// H_BW = L + eps Z + eps W in diagonal variables.
    HBw,
    /// H_Wh = L + eps Z, the normal form.
    HWh,
    /// L = int (r^2 + s^2).
    LQuad,
    /// Z = (1/2) int (r^3 + s^3).
    ZCubic,
    /// W = -(1/2) int (r^2 s + r s^2), the counter-propagating coupling.
    WCoupling,
    /// G = (1/4) int [D^{-1}(r^2) s + D^{-1}(r) s^2], the generator solving
    /// the simplified homological equation.
    GAux,
}

#[derive(Debug, Clone, Copy)]
pub struct Functional {
    pub kind: FunctionalKind,
    pub params: Params,
    pub dno: DnoConfig,
}

impl Functional {
    pub fn new(kind: FunctionalKind, params: Params) -> Self {
        Functional { kind, params, dno: DnoConfig::default() }
    }

    pub fn with_dno(kind: FunctionalKind, params: Params, dno: DnoConfig) -> Self {
        Functional { kind, params, dno }
    }

    fn wants_surface_chart(&self) -> bool {
        matches!(self.kind, FunctionalKind::HWw | FunctionalKind::H0EpsH1)
    }
}

fn surface_pair<'a>(state: &'a ModelState, context: &'static str) -> Result<(&'a Field, &'a Field)> {
    match state {
        ModelState::SurfacePotential { zeta, psi } => Ok((zeta, psi)),
        other => Err(Error::ChartMismatch {
            expected: "SurfacePotential",
            got: other.chart().name(),
            context,
        }),
    }
}

fn diagonal_pair<'a>(state: &'a ModelState, context: &'static str) -> Result<(&'a Field, &'a Field)> {
    match state {
        ModelState::Diagonal { a, b } => Ok((a, b)),
        other => Err(Error::ChartMismatch {
            expected: "Diagonal",
            got: other.chart().name(),
            context,
        }),
    }
}

fn fmu_dx_psi(psi: &Field, p: &Params) -> Result<Field> {
    apply_multiplier(&MultiplierSymbol::Fmu, &derivative(psi)?, p)
}

/// Value of the functional at the state (spectral quadrature).
pub fn eval(f: &Functional, state: &ModelState) -> Result<f64> {
    let p = &f.params;
    if f.wants_surface_chart() {
        let (zeta, psi) = surface_pair(state, "eval")?;
        match f.kind {
            FunctionalKind::HWw => {
                let g = dno_apply(zeta, psi, p, &f.dno)?;
                Ok(0.5 * zeta.mul(zeta)?.integral() + 0.5 * psi.inner(&g)?)
            }
            FunctionalKind::H0EpsH1 => {
                let w = fmu_dx_psi(psi, p)?;
                let w2 = w.mul(&w)?;
                Ok(0.5 * zeta.mul(zeta)?.integral()
                    + 0.5 * w2.integral()
                    + 0.5 * p.eps * zeta.inner(&w2)?)
            }
            _ => unreachable!(),
        }
    } else {
        let (r, s) = diagonal_pair(state, "eval")?;
        let quad = || -> Result<f64> { Ok(r.mul(r)?.integral() + s.mul(s)?.integral()) };
        let cubic = || -> Result<f64> {
            Ok(0.5 * (r.mul(r)?.inner(r)? + s.mul(s)?.inner(s)?))
        };
        let coupling = || -> Result<f64> {
            Ok(-0.5 * (r.mul(r)?.inner(s)? + r.inner(&s.mul(s)?)?))
        };
        match f.kind {
            FunctionalKind::LQuad => quad(),
            FunctionalKind::ZCubic => cubic(),
            FunctionalKind::WCoupling => coupling(),
            FunctionalKind::HWh => Ok(quad()? + p.eps * cubic()?),
            FunctionalKind::HBw => Ok(quad()? + p.eps * cubic()? + p.eps * coupling()?),
            FunctionalKind::GAux => {
                let r2 = r.mul(r)?.project_mean_zero();
                let s2 = s.mul(s)?;
                Ok(0.25 * anti_derivative_projected(&r2).inner(s)?
                    + 0.25 * anti_derivative_projected(&r.project_mean_zero()).inner(&s2)?)
            }
            _ => unreachable!(),
        }
    }
}

/// Variational (L^2) gradient of the functional at the state, in the same
/// chart. H_WW uses the closed-form water-waves vector field with the
/// truncated DNO inserted.
pub fn gradient(f: &Functional, state: &ModelState) -> Result<ModelState> {
    let p = &f.params;
    let eps = p.eps;
    if f.wants_surface_chart() {
        let (zeta, psi) = surface_pair(state, "gradient")?;
        match f.kind {
            FunctionalKind::HWw => {
                let g = dno_apply(zeta, psi, p, &f.dno)?;
                let px = derivative(psi)?;
                let zx = derivative(zeta)?;
                let num = g.add(&zx.mul(&px)?.scale(eps))?;
                let quot = num
                    .mul(&num)?
                    .zip_with(&zx, |n, z| n / (1.0 + eps * eps * p.mu * z * z))?;
                let d_zeta = zeta
                    .add_scaled(0.5 * eps, &px.mul(&px)?)?
                    .add_scaled(-0.5 * p.mu * eps, &quot)?;
                Ok(ModelState::SurfacePotential { zeta: d_zeta, psi: g })
            }
            FunctionalKind::H0EpsH1 => {
                let w = fmu_dx_psi(psi, p)?;
                let d_zeta = zeta.add_scaled(0.5 * eps, &w.mul(&w)?)?;
                // delta_psi = -F^2 dxx psi - eps F dx(zeta F dx psi)
                let lin = apply_multiplier(
                    &MultiplierSymbol::Fmu2,
                    &derivative(&derivative(psi)?)?,
                    p,
                )?;
                let nl = apply_multiplier(
                    &MultiplierSymbol::Fmu,
                    &derivative(&zeta.mul(&w)?)?,
                    p,
                )?;
                let d_psi = lin.add_scaled(eps, &nl)?.scale(-1.0);
                Ok(ModelState::SurfacePotential { zeta: d_zeta, psi: d_psi })
            }
            _ => unreachable!(),
        }
    } else {
        let (r, s) = diagonal_pair(state, "gradient")?;
        let pair = |a: Field, b: Field| ModelState::Diagonal { a, b };
        match f.kind {
            FunctionalKind::LQuad => Ok(pair(r.scale(2.0), s.scale(2.0))),
            FunctionalKind::ZCubic => {
                Ok(pair(r.mul(r)?.scale(1.5), s.mul(s)?.scale(1.5)))
            }
            FunctionalKind::WCoupling => {
                let rs = r.mul(s)?;
                Ok(pair(
                    rs.add_scaled(0.5, &s.mul(s)?)?.scale(-1.0),
                    rs.add_scaled(0.5, &r.mul(r)?)?.scale(-1.0),
                ))
            }
            FunctionalKind::HWh => Ok(pair(
                r.scale(2.0).add_scaled(1.5 * eps, &r.mul(r)?)?,
                s.scale(2.0).add_scaled(1.5 * eps, &s.mul(s)?)?,
            )),
            FunctionalKind::HBw => {
                let rs = r.mul(s)?;
                let r2 = r.mul(r)?;
                let s2 = s.mul(s)?;
                Ok(pair(
                    r.scale(2.0)
                        .add_scaled(1.5 * eps, &r2)?
                        .add_scaled(-eps, &rs)?
                        .add_scaled(-0.5 * eps, &s2)?,
                    s.scale(2.0)
                        .add_scaled(1.5 * eps, &s2)?
                        .add_scaled(-eps, &rs)?
                        .add_scaled(-0.5 * eps, &r2)?,
                ))
            }
            FunctionalKind::GAux => {
                let (ga, gb) = generator_gradient(r, s)?;
                Ok(pair(ga, gb))
            }
            _ => unreachable!(),
        }
    }
}

fn generator_gradient(r: &Field, s: &Field) -> Result<(Field, Field)> {
    let pr = anti_derivative_projected(r);
    let ps = anti_derivative_projected(s);
    let d_r = r
        .mul(&ps)?
        .scale(-0.5)
        .add_scaled(-0.25, &anti_derivative_projected(&s.mul(s)?))?;
    let d_s = anti_derivative_projected(&r.mul(r)?)
        .scale(0.25)
        .add_scaled(0.5, &s.mul(&pr)?)?;
    Ok((d_r, d_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    /// J = [[0, 1], [-1, 0]] on (zeta, psi).
    JCanonical,
    /// J~ = [[0, -dx], [-dx, 0]] on (zeta, v).
    JTilde,
    /// J_mu = diag(-F_mu dx / 2, +F_mu dx / 2) on (r, s).
    JMu,
    /// J_simp = diag(-dx/2, +dx/2), the mu = 0 limit of J_mu.
    JSimp,
}

#[derive(Debug, Clone, Copy)]
pub struct PoissonTensor {
    pub kind: TensorKind,
    pub params: Params,
}

impl PoissonTensor {
    pub fn new(kind: TensorKind, params: Params) -> Self {
        PoissonTensor { kind, params }
    }
}

/// Turn a cotangent pair into a tangent pair.
pub fn apply_tensor(t: &PoissonTensor, cot: (&Field, &Field)) -> Result<(Field, Field)> {
    let (a, b) = cot;
    a.check_same_grid(b)?;
    match t.kind {
        TensorKind::JCanonical => Ok((b.clone(), a.scale(-1.0))),
        TensorKind::JTilde => Ok((derivative(b)?.scale(-1.0), derivative(a)?.scale(-1.0))),
        TensorKind::JMu => {
            let fa = apply_multiplier(&MultiplierSymbol::Fmu, &derivative(a)?, &t.params)?;
            let fb = apply_multiplier(&MultiplierSymbol::Fmu, &derivative(b)?, &t.params)?;
            Ok((fa.scale(-0.5), fb.scale(0.5)))
        }
        TensorKind::JSimp => Ok((derivative(a)?.scale(-0.5), derivative(b)?.scale(0.5))),
    }
}

/// Lie bracket {F, G} = <grad F, T grad G> by quadrature.
pub fn lie_bracket(
    f: &Functional,
    g: &Functional,
    state: &ModelState,
    tensor: &PoissonTensor,
) -> Result<f64> {
    let gf = gradient(f, state)?;
    let gg = gradient(g, state)?;
    let (gf1, gf2) = match &gf {
        ModelState::Diagonal { a, b } => (a, b),
        ModelState::SurfacePotential { zeta, psi } => (zeta, psi),
        _ => unreachable!(),
    };
    let (gg1, gg2) = match &gg {
        ModelState::Diagonal { a, b } => (a, b),
        ModelState::SurfacePotential { zeta, psi } => (zeta, psi),
        _ => unreachable!(),
    };
    let (t1, t2) = apply_tensor(tensor, (gg1, gg2))?;
    Ok(gf1.inner(&t1)? + gf2.inner(&t2)?)
}

/// Residual of the simplified homological equation and the mu-bracket gap.
#[derive(Debug, Clone, Copy)]
pub struct HomologicalReport {
    /// |{L, G}_simp + W| at (r, s).
    pub residual: f64,
    /// |{L, G}_mu - {L, G}_simp|, which scales O(mu).
    pub mu_gap: f64,
}

pub fn homological_residual(r: &Field, s: &Field, p: &Params) -> Result<HomologicalReport> {
    let state = ModelState::Diagonal { a: r.clone(), b: s.clone() };
    let l = Functional::new(FunctionalKind::LQuad, *p);
    let g = Functional::new(FunctionalKind::GAux, *p);
    let w = Functional::new(FunctionalKind::WCoupling, *p);
    let simp = PoissonTensor::new(TensorKind::JSimp, *p);
    let full = PoissonTensor::new(TensorKind::JMu, *p);
    let brace_simp = lie_bracket(&l, &g, &state, &simp)?;
    let brace_mu = lie_bracket(&l, &g, &state, &full)?;
    Ok(HomologicalReport {
        residual: (brace_simp + eval(&w, &state)?).abs(),
        mu_gap: (brace_mu - brace_simp).abs(),
    })
}

/// |H_BW(T_B(r,s)) - H_Wh(r,s)|: the eps^2 remainder of the normal form
/// (the cubic cancellation is algebraic, so no mu enters).
pub fn normal_form_defect(r: &Field, s: &Field, p: &Params) -> Result<f64> {
    let (rc, sc) = t_b(r, s, p)?;
    let h_bw = eval(
        &Functional::new(FunctionalKind::HBw, *p),
        &ModelState::Diagonal { a: rc, b: sc },
    )?;
    let h_wh = eval(
        &Functional::new(FunctionalKind::HWh, *p),
        &ModelState::Diagonal { a: r.clone(), b: s.clone() },
    )?;
    Ok((h_bw - h_wh).abs())
}

/// Hessian of the generator G at (r, s), applied to a direction pair.
/// Symmetric by construction (it is a second derivative).
fn generator_hessian(r: &Field, s: &Field, u: (&Field, &Field)) -> Result<(Field, Field)> {
    let (a, b) = u;
    let pa = anti_derivative_projected(&a.project_mean_zero());
    let pb = anti_derivative_projected(&b.project_mean_zero());
    let pr = anti_derivative_projected(&r.project_mean_zero());
    let ps = anti_derivative_projected(&s.project_mean_zero());
    let h1 = ps
        .mul(a)?
        .scale(-0.5)
        .add_scaled(-0.5, &r.mul(&pb)?)?
        .add_scaled(-0.5, &anti_derivative_projected(&s.mul(b)?.project_mean_zero()))?;
    let h2 = anti_derivative_projected(&r.mul(a)?.project_mean_zero())
        .scale(0.5)
        .add_scaled(0.5, &s.mul(&pa)?)?
        .add_scaled(0.5, &pr.mul(b)?)?;
    Ok((h1, h2))
}

fn j_simp(u: (&Field, &Field)) -> Result<(Field, Field)> {
    Ok((derivative(u.0)?.scale(-0.5), derivative(u.1)?.scale(0.5)))
}

/// DT_B = Id + eps J_simp Hess(G), the derivative of the canonical
/// normal-form map (equal to the printed Jacobian matrices on the line;
/// on the torus this form is what preserves the structure identity).
pub fn apply_normal_form_jacobian(
    r: &Field,
    s: &Field,
    p: &Params,
    u: (&Field, &Field),
) -> Result<(Field, Field)> {
    let h = generator_hessian(r, s, u)?;
    let jh = j_simp((&h.0, &h.1))?;
    Ok((u.0.add_scaled(p.eps, &jh.0)?, u.1.add_scaled(p.eps, &jh.1)?))
}

/// L^2-adjoint (DT_B)* = Id - eps Hess(G) J_simp.
pub fn apply_normal_form_jacobian_adjoint(
    r: &Field,
    s: &Field,
    p: &Params,
    u: (&Field, &Field),
) -> Result<(Field, Field)> {
    let ju = j_simp(u)?;
    let h = generator_hessian(r, s, (&ju.0, &ju.1))?;
    Ok((u.0.add_scaled(-p.eps, &h.0)?, u.1.add_scaled(-p.eps, &h.1)?))
}

/// || (DT_B) J_mu (DT_B)* U - J_mu U ||_{H^0 x H^0}: the structure
/// preservation defect, which scales O(mu eps + eps^2).
pub fn structure_defect(r: &Field, s: &Field, u: (&Field, &Field), p: &Params) -> Result<f64> {
    let jmu = PoissonTensor::new(TensorKind::JMu, *p);
    let star = apply_normal_form_jacobian_adjoint(r, s, p, u)?;
    let mid = apply_tensor(&jmu, (&star.0, &star.1))?;
    let out = apply_normal_form_jacobian(r, s, p, (&mid.0, &mid.1))?;
    let base = apply_tensor(&jmu, u)?;
    let d1 = norm_hs(&out.0.sub(&base.0)?, 0.0)?;
    let d2 = norm_hs(&out.1.sub(&base.1)?, 0.0)?;
    Ok((d1 * d1 + d2 * d2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::models::{rhs, ModelKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid() -> Arc<PeriodicGrid> {
        PeriodicGrid::new(128, 2.0 * PI).unwrap()
    }

    fn band_pair(g: &Arc<PeriodicGrid>, seed: u64, amp: f64) -> (Field, Field) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            Field::random_band_limited(g.clone(), &mut rng, 10, amp).unwrap(),
            Field::random_band_limited(g.clone(), &mut rng, 10, amp).unwrap(),
        )
    }

    fn diag(r: &Field, s: &Field) -> ModelState {
        ModelState::Diagonal { a: r.clone(), b: s.clone() }
    }

    #[test]
    fn zero_state_gives_zero_for_all_kinds() {
        let g = grid();
        let p = Params::new(0.4, 0.2).unwrap();
        let z2 = ModelState::SurfacePotential {
            zeta: Field::zeros(g.clone()),
            psi: Field::zeros(g.clone()),
        };
        let d2 = ModelState::Diagonal { a: Field::zeros(g.clone()), b: Field::zeros(g.clone()) };
        for kind in [FunctionalKind::HWw, FunctionalKind::H0EpsH1] {
            assert_eq!(eval(&Functional::new(kind, p), &z2).unwrap(), 0.0);
        }
        for kind in [
            FunctionalKind::HBw,
            FunctionalKind::HWh,
            FunctionalKind::LQuad,
            FunctionalKind::ZCubic,
            FunctionalKind::WCoupling,
            FunctionalKind::GAux,
        ] {
            assert_eq!(eval(&Functional::new(kind, p), &d2).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadratic_energy_of_sine() {
        let g = grid();
        let p = Params::new(0.4, 0.2).unwrap();
        let r = Field::from_fn(g.clone(), |x| x.sin());
        let s = Field::zeros(g);
        let v = eval(&Functional::new(FunctionalKind::LQuad, p), &diag(&r, &s)).unwrap();
        assert!((v - PI).abs() < 1e-12);
    }

    #[test]
    fn diagonal_energy_splits_into_parts() {
        let g = grid();
        let p = Params::new(0.3, 0.17).unwrap();
        let (r, s) = band_pair(&g, 3, 0.6);
        let st = diag(&r, &s);
        let total = eval(&Functional::new(FunctionalKind::HBw, p), &st).unwrap();
        let l = eval(&Functional::new(FunctionalKind::LQuad, p), &st).unwrap();
        let z = eval(&Functional::new(FunctionalKind::ZCubic, p), &st).unwrap();
        let w = eval(&Functional::new(FunctionalKind::WCoupling, p), &st).unwrap();
        assert!((total - (l + p.eps * z + p.eps * w)).abs() < 1e-12 * (1.0 + total.abs()));
        let wh = eval(&Functional::new(FunctionalKind::HWh, p), &st).unwrap();
        assert!((wh - (l + p.eps * z)).abs() < 1e-12 * (1.0 + wh.abs()));
    }

    fn fd_check(f: &Functional, state: &ModelState, seed: u64, rel_tol: f64) {
        let g = state.components()[0].grid().clone();
        let grad = gradient(f, state).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grad_scale: f64 = grad
            .components()
            .iter()
            .map(|c| norm_hs(c, 0.0).unwrap().powi(2))
            .sum::<f64>()
            .sqrt();
        for _ in 0..8 {
            let da = Field::random_band_limited(g.clone(), &mut rng, 10, 1.0).unwrap();
            let db = Field::random_band_limited(g.clone(), &mut rng, 10, 1.0).unwrap();
            let dir = state.same_chart_pair(da, db);
            let h = 1e-5;
            let plus = state.add_scaled(h, &dir).unwrap();
            let minus = state.add_scaled(-h, &dir).unwrap();
            let fd = (eval(f, &plus).unwrap() - eval(f, &minus).unwrap()) / (2.0 * h);
            let an: f64 = grad
                .components()
                .iter()
                .zip(dir.components())
                .map(|(gc, dc)| gc.inner(dc).unwrap())
                .sum();
            let dir_scale: f64 = dir
                .components()
                .iter()
                .map(|c| norm_hs(c, 0.0).unwrap().powi(2))
                .sum::<f64>()
                .sqrt();
            let denom = (grad_scale * dir_scale).max(1e-300);
            assert!(
                (fd - an).abs() / denom <= rel_tol,
                "{:?}: fd {fd} vs analytic {an} (denom {denom})",
                f.kind
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = grid();
        let p = Params::new(0.1, 0.05).unwrap();
        let (r, s) = band_pair(&g, 5, 0.4);
        let dstate = diag(&r, &s);
        for kind in [
            FunctionalKind::LQuad,
            FunctionalKind::ZCubic,
            FunctionalKind::WCoupling,
            FunctionalKind::HWh,
            FunctionalKind::HBw,
            FunctionalKind::GAux,
        ] {
            fd_check(&Functional::new(kind, p), &dstate, 77, 1e-9);
        }
        let (zeta, psi) = band_pair(&g, 6, 0.4);
        let sstate = ModelState::SurfacePotential { zeta, psi };
        fd_check(&Functional::new(FunctionalKind::H0EpsH1, p), &sstate, 78, 1e-9);
        // closed-form water-waves gradient against the truncated eval:
        // the truncation-induced gap is mu eps^3-suppressed.
        fd_check(
            &Functional::with_dno(FunctionalKind::HWw, p, DnoConfig::exact_products(2)),
            &sstate,
            79,
            1e-6,
        );
    }

    #[test]
    fn simple_gradients_are_exact() {
        let g = grid();
        let p = Params::new(0.4, 0.2).unwrap();
        let (r, s) = band_pair(&g, 9, 0.5);
        let st = diag(&r, &s);
        match gradient(&Functional::new(FunctionalKind::LQuad, p), &st).unwrap() {
            ModelState::Diagonal { a, b } => {
                assert!(a.sub(&r.scale(2.0)).unwrap().norm_inf() < 1e-15);
                assert!(b.sub(&s.scale(2.0)).unwrap().norm_inf() < 1e-15);
            }
            _ => unreachable!(),
        }
        match gradient(&Functional::new(FunctionalKind::ZCubic, p), &st).unwrap() {
            ModelState::Diagonal { a, b } => {
                assert!(a.sub(&r.mul(&r).unwrap().scale(1.5)).unwrap().norm_inf() < 1e-15);
                assert!(b.sub(&s.mul(&s).unwrap().scale(1.5)).unwrap().norm_inf() < 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn shallow_energy_through_t_d_equals_diagonal_energy() {
        // the (zeta, v = dx psi) rewrite of H_0 + eps H_1 evaluated at
        // T_D(r, s) coincides with H_BW(r, s)
        let g = grid();
        let p = Params::new(0.35, 0.18).unwrap();
        let (r, s) = band_pair(&g, 61, 0.5);
        let (zeta, v) = crate::transforms::t_d(&r, &s, &p).unwrap();
        let w = apply_multiplier(&MultiplierSymbol::Fmu, &v, &p).unwrap();
        let w2 = w.mul(&w).unwrap();
        let tilde = 0.5 * zeta.mul(&zeta).unwrap().integral()
            + 0.5 * w2.integral()
            + 0.5 * p.eps * zeta.inner(&w2).unwrap();
        let hbw = eval(&Functional::new(FunctionalKind::HBw, p), &diag(&r, &s)).unwrap();
        assert!((tilde - hbw).abs() < 1e-10 * (1.0 + hbw.abs()), "{tilde} vs {hbw}");
    }

    #[test]
    fn eval_rejects_wrong_chart() {
        let g = grid();
        let p = Params::new(0.2, 0.1).unwrap();
        let (r, s) = band_pair(&g, 63, 0.4);
        let st = ModelState::SurfacePotential { zeta: r, psi: s };
        assert!(matches!(
            eval(&Functional::new(FunctionalKind::HBw, p), &st),
            Err(Error::ChartMismatch { .. })
        ));
    }

    #[test]
    fn tensors_are_skew_adjoint() {
        let g = grid();
        let p = Params::new(0.6, 0.3).unwrap();
        let (a, b) = band_pair(&g, 13, 1.0);
        let (c, d) = band_pair(&g, 14, 1.0);
        for kind in [TensorKind::JCanonical, TensorKind::JTilde, TensorKind::JMu, TensorKind::JSimp] {
            let t = PoissonTensor::new(kind, p);
            let tu = apply_tensor(&t, (&a, &b)).unwrap();
            let tv = apply_tensor(&t, (&c, &d)).unwrap();
            let lhs = a.inner(&tv.0).unwrap() + b.inner(&tv.1).unwrap();
            let rhs_ = tu.0.inner(&c).unwrap() + tu.1.inner(&d).unwrap();
            assert!((lhs + rhs_).abs() < 1e-12 * (1.0 + lhs.abs()), "{kind:?}");
        }
    }

    #[test]
    fn canonical_tensor_and_mu_collapse() {
        let g = grid();
        let p = Params::new(0.0, 0.3).unwrap();
        let (a, b) = band_pair(&g, 15, 0.7);
        let (ca, cb) = apply_tensor(&PoissonTensor::new(TensorKind::JCanonical, p), (&a, &b)).unwrap();
        assert!(ca.sub(&b).unwrap().norm_inf() < 1e-15);
        assert!(cb.add(&a).unwrap().norm_inf() < 1e-15);
        // J_mu at mu = 0 equals J_simp
        let (m1, m2) = apply_tensor(&PoissonTensor::new(TensorKind::JMu, p), (&a, &b)).unwrap();
        let (s1, s2) = apply_tensor(&PoissonTensor::new(TensorKind::JSimp, p), (&a, &b)).unwrap();
        assert!(m1.sub(&s1).unwrap().norm_inf() < 1e-13);
        assert!(m2.sub(&s2).unwrap().norm_inf() < 1e-13);
    }

    #[test]
    fn bracket_of_functional_with_itself_vanishes() {
        let g = grid();
        let p = Params::new(0.4, 0.2).unwrap();
        let (r, s) = band_pair(&g, 17, 0.5);
        let st = diag(&r, &s);
        let l = Functional::new(FunctionalKind::LQuad, p);
        let t = PoissonTensor::new(TensorKind::JSimp, p);
        let v = lie_bracket(&l, &l, &st, &t).unwrap();
        assert!(v.abs() < 1e-12 * (1.0 + r.norm_l2().powi(2)));
        let hbw = Functional::new(FunctionalKind::HBw, p);
        let tmu = PoissonTensor::new(TensorKind::JMu, p);
        let v2 = lie_bracket(&hbw, &hbw, &st, &tmu).unwrap();
        assert!(v2.abs() < 1e-12 * (1.0 + r.norm_l2().powi(2)));
    }

    #[test]
    fn homological_identity_holds() {
        let g = grid();
        let p = Params::new(0.3, 0.2).unwrap();
        for seed in 0..6 {
            let (r, s) = band_pair(&g, 100 + seed, 0.8);
            let rep = homological_residual(&r, &s, &p).unwrap();
            let scale = 1.0 + r.norm_l2().powi(3) + s.norm_l2().powi(3);
            assert!(rep.residual <= 1e-10 * scale, "residual {}", rep.residual);
        }
    }

    #[test]
    fn mu_gap_halves_with_mu() {
        // the O(mu) bracket gap needs mu xi^2 small over the band
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let r = Field::random_band_limited(g.clone(), &mut rng, 5, 0.6).unwrap();
        let s = Field::random_band_limited(g.clone(), &mut rng, 5, 0.6).unwrap();
        let gap = |mu: f64| {
            homological_residual(&r, &s, &Params::new(mu, 0.2).unwrap()).unwrap().mu_gap
        };
        let ratio = gap(0.01) / gap(0.02);
        assert!((ratio - 0.5).abs() <= 0.15, "mu-gap ratio {ratio}");
    }

    #[test]
    fn exact_cancellation_identity() {
        // int r dx(r) D^{-1}(s) = -1/2 int r^2 s on mean-zero fields
        let g = grid();
        let (r, s) = band_pair(&g, 29, 0.7);
        let lhs = r
            .mul(&derivative(&r).unwrap())
            .unwrap()
            .inner(&anti_derivative_projected(&s))
            .unwrap();
        let rhs_ = -0.5 * r.mul(&r).unwrap().inner(&s).unwrap();
        assert!((lhs - rhs_).abs() < 1e-12 * (1.0 + rhs_.abs()));
    }

    #[test]
    fn normal_form_defect_quarters_under_eps_halving() {
        let g = grid();
        let (r, s) = band_pair(&g, 31, 0.25);
        let defect = |eps: f64| normal_form_defect(&r, &s, &Params::new(0.3, eps).unwrap()).unwrap();
        assert_eq!(defect(0.0), 0.0);
        let ratio = defect(0.1) / defect(0.05);
        assert!((ratio - 4.0).abs() <= 0.2, "defect ratio {ratio}");
        // mu-independence at fixed (r, s, eps)
        let d1 = normal_form_defect(&r, &s, &Params::new(0.9, 0.1).unwrap()).unwrap();
        let d2 = normal_form_defect(&r, &s, &Params::new(0.0, 0.1).unwrap()).unwrap();
        assert!((d1 - d2).abs() < 1e-12 * (1.0 + d1));
    }

    #[test]
    fn jacobian_adjoint_pairing_is_exact() {
        let g = grid();
        let p = Params::new(0.5, 0.2).unwrap();
        let (r, s) = band_pair(&g, 37, 0.4);
        let (a, b) = band_pair(&g, 38, 1.0);
        let (c, d) = band_pair(&g, 39, 1.0);
        let dv = apply_normal_form_jacobian(&r, &s, &p, (&a, &b)).unwrap();
        let du = apply_normal_form_jacobian_adjoint(&r, &s, &p, (&c, &d)).unwrap();
        let lhs = dv.0.inner(&c).unwrap() + dv.1.inner(&d).unwrap();
        let rhs_ = a.inner(&du.0).unwrap() + b.inner(&du.1).unwrap();
        assert!((lhs - rhs_).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn structure_defect_vanishes_at_eps_zero_and_scales() {
        let g = grid();
        let (r, s) = band_pair(&g, 41, 0.3);
        let (a, b) = band_pair(&g, 42, 1.0);
        let d0 = structure_defect(&r, &s, (&a, &b), &Params::new(0.3, 0.0).unwrap()).unwrap();
        assert_eq!(d0, 0.0);
        // mu -> 0 at fixed eps: defect/eps^2 stays bounded
        let base = structure_defect(&r, &s, (&a, &b), &Params::new(0.0, 0.1).unwrap()).unwrap();
        for mu in [0.05, 0.01, 0.001] {
            let d = structure_defect(&r, &s, (&a, &b), &Params::new(mu, 0.1).unwrap()).unwrap();
            assert!(d / 0.01 < 2.0 * (base / 0.01) + 1.0, "mu={mu}");
        }
    }

    #[test]
    fn hamilton_equations_match_pair_rhs() {
        // rhs(DecoupledWhithamPair) == J_mu grad(H_Wh) nodewise
        let g = grid();
        let p = Params::new(0.45, 0.22).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let r = Field::random_band_limited(g.clone(), &mut rng, 10, 0.5).unwrap();
        let s = Field::random_band_limited(g.clone(), &mut rng, 10, 0.5).unwrap();
        let st = diag(&r, &s);
        let tangent = rhs(ModelKind::DecoupledWhithamPair, &st, &p, &DnoConfig::exact_products(2)).unwrap();
        let grad = gradient(&Functional::new(FunctionalKind::HWh, p), &st).unwrap();
        let (g1, g2) = match &grad {
            ModelState::Diagonal { a, b } => (a, b),
            _ => unreachable!(),
        };
        let jg = apply_tensor(&PoissonTensor::new(TensorKind::JMu, p), (g1, g2)).unwrap();
        match tangent {
            ModelState::Diagonal { a, b } => {
                assert!(a.sub(&jg.0).unwrap().norm_inf() < 1e-12);
                assert!(b.sub(&jg.1).unwrap().norm_inf() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn hamilton_equations_match_water_waves_rhs() {
        // rhs(WaterWaves) == J_canonical grad(H_WW) (both closed form)
        let g = grid();
        let p = Params::new(0.2, 0.1).unwrap();
        let (zeta, psi) = band_pair(&g, 53, 0.4);
        let st = ModelState::SurfacePotential { zeta, psi };
        let cfg = DnoConfig::exact_products(2);
        let tangent = rhs(ModelKind::WaterWaves, &st, &p, &cfg).unwrap();
        let grad = gradient(&Functional::with_dno(FunctionalKind::HWw, p, cfg), &st).unwrap();
        let (g1, g2) = match &grad {
            ModelState::SurfacePotential { zeta, psi } => (zeta, psi),
            _ => unreachable!(),
        };
        let (j1, j2) = apply_tensor(&PoissonTensor::new(TensorKind::JCanonical, p), (g1, g2)).unwrap();
        match tangent {
            ModelState::SurfacePotential { zeta, psi } => {
                assert!(zeta.sub(&j1).unwrap().norm_inf() < 1e-12);
                assert!(psi.sub(&j2).unwrap().norm_inf() < 1e-12);
            }
            _ => unreachable!(),
        }
    }
}
