//! Changes of variables between the coordinate charts of the model
//! hierarchy: the Riemann-invariant map and its reconstruction, the
//! diagonal map and inverse, the near-identity normal-form map and its
//! approximate inverse, and the integration map.
//!
//! Gauge conventions on the torus: psi is fixed in the mean-zero gauge
//! (the whole-line convention differs by a constant no equation sees), and every
//! interior antiderivative acts on the mean-projected argument. The
//! composite maps therefore accept fields whose means are merely small
//! (the normal-form inverse genuinely produces means of size
//! O(eps * mean(w^2))); gross violations still error.

use crate::dno::check_non_cavitation;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::params::Params;
use crate::spectral::{
    anti_derivative_projected, apply_multiplier, derivative, MultiplierSymbol,
};

/// Coordinate charts a pair of fields can live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// (zeta, psi): elevation and surface potential.
    SurfacePotential,
    /// (zeta, v): elevation and a velocity-type field.
    SurfaceVelocity,
    /// (a, b): characteristic variables, (u+, u-) or (r, s).
    Diagonal,
}

/// Misuse threshold for fields feeding an interior antiderivative.
fn guard_small_mean(f: &Field, context: &'static str) -> Result<()> {
    let mean = f.mean();
    let tol = 1e-3 * (1.0 + f.norm_inf());
    if mean.abs() > tol {
        Err(Error::NonZeroMean { mean, tol, context })
    } else {
        Ok(())
    }
}

fn fmu(f: &Field, p: &Params) -> Result<Field> {
    apply_multiplier(&MultiplierSymbol::Fmu, f, p)
}

fn fmu_inv(f: &Field, p: &Params) -> Result<Field> {
    apply_multiplier(&MultiplierSymbol::FmuInv, f, p)
}

/// SurfaceVelocity -> Diagonal: u± = ±(sqrt(h)-1)/eps + F_mu^{-1}(v)/2,
/// with the cancellation-free form (sqrt(h)-1)/eps = zeta/(1+sqrt(h)).
pub fn riemann_map(zeta: &Field, v: &Field, p: &Params) -> Result<(Field, Field)> {
    zeta.check_same_grid(v)?;
    check_non_cavitation(zeta, p, "riemann_map")?;
    let half_w = fmu_inv(v, p)?.scale(0.5);
    let eps = p.eps;
    let bore = zeta.map(|z| z / (1.0 + (1.0 + eps * z).sqrt()));
    let u_plus = bore.add(&half_w)?;
    let u_minus = bore.scale(-1.0).add(&half_w)?;
    Ok((u_plus, u_minus))
}

/// Diagonal -> SurfacePotential: zeta_c = (u+ - u-) + (eps/4)(u+ - u-)^2
/// (the expanded, 1/eps-free form), psi_c = the mean-zero primitive of
/// F_mu^{-1}(u+ + u-).
pub fn reconstruct_c(u_plus: &Field, u_minus: &Field, p: &Params) -> Result<(Field, Field)> {
    u_plus.check_same_grid(u_minus)?;
    let d = u_plus.sub(u_minus)?;
    let eps = p.eps;
    let sqrt_h_min = p.h_min.sqrt();
    let min_root = d.values().iter().fold(f64::INFINITY, |m, &x| m.min(eps * x / 2.0 + 1.0));
    if min_root < sqrt_h_min {
        return Err(Error::CavitationViolated {
            min_depth: min_root * min_root,
            h_min: p.h_min,
            context: "reconstruct_c",
        });
    }
    let zeta = d.map(|x| x + eps / 4.0 * x * x);
    let s = u_plus.add(u_minus)?;
    guard_small_mean(&s, "reconstruct_c(u+ + u-)")?;
    let psi = anti_derivative_projected(&fmu_inv(&s, p)?);
    Ok((zeta, psi))
}

/// SurfacePotential -> Diagonal: r, s = (zeta ± F_mu[dx psi]) / 2.
pub fn diag_forward(zeta: &Field, psi: &Field, p: &Params) -> Result<(Field, Field)> {
    zeta.check_same_grid(psi)?;
    zeta.ensure_finite("diag_forward zeta")?;
    let w = fmu(&derivative(psi)?, p)?;
    let r = zeta.add(&w)?.scale(0.5);
    let s = zeta.sub(&w)?.scale(0.5);
    Ok((r, s))
}

/// Diagonal -> SurfaceVelocity (v meaning dx psi here):
/// T_D(r,s) = (r + s, F_mu^{-1}[r - s]).
pub fn t_d(r: &Field, s: &Field, p: &Params) -> Result<(Field, Field)> {
    r.check_same_grid(s)?;
    Ok((r.add(s)?, fmu_inv(&r.sub(s)?, p)?))
}

/// Inverse of [`t_d`]: (zeta, v) -> ((zeta + F_mu(v))/2, (zeta - F_mu(v))/2).
pub fn t_d_inv(zeta: &Field, v: &Field, p: &Params) -> Result<(Field, Field)> {
    zeta.check_same_grid(v)?;
    let w = fmu(v, p)?;
    Ok((zeta.add(&w)?.scale(0.5), zeta.sub(&w)?.scale(0.5)))
}

/// The eps-correction of the normal-form map:
/// T~(r,s) = ( dx(r) D^{-1}(s)/4 + rs/4 + s^2/8 ,
///             dx(s) D^{-1}(r)/4 + rs/4 + r^2/8 ).
fn t_b_correction(r: &Field, s: &Field) -> Result<(Field, Field)> {
    let rx = derivative(r)?;
    let sx = derivative(s)?;
    let pr = anti_derivative_projected(r);
    let ps = anti_derivative_projected(s);
    let rs = r.mul(s)?;
    let first = rx.mul(&ps)?.scale(0.25).add(&rs.scale(0.25))?.add(&s.mul(s)?.scale(0.125))?;
    let second = sx.mul(&pr)?.scale(0.25).add(&rs.scale(0.25))?.add(&r.mul(r)?.scale(0.125))?;
    Ok((first, second))
}

/// The normal-form map T_B = Id + eps T~; exactly quadratic in (r, s) and
/// symmetric under swapping (r, s) with the two output slots.
pub fn t_b(r: &Field, s: &Field, p: &Params) -> Result<(Field, Field)> {
    r.check_same_grid(s)?;
    guard_small_mean(r, "t_b(r)")?;
    guard_small_mean(s, "t_b(s)")?;
    let (c1, c2) = t_b_correction(r, s)?;
    Ok((r.add_scaled(p.eps, &c1)?, s.add_scaled(p.eps, &c2)?))
}

/// Approximate inverse T_B^inv = Id - eps T~;
/// t_b(t_b_inv(eta, w)) = (eta, w) + O(eps^2).
pub fn t_b_inv(eta: &Field, w: &Field, p: &Params) -> Result<(Field, Field)> {
    eta.check_same_grid(w)?;
    guard_small_mean(eta, "t_b_inv(eta)")?;
    guard_small_mean(w, "t_b_inv(w)")?;
    let (c1, c2) = t_b_correction(eta, w)?;
    Ok((eta.add_scaled(-p.eps, &c1)?, w.add_scaled(-p.eps, &c2)?))
}

/// Directional derivative of [`t_b`] at (r, s) applied to (dr, ds); the
/// exact Jacobian of the map as implemented (chain rule for time
/// derivatives through the pipeline).
pub fn t_b_jacobian(
    r: &Field,
    s: &Field,
    p: &Params,
    dr: &Field,
    ds: &Field,
) -> Result<(Field, Field)> {
    let e4 = p.eps * 0.25;
    let first = dr
        .add_scaled(e4, &derivative(dr)?.mul(&anti_derivative_projected(s))?)?
        .add_scaled(e4, &derivative(r)?.mul(&anti_derivative_projected(ds))?)?
        .add_scaled(e4, &dr.mul(s)?.add(&r.mul(ds)?)?)?
        .add_scaled(e4, &s.mul(ds)?)?;
    let second = ds
        .add_scaled(e4, &derivative(ds)?.mul(&anti_derivative_projected(r))?)?
        .add_scaled(e4, &derivative(s)?.mul(&anti_derivative_projected(dr))?)?
        .add_scaled(e4, &dr.mul(s)?.add(&r.mul(ds)?)?)?
        .add_scaled(e4, &r.mul(dr)?)?;
    Ok((first, second))
}

/// SurfaceVelocity (v = dx psi) -> SurfacePotential: psi is the mean-zero
/// primitive of v.
pub fn t_i(zeta: &Field, v: &Field) -> Result<(Field, Field)> {
    zeta.check_same_grid(v)?;
    guard_small_mean(v, "t_i(v)")?;
    Ok((zeta.clone(), anti_derivative_projected(v)))
}

/// Inverse of [`t_i`]: (zeta, psi) -> (zeta, dx psi).
pub fn t_i_inv(zeta: &Field, psi: &Field) -> Result<(Field, Field)> {
    zeta.check_same_grid(psi)?;
    Ok((zeta.clone(), derivative(psi)?))
}

/// The full reconstruction T_I o T_D o T_B taking normal-form variables to
/// (zeta_Wh, psi_Wh).
pub fn pipeline_wh(r: &Field, s: &Field, p: &Params) -> Result<(Field, Field)> {
    let (rc, sc) = t_b(r, s, p)?;
    let (zeta, v) = t_d(&rc, &sc, p)?;
    t_i(&zeta, &v)
}
