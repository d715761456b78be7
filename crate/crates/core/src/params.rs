use crate::error::{Error, Result};

/// Default upper bound of the shallow-water regime rectangle in mu.
pub const DEFAULT_MU_MAX: f64 = 2.0;
/// Default non-cavitation floor for the water depth h = 1 + eps*zeta.
pub const DEFAULT_H_MIN: f64 = 0.25;

/// Mean-zero tolerance used by the strict antiderivative contract.
pub fn mean_tolerance(sup_norm: f64) -> f64 {
    1e-10 * (1.0 + sup_norm)
}

/// The regime pair (mu, eps) plus the depth floor; every model and
/// transform is parameterized by one of these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub mu: f64,
    pub eps: f64,
    pub mu_max: f64,
    pub h_min: f64,
}

impl Params {
    /// Parameters with the default regime bounds.
    pub fn new(mu: f64, eps: f64) -> Result<Self> {
        Self::with_bounds(mu, eps, DEFAULT_MU_MAX, DEFAULT_H_MIN)
    }

    pub fn with_bounds(mu: f64, eps: f64, mu_max: f64, h_min: f64) -> Result<Self> {
        if !mu_max.is_finite() || mu_max <= 0.0 {
            return Err(Error::InvalidArgument(format!("mu_max = {mu_max} must be positive")));
        }
        if !h_min.is_finite() || h_min <= 0.0 {
            return Err(Error::InvalidArgument(format!("h_min = {h_min} must be positive")));
        }
        if !(0.0..=mu_max).contains(&mu) || !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidArgument(format!(
                "(mu, eps) = ({mu}, {eps}) outside the regime rectangle [0,{mu_max}]x[0,1]"
            )));
        }
        Ok(Params { mu, eps, mu_max, h_min })
    }
}
