//! Fourier-multiplier application, spectral derivatives, the mean-zero
//! antiderivative, Sobolev norms and (de)aliased products.
//!
//! Conventions: spectra are Fourier-series coefficients in FFT storage
//! order; odd symbols (i xi and its inverse) zero the unpaired Nyquist
//! mode so real fields stay real.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::params::{mean_tolerance, Params};

/// Evaluator of a custom multiplier symbol.
pub type SymbolFn = Arc<dyn Fn(f64, &Params) -> Complex64 + Send + Sync>;

/// The full-dispersion symbol squared: tanh(sqrt(mu)|xi|)/(sqrt(mu)|xi|),
/// with the removable singularity at xi = 0 (and the mu = 0 limit) set to 1.
pub fn fmu2_symbol(xi: f64, mu: f64) -> f64 {
    let a = mu.sqrt() * xi.abs();
    if a == 0.0 {
        1.0
    } else {
        a.tanh() / a
    }
}

/// F_mu(xi) = sqrt(tanh(sqrt(mu)|xi|)/(sqrt(mu)|xi|)).
pub fn fmu_symbol(xi: f64, mu: f64) -> f64 {
    fmu2_symbol(xi, mu).sqrt()
}

/// Fourier multipliers used throughout the model hierarchy.
#[derive(Clone)]
pub enum MultiplierSymbol {
    /// F_mu
    Fmu,
    /// F_mu^2
    Fmu2,
    /// 1/F_mu
    FmuInv,
    /// i xi (Nyquist zeroed)
    Derivative,
    /// 1/(i xi), zero mode annihilated (mean-zero gauge), Nyquist zeroed
    AntiDerivative,
    Identity,
    Custom(SymbolFn),
}

impl std::fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MultiplierSymbol::Fmu => "Fmu",
            MultiplierSymbol::Fmu2 => "Fmu2",
            MultiplierSymbol::FmuInv => "FmuInv",
            MultiplierSymbol::Derivative => "Derivative",
            MultiplierSymbol::AntiDerivative => "AntiDerivative",
            MultiplierSymbol::Identity => "Identity",
            MultiplierSymbol::Custom(_) => "Custom",
        };
        f.write_str(name)
    }
}

impl MultiplierSymbol {
    pub fn evaluate(&self, xi: f64, p: &Params) -> Complex64 {
        match self {
            MultiplierSymbol::Fmu => Complex64::new(fmu_symbol(xi, p.mu), 0.0),
            MultiplierSymbol::Fmu2 => Complex64::new(fmu2_symbol(xi, p.mu), 0.0),
            MultiplierSymbol::FmuInv => Complex64::new(1.0 / fmu_symbol(xi, p.mu), 0.0),
            MultiplierSymbol::Derivative => Complex64::new(0.0, xi),
            MultiplierSymbol::AntiDerivative => {
                if xi == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -1.0 / xi)
                }
            }
            MultiplierSymbol::Identity => Complex64::new(1.0, 0.0),
            MultiplierSymbol::Custom(f) => f(xi, p),
        }
    }

    fn zeroes_nyquist(&self) -> bool {
        matches!(self, MultiplierSymbol::Derivative | MultiplierSymbol::AntiDerivative)
    }
}

fn apply_symbol_values(f: &Field, sym: impl Fn(usize, f64) -> Complex64) -> Field {
    let grid = f.grid().clone();
    let spec = f.spectrum();
    let out: Vec<Complex64> = grid
        .frequencies()
        .iter()
        .enumerate()
        .map(|(j, &xi)| sym(j, xi) * spec[j])
        .collect();
    Field::from_spectrum(grid, out).expect("same grid size")
}

/// Apply a Fourier multiplier to a field: spectrum_k -> symbol(xi_k) * spectrum_k.
pub fn apply_multiplier(sym: &MultiplierSymbol, f: &Field, p: &Params) -> Result<Field> {
    f.ensure_finite("apply_multiplier input")?;
    if matches!(sym, MultiplierSymbol::AntiDerivative) {
        let mean = f.mean();
        let tol = mean_tolerance(f.norm_inf());
        if mean.abs() > tol {
            return Err(Error::NonZeroMean { mean, tol, context: "apply_multiplier(AntiDerivative)" });
        }
    }
    let nyq = f.grid().nyquist_index();
    let kill_nyq = sym.zeroes_nyquist();
    let out = apply_symbol_values(f, |j, xi| {
        if kill_nyq && j == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            sym.evaluate(xi, p)
        }
    });
    out.ensure_finite("apply_multiplier output")?;
    Ok(out)
}

/// Spectral d/dx (Nyquist mode zeroed).
pub fn derivative(f: &Field) -> Result<Field> {
    f.ensure_finite("derivative input")?;
    let nyq = f.grid().nyquist_index();
    Ok(apply_symbol_values(f, |j, xi| {
        if j == nyq { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, xi) }
    }))
}

/// The mean-zero primitive: spectrum divided by i xi away from the zero
/// mode, zero mode set to 0. Errors if the input mean exceeds the strict
/// gauge tolerance.
pub fn anti_derivative(f: &Field) -> Result<Field> {
    let mean = f.mean();
    let tol = mean_tolerance(f.norm_inf());
    if mean.abs() > tol {
        return Err(Error::NonZeroMean { mean, tol, context: "anti_derivative" });
    }
    Ok(anti_derivative_projected(f))
}

/// Zero-mode-annihilating primitive: the torus realization of the whole-line
/// line operator, defined on every field by first projecting out the mean.
/// Composite transforms use this one; the public contract with the strict
/// mean gate is [`anti_derivative`].
pub fn anti_derivative_projected(f: &Field) -> Field {
    let nyq = f.grid().nyquist_index();
    apply_symbol_values(f, |j, xi| {
        if j == 0 || j == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / xi)
        }
    })
}

/// Sobolev H^alpha norm: sqrt(L * sum_k (1 + xi_k^2)^alpha |c_k|^2), which
/// for alpha = 0 agrees with the continuum L^2 norm of the periodic
/// extension.
pub fn norm_hs(f: &Field, alpha: f64) -> Result<f64> {
    f.ensure_finite("norm_hs")?;
    let l = f.grid().length();
    let sum: f64 = f
        .grid()
        .frequencies()
        .iter()
        .zip(f.spectrum())
        .map(|(&xi, c)| (1.0 + xi * xi).powf(alpha) * c.norm_sqr())
        .sum();
    Ok((l * sum).sqrt())
}

/// Homogeneous-Sobolev seminorm of order alpha+1, computed as
/// norm_hs(derivative(f), alpha).
pub fn norm_hs_dot(f: &Field, alpha: f64) -> Result<f64> {
    norm_hs(&derivative(f)?, alpha)
}

/// Zero all modes with |k| > n/3 (the 2/3 rule).
pub fn dealias(f: &Field) -> Field {
    let n = f.grid().n_points();
    let cutoff = (n / 3) as i64;
    let grid = f.grid().clone();
    let spec: Vec<Complex64> = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(j, &c)| if grid.mode_number(j).abs() > cutoff { Complex64::new(0.0, 0.0) } else { c })
        .collect();
    Field::from_spectrum(grid, spec).expect("same grid size")
}

/// Nodewise product, optionally followed by 2/3-rule truncation of the
/// product spectrum.
pub fn pointwise_product(f: &Field, g: &Field, dealias_product: bool) -> Result<Field> {
    let prod = f.mul(g)?;
    Ok(if dealias_product { dealias(&prod) } else { prod })
}
