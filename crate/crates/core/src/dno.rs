//! The Dirichlet-Neumann operator (1/mu) G^mu[eps zeta] psi as a truncated
//! Taylor expansion in the surface elevation, plus its first-order
//! shallow-water surrogate -dx(h F_mu^2 dx psi).
//!
//! Each expansion order is represented as a sum of operator chains built
//! from five atoms (the flat-surface operator S = F_mu^2 D^2, the
//! multipliers D^2 and dx, and multiplication by beta = eps*zeta or its
//! derivative). The chains are generated programmatically from the surface
//! Taylor recursion, so the flat term reduces to -dx(F_mu^2 dx psi) exactly
//! and every added order carries one extra factor of eps*zeta.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::params::Params;
use crate::spectral::fmu2_symbol;

pub const MAX_TRUNCATION_ORDER: usize = 3;

/// Truncation order and dealiasing policy for [`dno_apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnoConfig {
    /// Number of Taylor terms beyond the flat-bottom term (0..=3).
    pub truncation_order: usize,
    /// Apply the 2/3 rule to the assembled result.
    pub dealias: bool,
}

impl Default for DnoConfig {
    fn default() -> Self {
        DnoConfig { truncation_order: 2, dealias: true }
    }
}

impl DnoConfig {
    pub fn with_order(truncation_order: usize) -> Self {
        DnoConfig { truncation_order, dealias: true }
    }

    pub fn exact_products(truncation_order: usize) -> Self {
        DnoConfig { truncation_order, dealias: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Atom {
    /// F_mu^2 D^2 (symbol xi^2 tanh(sqrt(mu)|xi|)/(sqrt(mu)|xi|))
    S,
    /// D^2 (symbol xi^2)
    D2,
    /// d/dx (symbol i xi, Nyquist zeroed)
    Dx,
    /// multiply by beta = eps * zeta
    MulBeta,
    /// multiply by dx(beta)
    MulBetaX,
}

#[derive(Debug, Clone)]
struct ChainTerm {
    coef: f64,
    mu_pow: i32,
    /// Atoms in application order (first entry acts first on psi).
    atoms: Vec<Atom>,
}

/// Atoms and mu power of Z_j, defined by Z_{2k} = (mu D^2)^k and
/// Z_{2k+1} = (mu D^2)^k T with T = mu S.
fn z_mult(j: usize) -> (i32, Vec<Atom>) {
    let k = j / 2;
    if j.is_multiple_of(2) {
        (k as i32, vec![Atom::D2; k])
    } else {
        let mut atoms = vec![Atom::S];
        atoms.extend(std::iter::repeat_n(Atom::D2, k));
        (k as i32 + 1, atoms)
    }
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|i| i as f64).product()
}

/// Taylor coefficients f_m of the surface trace of the velocity potential:
/// f_m = -sum_{j=1..m} (beta^j / j!) Z_j f_{m-j}, f_0 = psi.
fn build_trace_terms(m_max: usize) -> Vec<Vec<ChainTerm>> {
    let mut fs: Vec<Vec<ChainTerm>> = vec![vec![ChainTerm { coef: 1.0, mu_pow: 0, atoms: vec![] }]];
    for m in 1..=m_max {
        let mut terms = Vec::new();
        for j in 1..=m {
            let (mp, zat) = z_mult(j);
            let fac = -1.0 / factorial(j);
            for t in &fs[m - j] {
                let mut atoms = t.atoms.clone();
                atoms.extend_from_slice(&zat);
                atoms.extend(std::iter::repeat_n(Atom::MulBeta, j));
                terms.push(ChainTerm { coef: t.coef * fac, mu_pow: t.mu_pow + mp, atoms });
            }
        }
        fs.push(terms);
    }
    fs
}

/// Chains for (1/mu) G_n, n = 0..=m_max, from
/// G_n = sum_j (beta^j/j!) Z_{j+1} f_{n-j}
///       - mu beta_x sum_j (beta^j/j!) Z_j dx f_{n-1-j}.
fn build_orders(m_max: usize) -> Vec<Vec<ChainTerm>> {
    let fs = build_trace_terms(m_max);
    let mut orders = Vec::with_capacity(m_max + 1);
    for n in 0..=m_max {
        let mut terms = Vec::new();
        for j in 0..=n {
            let (mp, zat) = z_mult(j + 1);
            let fac = 1.0 / factorial(j);
            for t in &fs[n - j] {
                let mut atoms = t.atoms.clone();
                atoms.extend_from_slice(&zat);
                atoms.extend(std::iter::repeat_n(Atom::MulBeta, j));
                terms.push(ChainTerm {
                    coef: t.coef * fac,
                    mu_pow: t.mu_pow + mp - 1,
                    atoms,
                });
            }
        }
        for j in 0..n {
            let (mp, zat) = z_mult(j);
            let fac = -1.0 / factorial(j);
            for t in &fs[n - 1 - j] {
                let mut atoms = t.atoms.clone();
                atoms.push(Atom::Dx);
                atoms.extend_from_slice(&zat);
                atoms.extend(std::iter::repeat_n(Atom::MulBeta, j));
                atoms.push(Atom::MulBetaX);
                terms.push(ChainTerm {
                    coef: t.coef * fac,
                    // explicit mu prefactor of the normal-tilt term, then 1/mu
                    mu_pow: t.mu_pow + mp + 1 - 1,
                    atoms,
                });
            }
        }
        debug_assert!(terms.iter().all(|t| t.mu_pow >= 0));
        orders.push(terms);
    }
    orders
}

fn expansion() -> &'static Vec<Vec<ChainTerm>> {
    static EXPANSION: OnceLock<Vec<Vec<ChainTerm>>> = OnceLock::new();
    EXPANSION.get_or_init(|| build_orders(MAX_TRUNCATION_ORDER))
}

struct ChainContext {
    s_symbol: Vec<f64>,
    d2_symbol: Vec<f64>,
    dx_symbol: Vec<Complex64>,
    beta: Field,
    beta_x: Field,
}

impl ChainContext {
    fn new(zeta: &Field, p: &Params) -> Result<Self> {
        let grid = zeta.grid();
        let nyq = grid.nyquist_index();
        let s_symbol = grid
            .frequencies()
            .iter()
            .map(|&xi| xi * xi * fmu2_symbol(xi, p.mu))
            .collect();
        let d2_symbol = grid.frequencies().iter().map(|&xi| xi * xi).collect();
        let dx_symbol = grid
            .frequencies()
            .iter()
            .enumerate()
            .map(|(j, &xi)| if j == nyq { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, xi) })
            .collect();
        let beta = zeta.scale(p.eps);
        let beta_x = crate::spectral::derivative(&beta)?;
        Ok(ChainContext { s_symbol, d2_symbol, dx_symbol, beta, beta_x })
    }

    fn apply_real_symbol(&self, sym: &[f64], f: &Field) -> Field {
        let spec: Vec<Complex64> =
            f.spectrum().iter().zip(sym).map(|(c, &s)| c * s).collect();
        Field::from_spectrum(f.grid().clone(), spec).expect("same grid")
    }

    fn apply_atom(&self, a: Atom, f: &Field) -> Field {
        match a {
            Atom::S => self.apply_real_symbol(&self.s_symbol, f),
            Atom::D2 => self.apply_real_symbol(&self.d2_symbol, f),
            Atom::Dx => {
                let spec: Vec<Complex64> =
                    f.spectrum().iter().zip(&self.dx_symbol).map(|(c, s)| c * s).collect();
                Field::from_spectrum(f.grid().clone(), spec).expect("same grid")
            }
            Atom::MulBeta => self.beta.mul(f).expect("same grid"),
            Atom::MulBetaX => self.beta_x.mul(f).expect("same grid"),
        }
    }

    fn apply_terms(&self, terms: &[ChainTerm], psi: &Field, mu: f64) -> Field {
        let mut acc = Field::zeros(psi.grid().clone());
        for t in terms {
            let weight = t.coef * mu.powi(t.mu_pow);
            if weight == 0.0 {
                continue;
            }
            let mut g = psi.clone();
            for &a in &t.atoms {
                g = self.apply_atom(a, &g);
            }
            acc = acc.add_scaled(weight, &g).expect("same grid");
        }
        acc
    }
}

/// Check 1 + eps*zeta >= h_min at every node; returns the minimum depth.
pub fn check_non_cavitation(zeta: &Field, p: &Params, context: &'static str) -> Result<f64> {
    let min_depth = zeta
        .values()
        .iter()
        .fold(f64::INFINITY, |m, &z| m.min(1.0 + p.eps * z));
    if min_depth < p.h_min || !min_depth.is_finite() {
        Err(Error::CavitationViolated { min_depth, h_min: p.h_min, context })
    } else {
        Ok(min_depth)
    }
}

/// (1/mu) G^mu[eps zeta] psi, truncated at `cfg.truncation_order` Taylor
/// terms beyond the flat-surface operator. Only dx(psi) enters; the mean of
/// psi is subtracted internally, and the result has mean zero (no net flux
/// through a graph over a flat bottom).
pub fn dno_apply(zeta: &Field, psi: &Field, p: &Params, cfg: &DnoConfig) -> Result<Field> {
    if cfg.truncation_order > MAX_TRUNCATION_ORDER {
        return Err(Error::TruncationUnsupported { m: cfg.truncation_order });
    }
    zeta.check_same_grid(psi)?;
    zeta.ensure_finite("dno_apply zeta")?;
    psi.ensure_finite("dno_apply psi")?;
    check_non_cavitation(zeta, p, "dno_apply")?;
    let psi0 = psi.project_mean_zero();
    let ctx = ChainContext::new(zeta, p)?;
    let mut out = Field::zeros(psi.grid().clone());
    for terms in expansion().iter().take(cfg.truncation_order + 1) {
        out = out.add(&ctx.apply_terms(terms, &psi0, p.mu))?;
    }
    if cfg.dealias {
        out = crate::spectral::dealias(&out);
    }
    out.ensure_finite("dno_apply output")?;
    Ok(out)
}

/// The single homogeneous order m of the expansion (test and diagnostics
/// hook; `dno_apply` sums orders 0..=M).
pub fn dno_order(zeta: &Field, psi: &Field, p: &Params, m: usize) -> Result<Field> {
    if m > MAX_TRUNCATION_ORDER {
        return Err(Error::TruncationUnsupported { m });
    }
    let psi0 = psi.project_mean_zero();
    let ctx = ChainContext::new(zeta, p)?;
    Ok(ctx.apply_terms(&expansion()[m], &psi0, p.mu))
}

/// First-order shallow-water surrogate -dx(h F_mu^2[dx psi]), h = 1 + eps zeta.
pub fn dno_shallow(zeta: &Field, psi: &Field, p: &Params) -> Result<Field> {
    zeta.check_same_grid(psi)?;
    check_non_cavitation(zeta, p, "dno_shallow")?;
    let px = crate::spectral::derivative(psi)?;
    let flux = crate::spectral::apply_multiplier(&crate::spectral::MultiplierSymbol::Fmu2, &px, p)?;
    let h = zeta.map(|z| 1.0 + p.eps * z);
    let neg = crate::spectral::derivative(&h.mul(&flux)?)?;
    Ok(neg.scale(-1.0))
}
