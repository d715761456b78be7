//! Report rows, log-log slope fitting, verdicts, and the CSV/JSON writers.
//!
//! CSV output is deterministic: rows are emitted in a fixed sort order and
//! floats use Rust's shortest round-trip formatting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One measurement row. `id` is the deterministic run id shared by every
/// row of a run; the full provenance tuple lives once in the report header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub mu: f64,
    pub eps: f64,
    pub t: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope_mu: Option<f64>,
    pub slope_eps: Option<f64>,
    pub slope_t: Option<f64>,
    pub half_width_mu: Option<f64>,
    pub half_width_eps: Option<f64>,
    pub half_width_t: Option<f64>,
    /// why a slope was withheld (dynamic range below one octave, ...)
    pub note: String,
}

impl SlopeFit {
    fn empty(note: &str) -> Self {
        SlopeFit {
            slope_mu: None,
            slope_eps: None,
            slope_t: None,
            half_width_mu: None,
            half_width_eps: None,
            half_width_t: None,
            note: note.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// failing inputs / measured values, or the measured value on success
    pub witness: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub grid_n_points: usize,
    pub grid_length: f64,
    pub stepper: String,
    pub seed: u64,
    pub code_version: String,
    pub run_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub provenance: Provenance,
    pub rows: Vec<Row>,
    pub fitted_slopes: BTreeMap<String, SlopeFit>,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl ScalingReport {
    pub fn new(provenance: Provenance) -> Self {
        ScalingReport {
            provenance,
            rows: Vec::new(),
            fitted_slopes: BTreeMap::new(),
            verdicts: BTreeMap::new(),
        }
    }

    pub fn push_row(&mut self, mu: f64, eps: f64, t: f64, metric: &str, value: f64) {
        self.rows.push(Row { mu, eps, t, metric: metric.to_string(), value });
    }

    pub fn set_verdict(&mut self, name: &str, pass: bool, witness: String) {
        self.verdicts.insert(name.to_string(), Verdict { pass, witness });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    /// Deterministic ordering: metric, then mu, eps, t.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.metric
                .cmp(&b.metric)
                .then(a.mu.total_cmp(&b.mu))
                .then(a.eps.total_cmp(&b.eps))
                .then(a.t.total_cmp(&b.t))
        });
    }

    /// CSV with the fixed header experiment,id,mu,eps,t,metric,value.
    /// Verdicts are appended as metric `verdict:<name>` with value 1/0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,id,mu,eps,t,metric,value\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.provenance.experiment,
                self.provenance.run_id,
                r.mu,
                r.eps,
                r.t,
                r.metric,
                r.value
            )
            .unwrap();
        }
        for (name, v) in &self.verdicts {
            writeln!(
                out,
                "{},{},0,0,0,verdict:{},{}",
                self.provenance.experiment,
                self.provenance.run_id,
                name,
                if v.pass { 1 } else { 0 }
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// One human-readable pass/fail line per verdict.
    pub fn verdict_lines(&self) -> String {
        let mut out = String::new();
        for (name, v) in &self.verdicts {
            writeln!(out, "{} {} ({})", if v.pass { "PASS" } else { "FAIL" }, name, v.witness)
                .unwrap();
        }
        out
    }
}

/// Least squares for y = X c; returns (coefficients, 2-sigma half-widths).
/// Dimensions are tiny (2-3 unknowns), so normal equations are fine.
fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    if n == 0 {
        return None;
    }
    let p = x[0].len();
    if n < p {
        return None;
    }
    // normal matrix and rhs
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for (xi, &yi) in x.iter().zip(y) {
        for j in 0..p {
            b[j] += xi[j] * yi;
            for k in 0..p {
                a[j][k] += xi[j] * xi[k];
            }
        }
    }
    // invert a by Gauss-Jordan (also gives (X^T X)^{-1} for the errors)
    let mut inv = vec![vec![0.0; p]; p];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut m = a.clone();
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let d = m[col][col];
        for k in 0..p {
            m[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..p {
            if r != col {
                let f = m[r][col];
                for k in 0..p {
                    m[r][k] -= f * m[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..p).map(|j| inv[j].iter().zip(&b).map(|(c, v)| c * v).sum()).collect();
    // residual variance
    let mut rss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let fit: f64 = xi.iter().zip(&coef).map(|(a, c)| a * c).sum();
        rss += (yi - fit) * (yi - fit);
    }
    let dof = (n - p).max(1) as f64;
    let sigma2 = rss / dof;
    let half: Vec<f64> = (0..p).map(|j| 2.0 * (sigma2 * inv[j][j]).sqrt()).collect();
    Some((coef, half))
}

/// Fit log(value) = c + a log(mu) + b log(eps) over strictly positive
/// samples. A per-axis slope is withheld when that axis spans less than
/// one octave.
pub fn fit_loglog_mu_eps(points: &[(f64, f64, f64)]) -> SlopeFit {
    let usable: Vec<_> = points
        .iter()
        .copied()
        .filter(|&(mu, eps, v)| mu > 0.0 && eps > 0.0 && v > 0.0 && v.is_finite())
        .collect();
    if usable.len() < 3 {
        return SlopeFit::empty("fewer than 3 usable points");
    }
    let octave = |vals: Vec<f64>| -> bool {
        let max = vals.iter().copied().fold(f64::MIN, f64::max);
        let min = vals.iter().copied().fold(f64::MAX, f64::min);
        max / min >= 2.0
    };
    let mu_ok = octave(usable.iter().map(|p| p.0).collect());
    let eps_ok = octave(usable.iter().map(|p| p.1).collect());
    if !mu_ok && !eps_ok {
        return SlopeFit::empty("dynamic range below one octave on both axes");
    }
    // regress only on axes with real dynamic range
    type Col = Box<dyn Fn(&(f64, f64, f64)) -> f64>;
    let mut cols: Vec<Col> = vec![Box::new(|_| 1.0)];
    if mu_ok {
        cols.push(Box::new(|p: &(f64, f64, f64)| p.0.ln()));
    }
    if eps_ok {
        cols.push(Box::new(|p: &(f64, f64, f64)| p.1.ln()));
    }
    let x: Vec<Vec<f64>> = usable.iter().map(|p| cols.iter().map(|c| c(p)).collect()).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.2.ln()).collect();
    match least_squares(&x, &y) {
        Some((coef, half)) => {
            let mut fit = SlopeFit::empty("");
            let mut idx = 1;
            if mu_ok {
                fit.slope_mu = Some(coef[idx]);
                fit.half_width_mu = Some(half[idx]);
                idx += 1;
            } else {
                fit.note = "mu range below one octave".to_string();
            }
            if eps_ok {
                fit.slope_eps = Some(coef[idx]);
                fit.half_width_eps = Some(half[idx]);
            } else {
                fit.note = "eps range below one octave".to_string();
            }
            fit
        }
        None => SlopeFit::empty("degenerate least squares"),
    }
}

/// Fit log(value) = c + a log(scale) on one swept scale (e.g. along the
/// diagonal mu = eps); returns (slope, half-width).
pub fn fit_loglog_1d(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let usable: Vec<_> = points
        .iter()
        .copied()
        .filter(|&(s, v)| s > 0.0 && v > 0.0 && v.is_finite())
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let max = usable.iter().map(|p| p.0).fold(f64::MIN, f64::max);
    let min = usable.iter().map(|p| p.0).fold(f64::MAX, f64::min);
    if max / min < 2.0 {
        return None;
    }
    let x: Vec<Vec<f64>> = usable.iter().map(|p| vec![1.0, p.0.ln()]).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    least_squares(&x, &y).map(|(c, h)| (c[1], h[1]))
}

/// Fit value = a + b t; returns (a, b).
pub fn fit_linear_in_t(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let x: Vec<Vec<f64>> = points.iter().map(|p| vec![1.0, p.0]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    least_squares(&x, &y).map(|(c, _)| (c[0], c[1]))
}

/// FNV-1a over the config echo: a deterministic run id.
pub fn run_id(material: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in material.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}
