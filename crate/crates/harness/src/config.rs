//! Declarative experiment configuration (TOML; unknown keys are errors)
//! and the initial-data profiles.

use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use wwlab_core::field::Field;
use wwlab_core::grid::PeriodicGrid;
use wwlab_core::models::{Scheme, StepperConfig};
use wwlab_core::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ConsistencyDiag,
    ConsistencyWhitham,
    CorollaryOnesided,
    TheoremPipeline,
    HamiltonianSuite,
    TransformSuite,
    DispersionSuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ConsistencyDiag => "consistency_diag",
            ExperimentKind::ConsistencyWhitham => "consistency_whitham",
            ExperimentKind::CorollaryOnesided => "corollary_onesided",
            ExperimentKind::TheoremPipeline => "theorem_pipeline",
            ExperimentKind::HamiltonianSuite => "hamiltonian_suite",
            ExperimentKind::TransformSuite => "transform_suite",
            ExperimentKind::DispersionSuite => "dispersion_suite",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    #[serde(default = "default_mu_max")]
    pub mu_max: f64,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
}

fn default_mu_max() -> f64 {
    wwlab_core::params::DEFAULT_MU_MAX
}

fn default_h_min() -> f64 {
    wwlab_core::params::DEFAULT_H_MIN
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig { mu_max: default_mu_max(), h_min: default_h_min() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    /// "rk4" | "ifrk4"; omitted = per-model default
    #[serde(default)]
    pub scheme: Option<String>,
    /// omitted = min(1/eps, 1/mu, 50) per sweep row
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl_guard: f64,
}

fn default_cfl() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnoSection {
    #[serde(default = "default_order")]
    pub truncation_order: usize,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_order() -> usize {
    2
}

fn default_true() -> bool {
    true
}

impl Default for DnoSection {
    fn default() -> Self {
        DnoSection { truncation_order: 2, dealias: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Gaussian,
    Sech2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    pub profile: ProfileKind,
    pub amplitude: f64,
    pub width: f64,
    /// bump center as a fraction of the domain length
    #[serde(default = "default_center")]
    pub center: f64,
}

fn default_center() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid: GridConfig,
    /// (mu, eps) sweep rows
    pub params_grid: Vec<[f64; 2]>,
    pub stepper: StepperSection,
    pub initial_data: InitialDataConfig,
    #[serde(default)]
    pub regime: RegimeConfig,
    #[serde(default)]
    pub dno: DnoSection,
    #[serde(default = "default_seed")]
    pub seeds: u64,
    /// number of observation times per run
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// model for the `simulate` subcommand
    #[serde(default)]
    pub model: Option<String>,
    /// reference tier for the one-sided experiment:
    /// "diagonalized_system" (default, cheap) or "water_waves"
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceTier {
    DiagonalizedSystem,
    WaterWaves,
}

fn default_seed() -> u64 {
    1
}

fn default_snapshots() -> usize {
    11
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let grid = self.make_grid()?;
        if self.params_grid.is_empty() {
            bail!("params_grid must contain at least one (mu, eps) pair");
        }
        for &[mu, eps] in &self.params_grid {
            let p = self
                .make_params(mu, eps)
                .with_context(|| format!("pair (mu, eps) = ({mu}, {eps})"))?;
            // non-cavitation with margin >= 0.5 h_min above the floor
            let zeta0 = self.profile(&grid, 1.0, 0.0);
            let min_depth =
                zeta0.values().iter().fold(f64::INFINITY, |m, &z| m.min(1.0 + p.eps * z));
            if min_depth < 1.5 * p.h_min {
                bail!(
                    "initial amplitude breaks the non-cavitation margin at (mu, eps) = ({mu}, {eps}): min depth {min_depth} < 1.5 h_min"
                );
            }
        }
        if self.stepper.dt <= 0.0 {
            bail!("stepper.dt must be positive");
        }
        if let Some(s) = &self.stepper.scheme {
            parse_scheme(s)?;
        }
        self.reference_tier()?;
        if self.dno.truncation_order > wwlab_core::dno::MAX_TRUNCATION_ORDER {
            bail!("dno.truncation_order must be <= 3");
        }
        Ok(())
    }

    pub fn reference_tier(&self) -> anyhow::Result<ReferenceTier> {
        match self.reference.as_deref() {
            None | Some("diagonalized_system") => Ok(ReferenceTier::DiagonalizedSystem),
            Some("water_waves") => Ok(ReferenceTier::WaterWaves),
            Some(other) => bail!(
                "unknown reference tier {other:?} (expected \"diagonalized_system\" or \"water_waves\")"
            ),
        }
    }

    pub fn make_grid(&self) -> anyhow::Result<Arc<PeriodicGrid>> {
        PeriodicGrid::new(self.grid.n_points, self.grid.length).map_err(Into::into)
    }

    pub fn make_params(&self, mu: f64, eps: f64) -> anyhow::Result<Params> {
        Params::with_bounds(mu, eps, self.regime.mu_max, self.regime.h_min).map_err(Into::into)
    }

    pub fn dno_config(&self) -> wwlab_core::dno::DnoConfig {
        wwlab_core::dno::DnoConfig {
            truncation_order: self.dno.truncation_order,
            dealias: self.dno.dealias,
        }
    }

    /// Horizon for a sweep row: explicit t_end, else min(1/eps, 1/mu, 50).
    pub fn horizon(&self, mu: f64, eps: f64) -> f64 {
        match self.stepper.t_end {
            Some(t) => t,
            None => {
                let mut t = 50.0_f64;
                if eps > 0.0 {
                    t = t.min(1.0 / eps);
                }
                if mu > 0.0 {
                    t = t.min(1.0 / mu);
                }
                t
            }
        }
    }

    pub fn stepper_for(&self, default_scheme: Scheme, t_end: f64) -> StepperConfig {
        let scheme = match self.stepper.scheme.as_deref() {
            Some(s) => parse_scheme(s).expect("validated at load"),
            None => default_scheme,
        };
        StepperConfig { dt: self.stepper.dt, scheme, t_end, cfl_guard: self.stepper.cfl_guard }
    }

    /// The configured bump, mean-subtracted, centered at
    /// (center + center_shift) * length, scaled by `amp_scale`.
    pub fn profile(&self, grid: &Arc<PeriodicGrid>, amp_scale: f64, center_shift: f64) -> Field {
        self.profile_scaled(grid, amp_scale, 1.0, center_shift)
    }

    pub fn profile_scaled(
        &self,
        grid: &Arc<PeriodicGrid>,
        amp_scale: f64,
        width_scale: f64,
        center_shift: f64,
    ) -> Field {
        let a = self.initial_data.amplitude * amp_scale;
        let w = self.initial_data.width * width_scale;
        let x0 = (self.initial_data.center + center_shift) * grid.length();
        let f = match self.initial_data.profile {
            ProfileKind::Gaussian => {
                Field::from_fn(grid.clone(), move |x| a * (-((x - x0) / w).powi(2)).exp())
            }
            ProfileKind::Sech2 => Field::from_fn(grid.clone(), move |x| {
                let c = ((x - x0) / w).cosh();
                a / (c * c)
            }),
        };
        f.project_mean_zero()
    }

    /// Observation times 0..t_end (inclusive).
    pub fn observe_times(&self, t_end: f64) -> Vec<f64> {
        let n = self.snapshots.max(2);
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    /// Canonical TOML echo used for the run id.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config echo")
    }
}

pub fn parse_scheme(s: &str) -> anyhow::Result<Scheme> {
    match s {
        "rk4" => Ok(Scheme::Rk4),
        "ifrk4" => Ok(Scheme::Ifrk4),
        other => bail!("unknown scheme {other:?} (expected \"rk4\" or \"ifrk4\")"),
    }
}
