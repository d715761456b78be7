use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// The water column 1 + eps*zeta dropped below `h_min` somewhere.
    #[error("cavitation: min depth {min_depth} < h_min {h_min} ({context})")]
    CavitationViolated {
        min_depth: f64,
        h_min: f64,
        context: &'static str,
    },

    /// A field stopped being finite, or the blow-up detector tripped.
    #[error("non-finite field in {context} (max |value| = {max_abs})")]
    NonFinite { context: &'static str, max_abs: f64 },

    /// An operation that only exists on mean-zero fields was fed a field
    /// with a mean beyond its tolerance.
    #[error("non-zero mean {mean} (tolerance {tol}) in {context}")]
    NonZeroMean {
        mean: f64,
        tol: f64,
        context: &'static str,
    },

    /// Two fields on different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    /// A state was handed to a model or functional in the wrong chart.
    #[error("chart mismatch in {context}: expected {expected}, got {got}")]
    ChartMismatch {
        expected: &'static str,
        got: &'static str,
        context: &'static str,
    },

    /// The requested time step violates the CFL guard.
    #[error("CFL violated: dt = {dt} > allowed {dt_max}")]
    CflViolated { dt: f64, dt_max: f64 },

    /// Dirichlet-Neumann truncation orders above 3 are not implemented.
    #[error("unsupported DNO truncation order {m} (max 3)")]
    TruncationUnsupported { m: usize },

    /// Bad construction parameters (grid size, regime bounds, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
