use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform 1-D grid on a torus of the given length, together with its dual
/// frequency lattice and cached FFT plans.
pub struct PeriodicGrid {
    n_points: usize,
    length: f64,
    nodes: Vec<f64>,
    /// Frequencies xi_k = 2 pi k / length in FFT storage order
    /// (k = 0..n/2-1, then -n/2..-1).
    frequencies: Vec<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n_points", &self.n_points)
            .field("length", &self.length)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(n_points: usize, length: f64) -> Result<Arc<Self>> {
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "n_points = {n_points} must be even and >= 8"
            )));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidArgument(format!("length = {length} must be positive")));
        }
        let dx = length / n_points as f64;
        let nodes = (0..n_points).map(|j| j as f64 * dx).collect();
        let half = n_points / 2;
        let frequencies = (0..n_points)
            .map(|j| {
                let k = if j < half { j as i64 } else { j as i64 - n_points as i64 };
                2.0 * PI * k as f64 / length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n_points);
        let fft_inv = planner.plan_fft_inverse(n_points);
        Ok(Arc::new(PeriodicGrid { n_points, length, nodes, frequencies, fft_fwd, fft_inv }))
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Signed integer mode number of storage slot `j`.
    pub fn mode_number(&self, j: usize) -> i64 {
        let half = self.n_points / 2;
        if j < half { j as i64 } else { j as i64 - self.n_points as i64 }
    }

    /// Index of the (single, negative) Nyquist mode.
    pub fn nyquist_index(&self) -> usize {
        self.n_points / 2
    }

    pub fn same_grid(&self, other: &PeriodicGrid) -> bool {
        self.n_points == other.n_points && self.length == other.length
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64]) {
        self.fft_fwd.process(buf);
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.fft_inv.process(buf);
    }
}
