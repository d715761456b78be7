use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;

/// A real scalar function sampled on a [`PeriodicGrid`], with a lazily
/// computed (and race-benign) spectrum cache. Fields are immutable after
/// construction; every operation returns a new one.
#[derive(Clone)]
pub struct Field {
    grid: Arc<PeriodicGrid>,
    values: Arc<Vec<f64>>,
    spectrum: Arc<OnceLock<Vec<Complex64>>>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &*self.grid)
            .field("sup", &self.norm_inf())
            .finish()
    }
}

impl Field {
    pub fn from_values(grid: Arc<PeriodicGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidArgument(format!(
                "value count {} != grid size {}",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Field { grid, values: Arc::new(values), spectrum: Arc::new(OnceLock::new()) })
    }

    pub fn zeros(grid: Arc<PeriodicGrid>) -> Self {
        let n = grid.n_points();
        Field { grid, values: Arc::new(vec![0.0; n]), spectrum: Arc::new(OnceLock::new()) }
    }

    pub fn from_fn(grid: Arc<PeriodicGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Field { grid, values: Arc::new(values), spectrum: Arc::new(OnceLock::new()) }
    }

    /// Build a real field from Fourier coefficients in FFT storage order.
    /// The coefficients are interpreted as Fourier-series coefficients
    /// (`f(x) = sum_k c_k e^{i xi_k x}`); Hermitian symmetry is enforced by
    /// discarding the imaginary part after synthesis.
    pub fn from_spectrum(grid: Arc<PeriodicGrid>, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.n_points() {
            return Err(Error::InvalidArgument("spectrum length != grid size".into()));
        }
        let mut buf = spectrum.clone();
        grid.fft_inverse(&mut buf);
        let values: Vec<f64> = buf.iter().map(|c| c.re).collect();
        let field = Field {
            grid,
            values: Arc::new(values),
            spectrum: Arc::new(OnceLock::new()),
        };
        let _ = field.spectrum.set(spectrum);
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fourier-series coefficients c_k = (1/n) sum_j f_j e^{-i xi_k x_j},
    /// computed once and shared between clones.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let n = self.grid.n_points();
            let mut buf: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.grid.fft_forward(&mut buf);
            let scale = 1.0 / n as f64;
            buf.iter_mut().for_each(|c| *c *= scale);
            buf
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { context, max_abs: f64::NAN })
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.n_points() as f64
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// Trapezoidal (= spectrally accurate) integral over one period.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// L^2(0, L) norm of the periodic extension.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()).sqrt()
    }

    /// L^2 inner product by quadrature.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.spacing())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_grid(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids"))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Field { grid: self.grid.clone(), values: Arc::new(values), spectrum: Arc::new(OnceLock::new()) }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Field { grid: self.grid.clone(), values: Arc::new(values), spectrum: Arc::new(OnceLock::new()) })
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Plain nodewise product (no dealiasing); see
    /// [`crate::spectral::pointwise_product`] for the dealiased variant.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add_scaled(&self, c: f64, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + c * b)
    }

    /// f - mean(f): projection onto the mean-zero subspace.
    pub fn project_mean_zero(&self) -> Field {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Random real field with modes 1..=k_max, mean-zero by construction,
    /// rescaled so the sup norm equals `amplitude`.
    pub fn random_band_limited(
        grid: Arc<PeriodicGrid>,
        rng: &mut impl Rng,
        k_max: usize,
        amplitude: f64,
    ) -> Result<Field> {
        let n = grid.n_points();
        if k_max == 0 || k_max >= n / 2 {
            return Err(Error::InvalidArgument(format!(
                "k_max = {k_max} outside 1..{}",
                n / 2 - 1
            )));
        }
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for k in 1..=k_max {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            spec[k] = c;
            spec[n - k] = c.conj();
        }
        let f = Field::from_spectrum(grid, spec)?;
        let sup = f.norm_inf();
        if sup == 0.0 {
            return Ok(f);
        }
        Ok(f.scale(amplitude / sup))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spectrum_round_trips() {
        let g = PeriodicGrid::new(32, 2.0 * PI).unwrap();
        let f = Field::from_fn(g.clone(), |x| (3.0 * x).cos() + 0.5 * x.sin());
        let back = Field::from_spectrum(g, f.spectrum().to_vec()).unwrap();
        let err: f64 = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12 * (1.0 + f.norm_inf()), "round trip error {err}");
    }

    #[test]
    fn hermitian_symmetry_of_real_field() {
        let g = PeriodicGrid::new(16, 1.0).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x).sin() + 0.3);
        let s = f.spectrum();
        for k in 1..8 {
            assert!((s[k] - s[16 - k].conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn random_fields_are_mean_zero() {
        let g = PeriodicGrid::new(64, 10.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        use rand::SeedableRng;
        let f = Field::random_band_limited(g, &mut rng, 8, 0.5).unwrap();
        assert!(f.mean().abs() < 1e-14);
        assert!((f.norm_inf() - 0.5).abs() < 1e-12);
    }
}
