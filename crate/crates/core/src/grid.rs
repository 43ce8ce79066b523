//! Periodic one-dimensional grids with Fourier differentiation and quadrature.
//!
//! The domain is `[-L, L)` sampled at `n` equispaced nodes `x_m = -L + m dx`.
//! Spectra follow the unnormalized forward DFT convention of `rustfft`, taken
//! relative to the first node, with signed wavenumbers `k_j = pi j' / L`. The
//! Nyquist mode carries `+pi n / (2L)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Fraction of the half-length treated as the far field by the boundary guard.
pub const OUTER_FRACTION: f64 = 0.9;

pub struct Grid {
    half_length: f64,
    n: usize,
    dx: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n", &self.n)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid {
    pub fn new(half_length: f64, n: usize) -> Result<Arc<Grid>> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Config(format!(
                "grid half-length must be positive, got {half_length}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid point count must be a power of two >= 8, got {n}"
            )));
        }
        let dx = 2.0 * half_length / n as f64;
        let nodes = (0..n).map(|m| -half_length + m as f64 * dx).collect();
        let half = (n / 2) as i64;
        let wavenumbers = (0..n as i64)
            .map(|j| {
                let signed = if j > half { j - n as i64 } else { j };
                std::f64::consts::PI * signed as f64 / half_length
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            half_length,
            n,
            dx,
            nodes,
            wavenumbers,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the Nyquist mode.
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Inverse transform including the `1/n` normalization, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Node index of the mirror image `-x_m` (periodically identified).
    pub fn mirror_index(&self, m: usize) -> usize {
        (self.n - m) % self.n
    }

    /// True for nodes in the outer band `|x| > 0.9 L` watched by the boundary guard.
    pub fn is_outer(&self, x: f64) -> bool {
        x.abs() > OUTER_FRACTION * self.half_length
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "grid mismatch: (L={}, n={}) vs (L={}, n={})",
                self.half_length, self.n, other.half_length, other.n
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field has {} samples but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Builds a field from its (unnormalized) spectrum.
    pub fn from_spectrum(grid: &Arc<Grid>, mut spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::Usage("spectrum length does not match grid".into()));
        }
        grid.inverse(&mut spectrum);
        Ok(Self {
            grid: grid.clone(),
            values: spectrum,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        self.grid.forward(&mut buf);
        buf
    }

    fn spectral_multiply(&self, symbol: impl Fn(usize, f64) -> Complex64) -> Self {
        let mut buf = self.spectrum();
        for (j, (v, &k)) in buf.iter_mut().zip(self.grid.wavenumbers()).enumerate() {
            *v *= symbol(j, k);
        }
        self.grid.inverse(&mut buf);
        Self {
            grid: self.grid.clone(),
            values: buf,
        }
    }

    /// Spectral Laplacian: multiply the spectrum by `-k^2`.
    pub fn laplacian(&self) -> Self {
        self.spectral_multiply(|_, k| Complex64::new(-k * k, 0.0))
    }

    /// Spectral first derivative: multiply by `i k`, Nyquist mode dropped.
    pub fn gradient(&self) -> Self {
        let nyq = self.grid.nyquist();
        self.spectral_multiply(|j, k| {
            if j == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            }
        })
    }

    pub fn modulus_sq(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    /// `||f||_2^2` by rectangle quadrature.
    pub fn norm_sq(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `int conj(self) * other dx`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.dx())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Circular shift by whole mesh cells: `g(x) = f(x - cells * dx)`.
    pub fn shifted_cells(&self, cells: isize) -> Self {
        let n = self.values.len() as isize;
        let values = (0..n)
            .map(|m| self.values[(m - cells).rem_euclid(n) as usize])
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field has {} samples but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("real field contains non-finite samples".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Rectangle quadrature `dx * sum(values)`; spectrally accurate for smooth periodic data.
    pub fn integrate(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }

    pub fn laplacian(&self) -> RealField {
        self.to_complex().laplacian().real_part()
    }

    pub fn gradient(&self) -> RealField {
        self.to_complex().gradient().real_part()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self
                .grid
                .nodes()
                .iter()
                .zip(&self.values)
                .map(|(&x, &v)| f(x, v))
                .collect(),
        }
    }
}

impl ComplexField {
    pub fn real_part(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }
}

/// Free-function form of [`ComplexField::laplacian`].
pub fn laplacian(f: &ComplexField) -> ComplexField {
    f.laplacian()
}

/// Free-function form of [`ComplexField::gradient`].
pub fn gradient(f: &ComplexField) -> ComplexField {
    f.gradient()
}

/// Free-function form of [`RealField::integrate`].
pub fn integrate(f: &RealField) -> f64 {
    f.integrate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    #[test]
    fn mesh_width_and_first_node() {
        let g = Grid::new(10.0, 8).unwrap();
        assert_eq!(g.dx(), 2.5);
        assert_eq!(g.nodes()[0], -10.0);
        assert_eq!(g.dx() * g.len() as f64, 20.0);
        let g = Grid::new(20.0, 2048).unwrap();
        assert_eq!(g.dx(), 0.01953125);
    }

    #[test]
    fn unit_spacing_wavenumbers() {
        let g = Grid::new(PI, 8).unwrap();
        let mut ks: Vec<f64> = g.wavenumbers().iter().map(|k| k.round()).collect();
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ks, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        for k in g.wavenumbers() {
            assert!((k - k.round()).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(matches!(Grid::new(1.0, 12), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1.0, 4), Err(Error::Config(_))));
        assert!(matches!(Grid::new(0.0, 16), Err(Error::Config(_))));
        assert!(matches!(Grid::new(-2.0, 16), Err(Error::Config(_))));
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = Grid::new(10.0, 64).unwrap();
        let f = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        for v in f.laplacian().values() {
            assert!(v.norm() < 1e-12);
        }
        for v in f.gradient().values() {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn plane_waves_are_eigenfunctions() {
        let g = Grid::new(5.0, 128).unwrap();
        let k = g.wavenumbers()[7];
        let f = ComplexField::from_fn(&g, |x| Complex64::new(0.0, k * x).exp());
        let lap = f.laplacian();
        let grad = f.gradient();
        for ((l, d), v) in lap.values().iter().zip(grad.values()).zip(f.values()) {
            assert!((l - v * (-k * k)).norm() <= 1e-10 * k * k);
            assert!((d - v * Complex64::new(0.0, k)).norm() <= 1e-10 * k);
        }
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        // sin(3x) on [-pi, pi): second-order centered differences differ by O(dx^2).
        let mut errs = Vec::new();
        for n in [64usize, 128] {
            let g = Grid::new(PI, n).unwrap();
            let f = ComplexField::from_fn(&g, |x| Complex64::new((3.0 * x).sin(), 0.0));
            let lap = f.laplacian();
            let dx = g.dx();
            let vals = f.values();
            let err = (0..n)
                .map(|m| {
                    let fd = (vals[(m + 1) % n] - 2.0 * vals[m] + vals[(m + n - 1) % n]) / (dx * dx);
                    (fd - lap.values()[m]).norm()
                })
                .fold(0.0, f64::max);
            // leading FD error term is dx^2/12 * f'''' = 81/12 dx^2
            assert!(err <= 81.0 / 12.0 * dx * dx * 1.01, "err {err}");
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn gradient_of_sech_matches_analytic() {
        let g = Grid::new(20.0, 2048).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new(sech(SQRT_2 * x), 0.0));
        let d = f.gradient();
        let err = g
            .nodes()
            .iter()
            .zip(d.values())
            .map(|(&x, v)| (v.re + SQRT_2 * sech(SQRT_2 * x) * (SQRT_2 * x).tanh()).abs() + v.im.abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "sup error {err}");
    }

    #[test]
    fn quadrature_examples() {
        let g = Grid::new(10.0, 256).unwrap();
        assert!((RealField::from_fn(&g, |_| 1.0).integrate() - 20.0).abs() < 1e-12);
        let g = Grid::new(20.0, 2048).unwrap();
        let s2 = RealField::from_fn(&g, |x| sech(SQRT_2 * x).powi(2));
        assert!((s2.integrate() - 2.0 / SQRT_2).abs() < 1e-10);
        let mass = RealField::from_fn(&g, |x| 2.0 * sech(SQRT_2 * x).powi(2));
        assert!((integrate(&mass) - 2.0 * SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn mirror_index_is_an_involution() {
        let g = Grid::new(3.0, 16).unwrap();
        for m in 0..16 {
            assert_eq!(g.mirror_index(g.mirror_index(m)), m);
            let x = g.nodes()[m];
            let xm = g.nodes()[g.mirror_index(m)];
            assert!((x + xm).abs() < 1e-12 || (x + xm + 2.0 * 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn field_length_is_checked() {
        let g = Grid::new(1.0, 8).unwrap();
        assert!(ComplexField::from_values(&g, vec![Complex64::new(0.0, 0.0); 7]).is_err());
        assert!(RealField::from_values(&g, vec![f64::NAN; 8]).is_err());
    }
}
