//! Band-limited (trigonometric) interpolation of a stored profile.

use num_complex::Complex64;

use crate::grid::RealField;

/// Relative magnitude below which spectral coefficients are dropped.
const SPECTRUM_CUTOFF: f64 = 1e-15;
/// The rotation recurrence is re-seeded with an exact `sin_cos` this often.
const RESYNC: usize = 64;

/// Evaluates the trigonometric interpolant of a sampled profile at arbitrary
/// points. Outside the stored domain `[-L, L]` the profile is taken as zero.
#[derive(Debug, Clone)]
pub struct ProfileInterpolant {
    half_length: f64,
    dk: f64,
    inv_n: f64,
    /// Coefficients `c_j` for `j >= 0`, rotated to the origin at `x = 0`.
    positive: Vec<Complex64>,
    /// Coefficients for `j' = -1, -2, ...`.
    negative: Vec<Complex64>,
    nyquist: Option<Complex64>,
}

impl ProfileInterpolant {
    pub fn new(profile: &RealField) -> Self {
        let grid = profile.grid();
        let n = grid.len();
        let half_length = grid.half_length();
        let spectrum = profile.to_complex().spectrum();
        let k = grid.wavenumbers();
        // c_j = f_hat_j * exp(i k_j L) so that f(y) = (1/n) sum c_j exp(i k_j y)
        let rotated: Vec<Complex64> = spectrum
            .iter()
            .zip(k)
            .map(|(f, &kj)| f * Complex64::from_polar(1.0, kj * half_length))
            .collect();
        let max = rotated.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let keep = |c: &Complex64| c.norm() > SPECTRUM_CUTOFF * max;
        let half = n / 2;
        let last_pos = (1..half).rev().find(|&j| keep(&rotated[j])).unwrap_or(0);
        let last_neg = (1..half).rev().find(|&j| keep(&rotated[n - j])).unwrap_or(0);
        let positive = rotated[..=last_pos].to_vec();
        let negative = (1..=last_neg).map(|j| rotated[n - j]).collect();
        let nyquist = keep(&rotated[half]).then_some(rotated[half]);
        Self {
            half_length,
            dk: std::f64::consts::PI / half_length,
            inv_n: 1.0 / n as f64,
            positive,
            negative,
            nyquist,
        }
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Number of retained Fourier modes.
    pub fn modes(&self) -> usize {
        self.positive.len() + self.negative.len() + usize::from(self.nyquist.is_some())
    }

    pub fn eval(&self, y: f64) -> f64 {
        if !(y.abs() <= self.half_length) {
            return 0.0;
        }
        let step = Complex64::from_polar(1.0, self.dk * y);
        let mut acc = self.positive[0];
        let mut rot = Complex64::new(1.0, 0.0);
        let longest = (self.positive.len() - 1).max(self.negative.len());
        for j in 1..=longest {
            rot = if j % RESYNC == 0 {
                Complex64::from_polar(1.0, self.dk * y * j as f64)
            } else {
                rot * step
            };
            if j < self.positive.len() {
                acc += self.positive[j] * rot;
            }
            if j <= self.negative.len() {
                acc += self.negative[j - 1] * rot.conj();
            }
        }
        if let Some(c) = self.nyquist {
            let kn = self.dk * (1.0 / (2.0 * self.inv_n));
            acc += c * (kn * y).cos();
        }
        acc.re * self.inv_n
    }
}
