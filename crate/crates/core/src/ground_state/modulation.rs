//! Distance from a field pair to the orbit of a ground state under
//! translations and componentwise phase rotations, and a probe of the
//! quadratic control of that distance by the energy excess.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{energy, random_bumps, GroundStatePair};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};

/// Tolerance on `| ||Phi||_2 - ||R||_2 |` for the mass-sphere precondition.
pub const MASS_SPHERE_TOL: f64 = 1e-6;

/// Which norm and reference profile the orbit distance uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// Plain `H^1` against `r_i(x - y)` on the profile's own grid.
    Unit,
    /// `H_eps` against `r_i((x - y) / eps)` sampled on the field's grid.
    Semiclassical { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitFit {
    /// Squared distance to the orbit.
    pub gamma: f64,
    /// Optimal translation, in the coordinates of the field's grid.
    pub shift: f64,
    /// Optimal phases in `(-pi, pi]`.
    pub theta: [f64; 2],
}

pub(crate) fn wrap_phase(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Weighted inner products `S_i(d) = <g_i(. - d), phi_i>_W` for all shifts.
pub(crate) struct ShiftCorrelation {
    grid: Arc<Grid>,
    /// Spectral products `dx/n * w_j conj(g_hat_j) phi_hat_j` per component.
    products: [Vec<Complex64>; 2],
    /// `||phi||_W^2 + ||g||_W^2` summed over components.
    norms: f64,
}

impl ShiftCorrelation {
    /// `w_j = a + b k_j^2`, with the derivative term dropped at Nyquist.
    pub(crate) fn new(phi: [&ComplexField; 2], g: [&ComplexField; 2], a: f64, b: f64) -> Result<Self> {
        let grid = phi[0].grid().clone();
        for f in phi.iter().chain(g.iter()) {
            grid.check_same(f.grid())?;
        }
        let n = grid.len();
        let nyq = n / 2;
        let weights: Vec<f64> = grid
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(j, k)| if j == nyq { a } else { a + b * k * k })
            .collect();
        let scale = grid.dx() / n as f64;
        let mut norms = 0.0;
        let mut products: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let ph = phi[i].spectrum();
            let gh = g[i].spectrum();
            products[i] = (0..n).map(|j| scale * weights[j] * gh[j].conj() * ph[j]).collect();
            norms += (0..n)
                .map(|j| scale * weights[j] * (ph[j].norm_sqr() + gh[j].norm_sqr()))
                .sum::<f64>();
        }
        Ok(Self {
            grid,
            products,
            norms,
        })
    }

    /// Correlations at every whole-cell shift `m dx`.
    fn on_cells(&self) -> [Vec<Complex64>; 2] {
        let n = self.grid.len();
        let mut out: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            // inverse() divides by n; the products already carry dx/n
            let mut buf = self.products[i].clone();
            self.grid.inverse(&mut buf);
            out[i] = buf.into_iter().map(|c| c * n as f64).collect();
        }
        out
    }

    pub(crate) fn at(&self, d: f64) -> [Complex64; 2] {
        let k = self.grid.wavenumbers();
        let mut s = [Complex64::new(0.0, 0.0); 2];
        for (j, kj) in k.iter().enumerate() {
            let e = Complex64::from_polar(1.0, kj * d);
            s[0] += self.products[0][j] * e;
            s[1] += self.products[1][j] * e;
        }
        s
    }

    pub(crate) fn value(&self, s: [Complex64; 2]) -> f64 {
        (self.norms - 2.0 * (s[0].norm() + s[1].norm())).max(0.0)
    }

    /// Whole-cell scan followed by golden-section refinement within one cell.
    pub(crate) fn best_shift(&self) -> OrbitFit {
        let n = self.grid.len();
        let dx = self.grid.dx();
        let cells = self.on_cells();
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for m in 0..n {
            let v = cells[0][m].norm() + cells[1][m].norm();
            if v > best_val {
                best_val = v;
                best = m;
            }
        }
        let centre = if best < n / 2 {
            best as f64 * dx
        } else {
            (best as f64 - n as f64) * dx
        };
        let objective = |d: f64| {
            let s = self.at(d);
            s[0].norm() + s[1].norm()
        };
        let ratio = 0.5 * (5.0_f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (centre - dx, centre + dx);
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let mut fc = objective(c);
        let mut fd = objective(d);
        while hi - lo > 1e-10 * dx {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = objective(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = objective(d);
            }
        }
        let mut shift = 0.5 * (lo + hi);
        let mut s = self.at(shift);
        // keep the whole-cell answer when refinement cannot beat it
        if s[0].norm() + s[1].norm() < best_val {
            shift = centre;
            s = [cells[0][best], cells[1][best]];
        }
        OrbitFit {
            gamma: self.value(s),
            shift,
            theta: [wrap_phase(s[0].arg()), wrap_phase(s[1].arg())],
        }
    }
}

fn check_mass_sphere(phi: [&ComplexField; 2], target_mass: f64, weight: f64) -> Result<()> {
    let mass = weight * (phi[0].norm_sq() + phi[1].norm_sq());
    let gap = (mass.sqrt() - target_mass.sqrt()).abs();
    if gap > MASS_SPHERE_TOL {
        return Err(Error::Precondition(format!(
            "field norm differs from ground-state norm by {gap:.3e}"
        )));
    }
    Ok(())
}

/// Reference profiles `r_i((x - c)/eps)` sampled on `grid` by band-limited interpolation.
pub(crate) fn scaled_profiles(r: &GroundStatePair, grid: &Arc<Grid>, centre: f64, eps: f64) -> [ComplexField; 2] {
    [0, 1].map(|i| {
        let prof = r.profile(i);
        ComplexField::from_fn(grid, |x| Complex64::new(prof.eval((x - centre) / eps), 0.0))
    })
}

/// `inf over (theta1, theta2, y)` of the squared orbit distance, with its minimizer.
pub fn gamma_phi(phi1: &ComplexField, phi2: &ComplexField, r: &GroundStatePair, scaling: Scaling) -> Result<OrbitFit> {
    phi1.grid().check_same(phi2.grid())?;
    match scaling {
        Scaling::Unit => {
            r.grid().check_same(phi1.grid())?;
            check_mass_sphere([phi1, phi2], r.total_mass(), 1.0)?;
            let [g1, g2] = r.as_complex();
            ShiftCorrelation::new([phi1, phi2], [&g1, &g2], 1.0, 1.0).map(|c| c.best_shift())
        }
        Scaling::Semiclassical { eps } => {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("eps must be positive, got {eps}")));
            }
            check_mass_sphere([phi1, phi2], r.total_mass(), 1.0 / eps)?;
            let [g1, g2] = scaled_profiles(r, phi1.grid(), 0.0, eps);
            ShiftCorrelation::new([phi1, phi2], [&g1, &g2], 1.0 / eps, eps).map(|c| c.best_shift())
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeSample {
    pub gamma: f64,
    pub delta_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleSummary {
    pub scale: f64,
    pub samples: Vec<ProbeSample>,
    /// Samples dropped because `Gamma` exceeded the configured tube size.
    pub outside_tube: usize,
    /// Samples dropped because the energy excess was at roundoff level.
    pub degenerate: usize,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub ensemble: usize,
    pub scales: Vec<ScaleSummary>,
    /// Largest over smallest per-scale max ratio.
    pub ratio_spread: Option<f64>,
    /// `ratio_spread <= 3`; `None` when nothing could be measured.
    pub stable: Option<bool>,
}

/// Energy excesses at or below this are treated as `0/0` and excluded.
const DEGENERATE_EXCESS: f64 = 1e-13;
const STABILITY_FACTOR: f64 = 3.0;

/// Draws `ensemble` random complex `H^1` directions, applies them at scales
/// `s, s/2, s/4`, renormalizes to the mass sphere and records `(Gamma, dE)`.
pub fn modulational_stability_probe(
    r: &GroundStatePair,
    ensemble: usize,
    scale: f64,
    tube: f64,
    seed: u64,
) -> Result<ProbeReport> {
    if !(scale > 0.0) || !(tube > 0.0) {
        return Err(Error::Config("probe scale and tube size must be positive".into()));
    }
    let grid = r.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<[ComplexField; 2]> = (0..ensemble)
        .map(|_| {
            let h = [0, 1].map(|_| {
                let re = random_bumps(&mut rng, &grid, 4);
                let im = random_bumps(&mut rng, &grid, 4);
                ComplexField::from_values(
                    &grid,
                    re.values().iter().zip(im.values()).map(|(a, b)| Complex64::new(*a, *b)).collect(),
                )
                .expect("same grid")
            });
            let norm = (h[0].norm_sq() + h[0].gradient().norm_sq() + h[1].norm_sq() + h[1].gradient().norm_sq()).sqrt();
            h.map(|f| f.scaled(Complex64::new(1.0 / norm, 0.0)))
        })
        .collect();

    let base = r.as_complex();
    let target = r.total_mass();
    let mut scales = Vec::new();
    for level in 0..3 {
        let s = scale / f64::powi(2.0, level);
        let samples: Vec<Result<ProbeSample>> = directions
            .par_iter()
            .map(|h| {
                let u1 = base[0].add(&h[0].scaled(Complex64::new(s, 0.0)))?;
                let u2 = base[1].add(&h[1].scaled(Complex64::new(s, 0.0)))?;
                let k = Complex64::new((target / (u1.norm_sq() + u2.norm_sq())).sqrt(), 0.0);
                let (u1, u2) = (u1.scaled(k), u2.scaled(k));
                let fit = gamma_phi(&u1, &u2, r, Scaling::Unit)?;
                let de = energy(&u1, &u2, r.p(), r.beta())? - r.energy();
                Ok(ProbeSample {
                    gamma: fit.gamma,
                    delta_energy: de,
                })
            })
            .collect();
        let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
        if let Some(worst) = samples.iter().map(|p| p.delta_energy).reduce(f64::min) {
            if worst < -super::MINIMALITY_SLACK {
                return Err(Error::NotLocalMinimum { drop: -worst });
            }
        }
        let mut outside_tube = 0;
        let mut degenerate = 0;
        let mut max_ratio: Option<f64> = None;
        for p in &samples {
            if p.gamma > tube {
                outside_tube += 1;
            } else if p.delta_energy <= DEGENERATE_EXCESS {
                degenerate += 1;
            } else {
                let q = p.gamma / p.delta_energy;
                max_ratio = Some(max_ratio.map_or(q, |m: f64| m.max(q)));
            }
        }
        scales.push(ScaleSummary {
            scale: s,
            samples,
            outside_tube,
            degenerate,
            max_ratio,
        });
    }
    if ensemble == 0 {
        return Ok(ProbeReport {
            ensemble,
            scales: Vec::new(),
            ratio_spread: None,
            stable: None,
        });
    }
    let ratios: Vec<f64> = scales.iter().filter_map(|s| s.max_ratio).collect();
    let ratio_spread = (ratios.len() == scales.len()).then(|| {
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    });
    Ok(ProbeReport {
        ensemble,
        scales,
        ratio_spread,
        stable: ratio_spread.map(|q| q <= STABILITY_FACTOR),
    })
}
