//! Strang-split spectral time stepping of the coupled semiclassical system
//!
//! ```text
//! i eps d_t phi1 = -eps^2/2 phi1'' + V phi1 - g1(|phi1|, |phi2|) phi1
//! i eps d_t phi2 = -eps^2/2 phi2'' + W phi2 - g2(|phi1|, |phi2|) phi2
//! ```
//!
//! The pointwise part preserves both moduli, so it is an exact phase
//! rotation; the kinetic part is exact in Fourier space.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::{coupling_coefficient, GroundStatePair};
use crate::grid::{ComplexField, Grid};
use crate::hamiltonian::{verlet_step, PhasePoint};
use crate::observables::modulated_family_member;
use crate::potential::Potential;

/// Default tolerated fraction of mass in the outer tenth of the domain.
pub const BOUNDARY_MASS_GUARD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct WavePair {
    pub phi1: ComplexField,
    pub phi2: ComplexField,
    pub eps: f64,
    pub p: f64,
    pub beta: f64,
    pub t: f64,
}

impl WavePair {
    pub fn new(phi1: ComplexField, phi2: ComplexField, eps: f64, p: f64, beta: f64, t: f64) -> Result<Self> {
        phi1.grid().check_same(phi2.grid())?;
        if !(eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        Ok(Self {
            phi1,
            phi2,
            eps,
            p,
            beta,
            t,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.phi1.grid()
    }

    pub fn component(&self, i: usize) -> &ComplexField {
        if i == 0 {
            &self.phi1
        } else {
            &self.phi2
        }
    }

    /// Rescaled masses `||phi_i||^2 / eps`.
    pub fn masses(&self) -> [f64; 2] {
        [self.phi1.norm_sq() / self.eps, self.phi2.norm_sq() / self.eps]
    }

    /// Fraction of the total mass sitting in `|x| > 0.9 L`.
    pub fn outer_mass_fraction(&self) -> f64 {
        let grid = self.grid();
        let (mut outer, mut total) = (0.0, 0.0);
        for (m, &x) in grid.nodes().iter().enumerate() {
            let d = self.phi1.values()[m].norm_sqr() + self.phi2.values()[m].norm_sqr();
            total += d;
            if grid.is_outer(x) {
                outer += d;
            }
        }
        if total > 0.0 {
            outer / total
        } else {
            0.0
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phi1.is_finite() && self.phi2.is_finite()
    }

    /// Both components multiplied by `exp(i theta)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let c = Complex64::from_polar(1.0, theta);
        Self {
            phi1: self.phi1.scaled(c),
            phi2: self.phi2.scaled(c),
            ..self.clone()
        }
    }

    /// Circular shift of both components by whole cells.
    pub fn shifted_cells(&self, cells: isize) -> Self {
        Self {
            phi1: self.phi1.shifted_cells(cells),
            phi2: self.phi2.shifted_cells(cells),
            ..self.clone()
        }
    }

    /// Writes `x, Re(phi1), Im(phi1), Re(phi2), Im(phi2)` to `path` and
    /// `{t, eps, p, beta}` to the sibling `.json` file.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "Re(phi1)", "Im(phi1)", "Re(phi2)", "Im(phi2)"])?;
        for (m, x) in self.grid().nodes().iter().enumerate() {
            let (a, b) = (self.phi1.values()[m], self.phi2.values()[m]);
            w.write_record([*x, a.re, a.im, b.re, b.im].map(|v| v.to_string()))?;
        }
        w.flush()?;
        let meta = SnapshotMeta {
            t: self.t,
            eps: self.eps,
            p: self.p,
            beta: self.beta,
        };
        fs::write(sidecar(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads a snapshot written by [`WavePair::save_snapshot`]; the grid is rebuilt from the `x` column.
    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
        let mut r = csv::Reader::from_path(path)?;
        let mut xs = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad snapshot value: {e}")))?;
            if v.len() != 5 {
                return Err(Error::Config("snapshot rows need 5 columns".into()));
            }
            xs.push(v[0]);
            a.push(Complex64::new(v[1], v[2]));
            b.push(Complex64::new(v[3], v[4]));
        }
        let first = *xs
            .first()
            .ok_or_else(|| Error::Config("empty snapshot".into()))?;
        let grid = Grid::new(-first, xs.len())?;
        if xs.iter().zip(grid.nodes()).any(|(x, y)| (x - y).abs() > 1e-9 * grid.half_length()) {
            return Err(Error::Config("snapshot nodes are not a uniform periodic grid".into()));
        }
        Self::new(
            ComplexField::from_values(&grid, a)?,
            ComplexField::from_values(&grid, b)?,
            meta.eps,
            meta.p,
            meta.beta,
            meta.t,
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct SnapshotMeta {
    t: f64,
    eps: f64,
    p: f64,
    beta: f64,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// `phi_i = r_i((x - x0)/eps) exp(i xi_i x / eps)` on `grid`.
pub fn initial_data(
    r: &GroundStatePair,
    x0: f64,
    xi: [f64; 2],
    eps: f64,
    grid: &Arc<Grid>,
) -> Result<WavePair> {
    modulated_family_member(r, x0, xi, [0.0, 0.0], eps, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub sample_stride: usize,
    pub boundary_mass_guard: f64,
}

impl EvolutionConfig {
    pub fn new(eps: f64, dt: f64, horizon: f64, sample_stride: usize) -> Result<Self> {
        let cfg = Self {
            eps,
            dt,
            horizon,
            sample_stride,
            boundary_mass_guard: BOUNDARY_MASS_GUARD,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Step `min(eps/10, eps * dx_ref)`, shrunk so that it divides the horizon.
    pub fn with_default_step(eps: f64, horizon: f64, reference_dx: f64, sample_stride: usize) -> Result<Self> {
        if !(eps > 0.0 && horizon > 0.0 && reference_dx > 0.0) {
            return Err(Error::Config("eps, horizon and reference mesh width must be positive".into()));
        }
        let bound = eps * reference_dx.min(0.1);
        let steps = (horizon / bound).ceil();
        Self::new(eps, horizon / steps, horizon, sample_stride)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::Config("eps, dt and horizon must be positive".into()));
        }
        if self.dt > self.eps * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {} exceeds eps = {} (phase resolution)",
                self.dt, self.eps
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::Config("sample stride must be at least 1".into()));
        }
        if !(self.boundary_mass_guard > 0.0) {
            return Err(Error::Config("boundary mass guard must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps from 0 to the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Precomputed potential samples and kinetic multiplier for a fixed step.
pub struct SplitStepper {
    grid: Arc<Grid>,
    eps: f64,
    p: f64,
    beta: f64,
    dt: f64,
    v: Vec<f64>,
    w: Vec<f64>,
    kinetic: Vec<Complex64>,
    nonlinearity: f64,
}

impl SplitStepper {
    pub fn new(grid: &Arc<Grid>, v: &Potential, w: &Potential, eps: f64, p: f64, beta: f64, dt: f64) -> Self {
        let kinetic = grid
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, -0.5 * dt * eps * k * k))
            .collect();
        Self {
            grid: grid.clone(),
            eps,
            p,
            beta,
            dt,
            v: grid.nodes().iter().map(|&x| v.value(x)).collect(),
            w: grid.nodes().iter().map(|&x| w.value(x)).collect(),
            kinetic,
            nonlinearity: 1.0,
        }
    }

    /// Same stepper with the nonlinear coupling multiplied by `amplitude`.
    pub fn with_nonlinearity(mut self, amplitude: f64) -> Self {
        self.nonlinearity = amplitude;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rotate(&self, state: &mut WavePair, h: f64) {
        let scale = h / self.eps;
        let (a, b) = (state.phi1.values_mut(), state.phi2.values_mut());
        for m in 0..a.len() {
            let (r1, r2) = (a[m].norm(), b[m].norm());
            let g1 = self.nonlinearity * coupling_coefficient(r1, r2, self.p, self.beta);
            let g2 = self.nonlinearity * coupling_coefficient(r2, r1, self.p, self.beta);
            a[m] *= Complex64::from_polar(1.0, -scale * (self.v[m] - g1));
            b[m] *= Complex64::from_polar(1.0, -scale * (self.w[m] - g2));
        }
    }

    fn kinetic(&self, field: &mut ComplexField) {
        let buf = field.values_mut();
        let before: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
        self.grid.forward(buf);
        for (v, k) in buf.iter_mut().zip(&self.kinetic) {
            *v *= k;
        }
        self.grid.inverse(buf);
        // the multiplier is unitary; remove the FFT roundoff drift so long runs stay isometric
        let after: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
        if after > 0.0 {
            // first-order correction applied with fma, since a factor rounded to the ulps of 1 is biased
            let d = 0.5 * (before - after) / after;
            for v in buf.iter_mut() {
                *v = Complex64::new(v.re.mul_add(d, v.re), v.im.mul_add(d, v.im));
            }
        }
    }

    /// Half pointwise rotation, full kinetic step, half rotation.
    pub fn step(&self, state: &mut WavePair) {
        self.rotate(state, 0.5 * self.dt);
        self.kinetic(&mut state.phi1);
        self.kinetic(&mut state.phi2);
        self.rotate(state, 0.5 * self.dt);
        state.t += self.dt;
    }
}

pub fn strang_step(state: &WavePair, v: &Potential, w: &Potential, dt: f64) -> WavePair {
    let stepper = SplitStepper::new(state.grid(), v, w, state.eps, state.p, state.beta, dt);
    let mut next = state.clone();
    stepper.step(&mut next);
    next
}

/// Read-only callback invoked at every sample time.
pub trait Observer {
    fn observe(&mut self, state: &WavePair, particle: &PhasePoint) -> Result<()>;
}

impl<F: FnMut(&WavePair, &PhasePoint) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &WavePair, particle: &PhasePoint) -> Result<()> {
        self(state, particle)
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: WavePair,
    pub particle: PhasePoint,
    pub steps: usize,
}

/// A run stopped early, with the last state that passed the checks.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    pub last_good: WavePair,
    pub particle: PhasePoint,
}

impl From<Box<Aborted>> for Error {
    fn from(a: Box<Aborted>) -> Self {
        a.error
    }
}

fn check_state(state: &WavePair, guard: f64) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::Numerical {
            t: state.t,
            reason: "non-finite field values".into(),
        });
    }
    let outer = state.outer_mass_fraction();
    if outer > guard {
        return Err(Error::Numerical {
            t: state.t,
            reason: format!("boundary mass guard tripped: outer mass fraction {outer:.3e} > {guard:.1e}"),
        });
    }
    Ok(())
}

/// Co-integrates field and particles from the state's current time to the
/// horizon on one clock, calling `observer` every `sample_stride` steps and at the end.
/// Times are `k * dt`, so a run resumed from a sampled snapshot lands on the same clock.
pub fn evolve(
    initial: WavePair,
    particle: PhasePoint,
    v: &Potential,
    w: &Potential,
    cfg: &EvolutionConfig,
    observer: &mut dyn Observer,
) -> std::result::Result<Evolution, Box<Aborted>> {
    let abort = |error: Error, last_good: &WavePair, particle: &PhasePoint| {
        Box::new(Aborted {
            error,
            last_good: last_good.clone(),
            particle: *particle,
        })
    };
    if let Err(e) = cfg.validate() {
        return Err(abort(e, &initial, &particle));
    }
    if (initial.eps - cfg.eps).abs() > 1e-15 * cfg.eps {
        return Err(abort(
            Error::Usage("state and configuration disagree on eps".into()),
            &initial,
            &particle,
        ));
    }
    if (initial.t - particle.t).abs() > 1e-9 * cfg.dt {
        return Err(abort(
            Error::Usage(format!("field at t = {} but particles at t = {}", initial.t, particle.t)),
            &initial,
            &particle,
        ));
    }
    let start = (initial.t / cfg.dt).round() as usize;
    let end = cfg.steps();
    let stepper = SplitStepper::new(initial.grid(), v, w, cfg.eps, initial.p, initial.beta, cfg.dt);

    let mut state = initial;
    let mut particle = particle;
    state.t = start as f64 * cfg.dt;
    particle.t = state.t;
    if let Err(e) = check_state(&state, cfg.boundary_mass_guard).and_then(|_| observer.observe(&state, &particle)) {
        return Err(abort(e, &state, &particle));
    }
    let mut last_good = (state.clone(), particle);
    for k in start + 1..=end {
        stepper.step(&mut state);
        particle = verlet_step(&particle, v, w, cfg.dt);
        state.t = k as f64 * cfg.dt;
        particle.t = state.t;
        if k % cfg.sample_stride == 0 || k == end {
            if let Err(e) = check_state(&state, cfg.boundary_mass_guard) {
                return Err(abort(e, &last_good.0, &last_good.1));
            }
            if let Err(e) = observer.observe(&state, &particle) {
                return Err(abort(e, &state, &particle));
            }
            last_good = (state.clone(), particle);
        }
    }
    Ok(Evolution {
        state,
        particle,
        steps: end.saturating_sub(start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_ground_state, Branch, SolverOptions};

    fn pair() -> GroundStatePair {
        let g = Grid::new(20.0, 2048).unwrap();
        solve_ground_state(
            1.0,
            2.0,
            &g,
            Branch::Symmetric,
            SolverOptions {
                verify_minimality: false,
                ..SolverOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn free_plane_wave_is_exact() {
        let g = Grid::new(std::f64::consts::PI, 64).unwrap();
        let zero = Potential::constant(0.0, g.half_length()).unwrap();
        let k = 3.0;
        let eps = 0.5;
        let dt = 0.01;
        let wave = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, k * x));
        let mut s = WavePair::new(wave.clone(), ComplexField::zeros(&g), eps, 1.0, 0.0, 0.0).unwrap();
        let stepper = SplitStepper::new(&g, &zero, &zero, eps, 1.0, 0.0, dt).with_nonlinearity(0.0);
        for _ in 0..100 {
            stepper.step(&mut s);
        }
        let phase = Complex64::from_polar(1.0, -100.0 * dt * eps * k * k / 2.0);
        for (a, b) in s.phi1.values().iter().zip(wave.values()) {
            assert!((a - b * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn masses_are_isometric_invariants() {
        let r = pair();
        let g = Grid::new(20.0, 4096).unwrap();
        let v = Potential::harmonic(1.0, 20.0).unwrap();
        let mut s = initial_data(&r, 1.0, [0.5, -0.3], 0.1, &g).unwrap();
        let m0 = s.masses();
        let stepper = SplitStepper::new(&g, &v, &v, 0.1, 1.0, 2.0, 1e-3);
        for _ in 0..10_000 {
            stepper.step(&mut s);
        }
        let m1 = s.masses();
        for i in 0..2 {
            assert!(((m1[i] - m0[i]) / m0[i]).abs() < 1e-12, "{:e}", (m1[i] - m0[i]) / m0[i]);
        }
    }

    #[test]
    fn initial_masses_do_not_depend_on_eps() {
        let r = pair();
        let g = Grid::new(20.0, 16384).unwrap();
        let s = initial_data(&r, 0.0, [1.0, 1.0], 0.1, &g).unwrap();
        let m = s.masses();
        assert!((m[0] - r.m1()).abs() < 1e-8 && (m[1] - r.m2()).abs() < 1e-8);
    }

    #[test]
    fn support_near_boundary_is_rejected() {
        let r = pair();
        let g = Grid::new(20.0, 2048).unwrap();
        // at eps = 1 the 1e-12 support of the profile reaches the outer tenth of [-20, 20]
        assert!(matches!(initial_data(&r, 0.0, [0.0, 0.0], 1.0, &g), Err(Error::Config(_))));
        assert!(matches!(initial_data(&r, 17.5, [0.0, 0.0], 0.1, &g), Err(Error::Config(_))));
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let r = pair();
        let g = Grid::new(20.0, 2048).unwrap();
        let mut s = initial_data(&r, 0.5, [0.7, 0.2], 0.25, &g).unwrap();
        s.t = 0.123;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        s.save_snapshot(&path).unwrap();
        let back = WavePair::load_snapshot(&path).unwrap();
        assert_eq!(back.t, s.t);
        assert_eq!(back.eps, s.eps);
        assert_eq!(back.phi1.values(), s.phi1.values());
        assert_eq!(back.phi2.values(), s.phi2.values());
        assert_eq!(**back.grid(), **s.grid());
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::new(0.1, 0.2, 1.0, 1).is_err());
        assert!(EvolutionConfig::new(0.1, 0.01, 0.0, 1).is_err());
        assert!(EvolutionConfig::new(0.1, 0.01, 1.0, 0).is_err());
        let c = EvolutionConfig::with_default_step(0.1, 1.0, 40.0 / 2048.0, 8).unwrap();
        assert!(c.dt <= 0.1 * 40.0 / 2048.0);
        assert!((c.dt * c.steps() as f64 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn guard_trip_reports_last_good_state() {
        let g = Grid::new(10.0, 256).unwrap();
        let zero = Potential::constant(0.0, 10.0).unwrap();
        // a wide Gaussian already leaks into the outer region
        let wide = ComplexField::from_fn(&g, |x| Complex64::new((-x * x / 18.0).exp(), 0.0));
        let s = WavePair::new(wide.clone(), wide, 1.0, 1.0, 0.0, 0.0).unwrap();
        let cfg = EvolutionConfig::new(1.0, 0.1, 1.0, 1).unwrap();
        let mut sink = |_: &WavePair, _: &PhasePoint| Ok(());
        let err = evolve(s, PhasePoint::new(0.0, 0.0, 0.0), &zero, &zero, &cfg, &mut sink).unwrap_err();
        assert!(matches!(err.error, Error::Numerical { .. }));
        assert_eq!(err.last_good.t, 0.0);
    }

    #[test]
    fn samples_follow_the_stride() {
        let r = pair();
        let g = Grid::new(20.0, 4096).unwrap();
        let v = Potential::harmonic(1.0, 20.0).unwrap();
        let s = initial_data(&r, 1.0, [0.0, 0.0], 0.2, &g).unwrap();
        let cfg = EvolutionConfig::new(0.2, 0.01, 0.25, 10).unwrap();
        let mut times = Vec::new();
        let mut rec = |s: &WavePair, p: &PhasePoint| {
            assert_eq!(s.t, p.t);
            times.push(s.t);
            Ok(())
        };
        let out = evolve(s, PhasePoint::new(1.0, 0.0, 0.0), &v, &v, &cfg, &mut rec).unwrap();
        assert_eq!(out.steps, 25);
        assert_eq!(times, vec![0.0, 0.1, 0.2, 0.25]);
    }
}
