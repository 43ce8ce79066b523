//! Newtonian particle dynamics `x'' = -V'(x)` driving the soliton centers,
//! integrated with velocity Verlet, and 2D harmonic (Lissajous) portraits.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::Potential;

/// State of the two decoupled particle systems, one per potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x1: f64,
    pub xi1: f64,
    pub x2: f64,
    pub xi2: f64,
    pub t: f64,
}

impl PhasePoint {
    /// Both particles start from the same position.
    pub fn new(x0: f64, xi1: f64, xi2: f64) -> Self {
        Self {
            x1: x0,
            xi1,
            x2: x0,
            xi2,
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x1, self.xi1, self.x2, self.xi2, self.t]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn position(&self, i: usize) -> f64 {
        if i == 0 {
            self.x1
        } else {
            self.x2
        }
    }

    pub fn velocity(&self, i: usize) -> f64 {
        if i == 0 {
            self.xi1
        } else {
            self.xi2
        }
    }

    /// Same state translated by `d` in both positions.
    pub fn translated(&self, d: f64) -> Self {
        Self {
            x1: self.x1 + d,
            x2: self.x2 + d,
            ..*self
        }
    }
}

/// One velocity-Verlet step of `x' = xi, xi' = -V'(x)`. Negative `dt` steps backwards.
pub fn verlet_1d(x: f64, xi: f64, v: &Potential, dt: f64) -> (f64, f64) {
    let half = xi - 0.5 * dt * v.grad(x);
    let x_new = x + dt * half;
    (x_new, half - 0.5 * dt * v.grad(x_new))
}

pub fn verlet_step(s: &PhasePoint, v: &Potential, w: &Potential, dt: f64) -> PhasePoint {
    let (x1, xi1) = verlet_1d(s.x1, s.xi1, v, dt);
    let (x2, xi2) = verlet_1d(s.x2, s.xi2, w, dt);
    PhasePoint {
        x1,
        xi1,
        x2,
        xi2,
        t: s.t + dt,
    }
}

/// `(1/2 xi1^2 + V(x1), 1/2 xi2^2 + W(x2))`.
pub fn hamiltonian_energy(s: &PhasePoint, v: &Potential, w: &Potential) -> (f64, f64) {
    (
        0.5 * s.xi1 * s.xi1 + v.value(s.x1),
        0.5 * s.xi2 * s.xi2 + w.value(s.x2),
    )
}

/// `steps` Verlet steps of size `dt`, returning all states including the first.
pub fn trajectory(start: PhasePoint, v: &Potential, w: &Potential, dt: f64, steps: usize) -> Vec<PhasePoint> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    let mut s = start;
    for _ in 0..steps {
        s = verlet_step(&s, v, w, dt);
        out.push(s);
    }
    out
}

/// Analytic Jacobian of the Verlet map for `V = omega^2 x^2 / 2`, in `(x, xi)` order.
pub fn harmonic_verlet_jacobian(omega: f64, dt: f64) -> [[f64; 2]; 2] {
    let kick = [[1.0, 0.0], [-0.5 * dt * omega * omega, 1.0]];
    let drift = [[1.0, dt], [0.0, 1.0]];
    let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    };
    mul(kick, mul(drift, kick))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PortraitSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
}

impl PortraitSample {
    fn distance(&self, other: &PortraitSample) -> f64 {
        ((self.x - other.x).powi(2)
            + (self.y - other.y).powi(2)
            + (self.xdot - other.xdot).powi(2)
            + (self.ydot - other.ydot).powi(2))
        .sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LissajousPortrait {
    pub omega: [f64; 2],
    pub samples: Vec<PortraitSample>,
    /// Common period when the frequency ratio is detected as rational.
    pub common_period: Option<f64>,
    /// Phase-space distance from the start after exactly one common period.
    pub closure_error: Option<f64>,
    pub closed: bool,
    /// Smallest phase-space distance to the start for `t >= pi / max(omega)`.
    pub min_return_distance: f64,
}

/// Largest denominator tried by the rational-ratio detection.
pub const MAX_DENOMINATOR: u64 = 1000;
pub const RATIO_TOLERANCE: f64 = 1e-12;
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

/// `(p, q)` with `|ratio - p/q| <= RATIO_TOLERANCE * max(1, ratio)` and `q <= MAX_DENOMINATOR`.
pub fn detect_rational(ratio: f64) -> Option<(u64, u64)> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return None;
    }
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (ratio * q as f64).round();
        ((ratio - p / q as f64).abs() <= RATIO_TOLERANCE * ratio.max(1.0) && p >= 1.0)
            .then_some((p as u64, q))
    })
}

fn integrate_2d(
    omega: [f64; 2],
    start: [f64; 2],
    velocity: [f64; 2],
    horizon: f64,
    dt: f64,
    mut visit: impl FnMut(PortraitSample),
) -> PortraitSample {
    let steps = (horizon / dt).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let axes = [0, 1].map(|a| Potential::harmonic(omega[a], f64::MAX).expect("finite frequency"));
    let (mut x, mut y) = ((start[0], velocity[0]), (start[1], velocity[1]));
    let mut sample = PortraitSample {
        t: 0.0,
        x: x.0,
        y: y.0,
        xdot: x.1,
        ydot: y.1,
    };
    visit(sample);
    for k in 1..=steps {
        x = verlet_1d(x.0, x.1, &axes[0], h);
        y = verlet_1d(y.0, y.1, &axes[1], h);
        sample = PortraitSample {
            t: k as f64 * h,
            x: x.0,
            y: y.0,
            xdot: x.1,
            ydot: y.1,
        };
        visit(sample);
    }
    sample
}

/// Integrates `x'' + w1^2 x = 0`, `y'' + w2^2 y = 0` on `[0, T]` and classifies closure.
pub fn lissajous_portrait(
    omega: [f64; 2],
    start: [f64; 2],
    velocity: [f64; 2],
    horizon: f64,
    dt: f64,
) -> Result<LissajousPortrait> {
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(Error::Config("portrait horizon and step must be positive".into()));
    }
    if !omega.iter().all(|w| w.is_finite() && *w > 0.0) {
        return Err(Error::Config("portrait frequencies must be positive".into()));
    }
    let mut samples = Vec::new();
    integrate_2d(omega, start, velocity, horizon, dt, |s| samples.push(s));
    let origin = samples[0];
    let settle = PI / omega[0].max(omega[1]);
    let min_return_distance = samples
        .iter()
        .filter(|s| s.t >= settle)
        .map(|s| s.distance(&origin))
        .fold(f64::INFINITY, f64::min);

    let common_period = detect_rational(omega[0] / omega[1]).map(|(_, q)| 2.0 * PI * q as f64 / omega[1]);
    let closure_error = common_period.filter(|&tc| tc <= horizon * (1.0 + 1e-12)).map(|tc| {
        let end = integrate_2d(omega, start, velocity, tc, dt, |_| {});
        end.distance(&origin)
    });
    Ok(LissajousPortrait {
        omega,
        samples,
        common_period,
        closure_error,
        closed: closure_error.is_some_and(|e| e <= CLOSURE_TOLERANCE),
        min_return_distance,
    })
}

impl LissajousPortrait {
    /// Cells of a `bins x bins` grid over the bounding box of the full
    /// trajectory visited by samples with `t <= until`.
    pub fn occupied_cells(&self, until: f64, bins: usize) -> usize {
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.samples {
            xmin = xmin.min(s.x);
            xmax = xmax.max(s.x);
            ymin = ymin.min(s.y);
            ymax = ymax.max(s.y);
        }
        let bin = |v: f64, lo: f64, hi: f64| {
            if hi > lo {
                (((v - lo) / (hi - lo)) * bins as f64).floor().clamp(0.0, bins as f64 - 1.0) as usize
            } else {
                0
            }
        };
        let mut seen = vec![false; bins * bins];
        for s in self.samples.iter().take_while(|s| s.t <= until) {
            seen[bin(s.x, xmin, xmax) * bins + bin(s.y, ymin, ymax)] = true;
        }
        seen.iter().filter(|&&b| b).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x", "y", "xdot", "ydot"])?;
        for s in &self.samples {
            w.write_record([s.t, s.x, s.y, s.xdot, s.ydot].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
