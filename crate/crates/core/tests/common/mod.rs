#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use solitonlab::experiment::Scenario;
use solitonlab::ground_state::{solve_ground_state, Branch, GroundStatePair, SolverOptions};
use solitonlab::{ComplexField, Grid};

pub fn reference_grid() -> Arc<Grid> {
    Grid::new(20.0, 2048).unwrap()
}

/// Symmetric p = 1 pair on the reference grid, without the minimality sampling.
pub fn symmetric_pair(beta: f64) -> GroundStatePair {
    let opts = SolverOptions {
        verify_minimality: false,
        ..SolverOptions::default()
    };
    solve_ground_state(1.0, beta, &reference_grid(), Branch::Symmetric, opts).unwrap()
}

/// Closed-form p = 1 symmetric profile `sqrt(2/(1+beta)) sech(sqrt2 x)` and its derivative.
pub fn analytic_profile(beta: f64, x: f64) -> (f64, f64) {
    let a = (2.0 / (1.0 + beta)).sqrt();
    let s = 1.0 / (SQRT_2 * x).cosh();
    (a * s, -a * SQRT_2 * s * (SQRT_2 * x).tanh())
}

pub fn scenario(name: &str, v: &str, x0: f64, xi: f64, ladder: &[f64]) -> Scenario {
    let ladder: Vec<String> = ladder.iter().map(|e| e.to_string()).collect();
    Scenario::from_json(&format!(
        r#"{{"name": "{name}", "V": {v}, "W": {v}, "p": 1.0, "beta": 2.0,
            "x0": {x0}, "xi1": {xi}, "xi2": {xi}, "eps_ladder": [{}]}}"#,
        ladder.join(", ")
    ))
    .unwrap()
}

pub const HARMONIC: &str = r#"{"kind": "harmonic", "omega": 1.0}"#;
pub const FLAT: &str = r#"{"kind": "constant", "level": 0.0}"#;

/// Smooth random complex field: a few Gaussian bumps in each of Re and Im.
pub fn random_field(rng: &mut ChaCha8Rng, grid: &Arc<Grid>, width_scale: f64) -> ComplexField {
    let bumps: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-2.0..2.0) * width_scale,
                rng.gen_range(0.4..1.2) * width_scale,
            )
        })
        .collect();
    ComplexField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(a, b, c, w)| Complex64::new(*a, *b) * (-0.5 * ((x - c) / w).powi(2)).exp())
            .sum()
    })
}

/// Minimizes `f` over the box `center +- half_width` by an exhaustive lattice scan,
/// then repeatedly rescans a lattice shrunk by 4 around the best node.
pub fn lattice_minimize<const D: usize>(
    f: impl Fn([f64; D]) -> f64,
    center: [f64; D],
    half_width: [f64; D],
    coarse: usize,
    final_step: f64,
) -> ([f64; D], f64) {
    let scan = |c: [f64; D], h: [f64; D], m: usize| {
        let total = m.pow(D as u32);
        let mut best = (c, f64::INFINITY);
        for idx in 0..total {
            let mut p = c;
            let mut rest = idx;
            for d in 0..D {
                let j = rest % m;
                rest /= m;
                p[d] = c[d] - h[d] + 2.0 * h[d] * j as f64 / (m - 1) as f64;
            }
            let v = f(p);
            if v < best.1 {
                best = (p, v);
            }
        }
        best
    };
    let mut best = scan(center, half_width, coarse);
    let mut step: [f64; D] = half_width.map(|h| 2.0 * h / (coarse - 1) as f64);
    while step.iter().cloned().fold(0.0, f64::max) > final_step {
        best = scan(best.0, step, 9);
        step = step.map(|s| s / 4.0);
    }
    best
}

/// `||a - e^{i theta} b||^2` for sampled values.
pub fn distance_sq(a: &[Complex64], b: &[Complex64], theta: f64, dx: f64) -> f64 {
    let e = Complex64::from_polar(1.0, theta);
    a.iter().zip(b).map(|(u, v)| (u - e * v).norm_sqr()).sum::<f64>() * dx
}

pub fn wrap(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
