//! Real ground states `R = (r1, r2)` of the autonomous coupled elliptic system
//!
//! ```text
//! -1/2 r1'' + r1 = r1 (|r1|^{2p} + beta |r2|^{p+1} |r1|^{p-1})
//! -1/2 r2'' + r2 = r2 (|r2|^{2p} + beta |r1|^{p+1} |r2|^{p-1})
//! ```
//!
//! solved in strong form by Newton-GMRES with a Fourier preconditioner, plus
//! the energy functional whose constrained minimizers they are.

mod io;
mod krylov;
pub mod modulation;
pub mod profile;

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};

pub use modulation::{
    gamma_phi, modulational_stability_probe, OrbitFit, ProbeReport, ProbeSample, Scaling,
};
pub use io::GroundStateMeta;
pub use profile::ProfileInterpolant;

/// Moduli below this are regularized in `|u|^{p-1}` when `p < 1`.
pub const DEGENERACY_FLOOR: f64 = 1e-14;
/// Clipping a Newton iterate by more than this (sup norm) is a projection failure.
pub const CLIP_LIMIT: f64 = 1e-6;
/// Tolerated energy decrease under mass-preserving perturbations.
pub const MINIMALITY_SLACK: f64 = 1e-10;

/// `|a|^e`, with `(a^2 + d^2)^{e/2}` below the degeneracy floor when `e < 0`.
pub(crate) fn pow_reg(a: f64, e: f64) -> f64 {
    let a = a.abs();
    if e < 0.0 && a < DEGENERACY_FLOOR {
        (a * a + DEGENERACY_FLOOR * DEGENERACY_FLOOR).powf(0.5 * e)
    } else if e == 0.0 {
        1.0
    } else {
        a.powf(e)
    }
}

/// `F_beta(u1, u2) = (|u1|^{2p+2} + |u2|^{2p+2} + 2 beta |u1|^{p+1} |u2|^{p+1}) / (p + 1)`.
pub fn f_beta(u1: f64, u2: f64, p: f64, beta: f64) -> f64 {
    let a = u1.abs();
    let b = u2.abs();
    (a.powf(2.0 * p + 2.0) + b.powf(2.0 * p + 2.0) + 2.0 * beta * (a * b).powf(p + 1.0)) / (p + 1.0)
}

/// Pointwise coefficient `|u1|^{2p} + beta |u2|^{p+1} |u1|^{p-1}` multiplying `u1`
/// in the first equation (swap arguments for the second).
pub fn coupling_coefficient(a1: f64, a2: f64, p: f64, beta: f64) -> f64 {
    let own = pow_reg(a1, 2.0 * p);
    if beta == 0.0 {
        return own;
    }
    own + beta * pow_reg(a2, p + 1.0) * pow_reg(a1, p - 1.0)
}

fn check_parameters(p: f64, beta: f64) -> Result<()> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::Config(format!(
            "nonlinearity exponent must satisfy 0 < p < 2 in one dimension, got {p}"
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("coupling must be >= 0, got {beta}")));
    }
    Ok(())
}

/// `E(U) = 1/2 ||U'||^2 - int F_beta(U)`.
pub fn energy(u1: &ComplexField, u2: &ComplexField, p: f64, beta: f64) -> Result<f64> {
    u1.grid().check_same(u2.grid())?;
    let kinetic = 0.5 * (u1.gradient().norm_sq() + u2.gradient().norm_sq());
    let dx = u1.grid().dx();
    let potential: f64 = u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(a, b)| f_beta(a.norm(), b.norm(), p, beta))
        .sum::<f64>()
        * dx;
    Ok(kinetic - potential)
}

pub fn energy_real(r1: &RealField, r2: &RealField, p: f64, beta: f64) -> Result<f64> {
    energy(&r1.to_complex(), &r2.to_complex(), p, beta)
}

/// Explicit scalar ground state of `-1/2 r'' + r = r^{2p+1}`:
/// `(p+1)^{1/(2p)} sech^{1/p}(sqrt(2) p x)`.
pub fn scalar_soliton(p: f64, x: f64) -> f64 {
    let s = 1.0 / (std::f64::consts::SQRT_2 * p * x).cosh();
    (p + 1.0).powf(0.5 / p) * s.powf(1.0 / p)
}

/// Scale factor `(1+beta)^{-1/(2p)}` turning the scalar soliton into the symmetric pair.
pub fn symmetric_scale(p: f64, beta: f64) -> f64 {
    (1.0 + beta).powf(-0.5 / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `r1 = r2`, both components nontrivial.
    #[default]
    Symmetric,
    /// `(r, 0)`: scalar ground state in the first component only.
    Semitrivial,
}

#[derive(Debug, Clone)]
pub enum Ansatz {
    Branch(Branch),
    Custom { r1: RealField, r2: RealField },
}

impl From<Branch> for Ansatz {
    fn from(b: Branch) -> Self {
        Ansatz::Branch(b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Run the random tangent-perturbation check after convergence.
    pub verify_minimality: bool,
    pub minimality_samples: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iterations: 60,
            verify_minimality: true,
            minimality_samples: 20,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MinimalityCheck {
    pub samples: usize,
    pub min_delta_energy: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct GroundStatePair {
    r1: RealField,
    r2: RealField,
    p: f64,
    beta: f64,
    m1: f64,
    m2: f64,
    energy: f64,
    residual_norm: f64,
    iterations: usize,
    minimality: Option<MinimalityCheck>,
    profiles: [ProfileInterpolant; 2],
}

impl GroundStatePair {
    /// Wraps given profiles, computing masses, energy and residual.
    pub fn from_profiles(r1: RealField, r2: RealField, p: f64, beta: f64) -> Result<Self> {
        check_parameters(p, beta)?;
        r1.grid().check_same(r2.grid())?;
        let m1 = r1.map(|_, v| v * v).integrate();
        let m2 = r2.map(|_, v| v * v).integrate();
        let energy = energy_real(&r1, &r2, p, beta)?;
        let residual_norm = residual_fields(&r1, &r2, p, beta).2;
        let profiles = [ProfileInterpolant::new(&r1), ProfileInterpolant::new(&r2)];
        Ok(Self {
            r1,
            r2,
            p,
            beta,
            m1,
            m2,
            energy,
            residual_norm,
            iterations: 0,
            minimality: None,
            profiles,
        })
    }

    pub fn r1(&self) -> &RealField {
        &self.r1
    }

    pub fn r2(&self) -> &RealField {
        &self.r2
    }

    pub fn component(&self, i: usize) -> &RealField {
        if i == 0 {
            &self.r1
        } else {
            &self.r2
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.r1.grid()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn masses(&self) -> [f64; 2] {
        [self.m1, self.m2]
    }

    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn minimality(&self) -> Option<&MinimalityCheck> {
        self.minimality.as_ref()
    }

    pub fn profile(&self, i: usize) -> &ProfileInterpolant {
        &self.profiles[i]
    }

    pub fn peak(&self, i: usize) -> f64 {
        self.component(i).sup_norm()
    }

    /// `int x^2 r_i^2 dx`.
    pub fn second_moment(&self, i: usize) -> f64 {
        self.component(i).map(|x, v| x * x * v * v).integrate()
    }

    /// Largest `|x|` at which `max(r1, r2)` is still above `fraction` of its peak.
    pub fn support_radius(&self, fraction: f64) -> f64 {
        let peak = self.peak(0).max(self.peak(1));
        self.grid()
            .nodes()
            .iter()
            .zip(self.r1.values().iter().zip(self.r2.values()))
            .filter(|(_, (a, b))| a.abs().max(b.abs()) >= fraction * peak)
            .fold(0.0, |m, (x, _)| m.max(x.abs()))
    }

    /// Both profiles as complex fields.
    pub fn as_complex(&self) -> [ComplexField; 2] {
        [self.r1.to_complex(), self.r2.to_complex()]
    }
}

#[derive(Debug, Clone)]
pub struct EllipticResidual {
    pub r1: RealField,
    pub r2: RealField,
    pub sup_norm: f64,
    /// The pair is (numerically) zero: a solution, but not a ground state.
    pub trivial: bool,
}

fn residual_fields(r1: &RealField, r2: &RealField, p: f64, beta: f64) -> (RealField, RealField, f64) {
    let grid = r1.grid();
    let packed = pack(grid, r1.values(), r2.values());
    let lap = packed.laplacian();
    let mut f1 = Vec::with_capacity(grid.len());
    let mut f2 = Vec::with_capacity(grid.len());
    for ((a, b), l) in r1.values().iter().zip(r2.values()).zip(lap.values()) {
        f1.push(-0.5 * l.re + a - a * coupling_coefficient(*a, *b, p, beta));
        f2.push(-0.5 * l.im + b - b * coupling_coefficient(*b, *a, p, beta));
    }
    let sup = f1.iter().chain(&f2).fold(0.0_f64, |m, v| m.max(v.abs()));
    (
        RealField::from_values(grid, f1).expect("residual length"),
        RealField::from_values(grid, f2).expect("residual length"),
        sup,
    )
}

/// Componentwise residual `-1/2 r_i'' + r_i - r_i g_i(r1, r2)`.
pub fn elliptic_residual(r: &GroundStatePair) -> EllipticResidual {
    residual_of(r.r1(), r.r2(), r.p(), r.beta())
}

pub fn residual_of(r1: &RealField, r2: &RealField, p: f64, beta: f64) -> EllipticResidual {
    let (f1, f2, sup) = residual_fields(r1, r2, p, beta);
    let trivial = r1.sup_norm().max(r2.sup_norm()) < 1e-12;
    EllipticResidual {
        r1: f1,
        r2: f2,
        sup_norm: sup,
        trivial,
    }
}

fn pack(grid: &Arc<Grid>, a: &[f64], b: &[f64]) -> ComplexField {
    let values = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    ComplexField::from_values(grid, values).expect("packed length")
}

/// Initial profiles for a branch: the explicit symmetric pair, or `(r, 0)`.
pub fn branch_ansatz(grid: &Arc<Grid>, p: f64, beta: f64, branch: Branch) -> (RealField, RealField) {
    match branch {
        Branch::Symmetric => {
            let c = symmetric_scale(p, beta);
            let r = RealField::from_fn(grid, |x| c * scalar_soliton(p, x));
            (r.clone(), r)
        }
        Branch::Semitrivial => (
            RealField::from_fn(grid, |x| scalar_soliton(p, x)),
            RealField::zeros(grid),
        ),
    }
}

struct NewtonSystem<'a> {
    grid: &'a Arc<Grid>,
    p: f64,
    beta: f64,
    /// `1 / (k^2/2 + 1)`
    inverse_symbol: Vec<f64>,
}

impl NewtonSystem<'_> {
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let (a, b) = u.split_at(n);
        let lap = pack(self.grid, a, b).laplacian();
        let mut out = vec![0.0; 2 * n];
        for m in 0..n {
            let (x, y) = (a[m], b[m]);
            out[m] = -0.5 * lap.values()[m].re + x - x * coupling_coefficient(x, y, self.p, self.beta);
            out[n + m] =
                -0.5 * lap.values()[m].im + y - y * coupling_coefficient(y, x, self.p, self.beta);
        }
        out
    }

    /// Jacobian entries of `(r1 g1, r2 g2)` at `u`: `[d11, d12, d21, d22]` per node.
    fn jacobian_entries(&self, u: &[f64]) -> Vec<[f64; 4]> {
        let n = self.grid.len();
        let (p, beta) = (self.p, self.beta);
        (0..n)
            .map(|m| {
                let (x, y) = (u[m], u[n + m]);
                let (ax, ay) = (x.abs(), y.abs());
                let sx = pow_reg(ax, p - 1.0) * x;
                let sy = pow_reg(ay, p - 1.0) * y;
                let d11 = (2.0 * p + 1.0) * pow_reg(ax, 2.0 * p)
                    + beta * p * pow_reg(ay, p + 1.0) * pow_reg(ax, p - 1.0);
                let d22 = (2.0 * p + 1.0) * pow_reg(ay, 2.0 * p)
                    + beta * p * pow_reg(ax, p + 1.0) * pow_reg(ay, p - 1.0);
                let cross = beta * (p + 1.0) * sx * sy;
                [d11, cross, cross, d22]
            })
            .collect()
    }

    fn apply_jacobian(&self, entries: &[[f64; 4]], v: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        let (a, b) = v.split_at(n);
        let lap = pack(self.grid, a, b).laplacian();
        for m in 0..n {
            let e = entries[m];
            out[m] = -0.5 * lap.values()[m].re + a[m] - (e[0] * a[m] + e[1] * b[m]);
            out[n + m] = -0.5 * lap.values()[m].im + b[m] - (e[2] * a[m] + e[3] * b[m]);
        }
    }

    fn precondition(&self, v: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        let (a, b) = v.split_at(n);
        let mut spec = pack(self.grid, a, b).spectrum();
        for (s, w) in spec.iter_mut().zip(&self.inverse_symbol) {
            *s *= *w;
        }
        self.grid.inverse(&mut spec);
        for m in 0..n {
            out[m] = spec[m].re;
            out[n + m] = spec[m].im;
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Even symmetrization followed by clipping of negative lobes. Components
/// that vanish identically in the ansatz span an invariant subspace and stay zero.
fn project(grid: &Grid, u: &mut [f64], pinned: [bool; 2]) -> Result<()> {
    let n = grid.len();
    for (half, pin) in u.chunks_mut(n).zip(pinned) {
        if pin {
            half.fill(0.0);
            continue;
        }
        let mirrored: Vec<f64> = (0..n).map(|m| 0.5 * (half[m] + half[grid.mirror_index(m)])).collect();
        half.copy_from_slice(&mirrored);
    }
    let most_negative = u.iter().fold(0.0_f64, |m, &v| m.min(v));
    if -most_negative > CLIP_LIMIT {
        return Err(Error::Projection {
            change: -most_negative,
        });
    }
    for v in u.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Newton iteration on the discretized system from the chosen ansatz.
pub fn solve_ground_state(
    p: f64,
    beta: f64,
    grid: &Arc<Grid>,
    ansatz: impl Into<Ansatz>,
    options: SolverOptions,
) -> Result<GroundStatePair> {
    check_parameters(p, beta)?;
    if !(options.tol > 0.0) {
        return Err(Error::Config("solver tolerance must be positive".into()));
    }
    let (a0, b0) = match ansatz.into() {
        Ansatz::Branch(branch) => branch_ansatz(grid, p, beta, branch),
        Ansatz::Custom { r1, r2 } => {
            grid.check_same(r1.grid())?;
            grid.check_same(r2.grid())?;
            (r1, r2)
        }
    };
    let n = grid.len();
    let mut u: Vec<f64> = a0.values().iter().chain(b0.values()).copied().collect();
    let pinned = [a0.sup_norm() == 0.0, b0.sup_norm() == 0.0];
    project(grid, &mut u, pinned)?;

    let system = NewtonSystem {
        grid,
        p,
        beta,
        inverse_symbol: grid.wavenumbers().iter().map(|k| 1.0 / (0.5 * k * k + 1.0)).collect(),
    };

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..=options.max_iterations {
        let f = system.residual(&u);
        let res = sup(&f);
        history.push(res);
        if !res.is_finite() {
            break;
        }
        if res < options.tol {
            converged = true;
            iterations = it;
            break;
        }
        if it == options.max_iterations {
            break;
        }
        let entries = system.jacobian_entries(&u);
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let forcing = res.min(1e-3).max(1e-10);
        let step = krylov::gmres(
            |v, out| system.apply_jacobian(&entries, v, out),
            |v, out| system.precondition(v, out),
            &rhs,
            forcing,
            60,
            20,
        )
        .solution;

        let base = l2(&f);
        let mut lambda = 1.0;
        let mut candidate;
        loop {
            candidate = u.iter().zip(&step).map(|(a, d)| a + lambda * d).collect::<Vec<_>>();
            let trial = l2(&system.residual(&candidate));
            // near the roundoff floor the merit function is noise; take the full step
            if trial < base || lambda < 1.0 / 64.0 || res < 1e-8 {
                break;
            }
            lambda *= 0.5;
        }
        project(grid, &mut candidate, pinned)?;
        u = candidate;
    }

    if !converged || sup(&u) < 1e-8 {
        return Err(Error::Convergence {
            iterations: history.len().saturating_sub(1),
            history,
        });
    }

    let r1 = RealField::from_values(grid, u[..n].to_vec())?;
    let r2 = RealField::from_values(grid, u[n..].to_vec())?;
    let mut pair = GroundStatePair::from_profiles(r1, r2, p, beta)?;
    pair.iterations = iterations;
    if options.verify_minimality {
        pair.minimality = Some(check_minimality(&pair, options.minimality_samples, options.seed)?);
    }
    Ok(pair)
}

/// Random real smooth bump sum, used for tangent perturbations.
pub(crate) fn random_bumps(rng: &mut ChaCha8Rng, grid: &Arc<Grid>, count: usize) -> RealField {
    let params: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.3..1.5),
            )
        })
        .collect();
    RealField::from_fn(grid, |x| {
        params
            .iter()
            .map(|(a, c, w)| a * (-0.5 * ((x - c) / w).powi(2)).exp())
            .sum()
    })
}

/// Checks that random mass-preserving tangent perturbations do not lower the energy.
pub fn check_minimality(r: &GroundStatePair, samples: usize, seed: u64) -> Result<MinimalityCheck> {
    let grid = r.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1e-3;
    let base_mass = r.total_mass();
    let mut min_delta = f64::INFINITY;
    for _ in 0..samples {
        let h1 = random_bumps(&mut rng, grid, 4);
        let h2 = random_bumps(&mut rng, grid, 4);
        let overlap = (0..grid.len())
            .map(|m| h1.values()[m] * r.r1.values()[m] + h2.values()[m] * r.r2.values()[m])
            .sum::<f64>()
            * grid.dx();
        let c = overlap / base_mass;
        let t1 = RealField::from_values(
            grid,
            h1.values().iter().zip(r.r1.values()).map(|(h, v)| h - c * v).collect(),
        )?;
        let t2 = RealField::from_values(
            grid,
            h2.values().iter().zip(r.r2.values()).map(|(h, v)| h - c * v).collect(),
        )?;
        let h1_norm = t1.map(|_, v| v * v).integrate() + t1.gradient().map(|_, v| v * v).integrate();
        let h2_norm = t2.map(|_, v| v * v).integrate() + t2.gradient().map(|_, v| v * v).integrate();
        let norm = (h1_norm + h2_norm).sqrt();
        let u1: Vec<f64> = r.r1.values().iter().zip(t1.values()).map(|(a, h)| a + scale * h / norm).collect();
        let u2: Vec<f64> = r.r2.values().iter().zip(t2.values()).map(|(a, h)| a + scale * h / norm).collect();
        let mass = (u1.iter().chain(&u2).map(|v| v * v).sum::<f64>()) * grid.dx();
        let k = (base_mass / mass).sqrt();
        let u1 = RealField::from_values(grid, u1.iter().map(|v| v * k).collect())?;
        let u2 = RealField::from_values(grid, u2.iter().map(|v| v * k).collect())?;
        let delta = energy_real(&u1, &u2, r.p, r.beta)? - r.energy;
        min_delta = min_delta.min(delta);
    }
    if samples == 0 {
        min_delta = 0.0;
    }
    Ok(MinimalityCheck {
        samples,
        min_delta_energy: min_delta,
        passed: min_delta >= -MINIMALITY_SLACK,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BranchEnergies {
    pub symmetric: f64,
    pub semitrivial: f64,
    pub symmetric_mass: f64,
    pub semitrivial_mass: f64,
}

/// Solves both branches and reports their energies; selection is left to the caller.
pub fn branch_energies(p: f64, beta: f64, grid: &Arc<Grid>, tol: f64) -> Result<BranchEnergies> {
    let options = SolverOptions {
        tol,
        verify_minimality: false,
        ..SolverOptions::default()
    };
    let sym = solve_ground_state(p, beta, grid, Branch::Symmetric, options)?;
    let semi = solve_ground_state(p, beta, grid, Branch::Semitrivial, options)?;
    Ok(BranchEnergies {
        symmetric: sym.energy(),
        semitrivial: semi.energy(),
        symmetric_mass: sym.total_mass(),
        semitrivial_mass: semi.total_mass(),
    })
}
