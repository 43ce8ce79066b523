//! Scenario files, eps-ladder sweeps and convergence reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, initial_data, EvolutionConfig};
use crate::ground_state::{solve_ground_state, Branch, GroundStatePair, SolverOptions};
use crate::grid::Grid;
use crate::hamiltonian::{lissajous_portrait, trajectory, LissajousPortrait, PhasePoint};
use crate::observables::{
    soliton_width, write_diagnostics_csv, Cutoff, DiagnosticsCollector, DiagnosticsContext, DiagnosticsRecord,
    TestDictionary,
};
use crate::order::{fit_order, OrderFit};
use crate::potential::{Potential, PotentialSpec};

/// Sweep maxima at or below this are reported as vanishing instead of fitted.
pub const VANISHING_FLOOR: f64 = 1e-9;
/// Target order for the `H_eps` distance.
pub const FIRST_ORDER_TARGET: f64 = 0.8;
/// Target order for the weak-norm and center errors.
pub const SECOND_ORDER_TARGET: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    /// Domain half-length, fixed across the ladder.
    #[serde(rename = "L", default = "default_half_length")]
    pub half_length: f64,
    /// Number of nodes at eps = 1; also the ground-state grid.
    #[serde(default = "default_reference_n")]
    pub reference_n: usize,
}

fn default_half_length() -> f64 {
    20.0
}

fn default_reference_n() -> usize {
    2048
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            half_length: default_half_length(),
            reference_n: default_reference_n(),
        }
    }
}

impl GridPolicy {
    pub fn reference_dx(&self) -> f64 {
        2.0 * self.half_length / self.reference_n as f64
    }

    /// Smallest power of two with `dx <= eps * dx_ref`.
    pub fn points_for(&self, eps: f64) -> usize {
        ((self.reference_n as f64 / eps).ceil() as usize).next_power_of_two()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeStep {
    /// `dt <= min(eps/10, eps * dx_ref)`.
    #[default]
    Default,
    /// `dt <= ratio * eps`.
    FixedRatio { dt_over_eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "V")]
    pub v: PotentialSpec,
    #[serde(rename = "W")]
    pub w: PotentialSpec,
    pub p: f64,
    pub beta: f64,
    pub x0: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub eps_ladder: Vec<f64>,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub time_step: TimeStep,
    /// Sample intervals over the horizon.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub branch: Branch,
    /// Saved ground state to use instead of solving.
    #[serde(default)]
    pub ground_state: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Orbit-distance bound beyond which samples are flagged out of tube.
    #[serde(default = "default_tube")]
    pub tube: f64,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_samples() -> usize {
    20
}

fn default_tube() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Equal potentials and velocities; slopes are asserted.
    Tracking,
    /// General system; curves are reported without assertions.
    TwoPotential,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let mut s = Self::from_json(&fs::read_to_string(path)?)?;
        // relative paths in a scenario are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(gs) = &s.ground_state {
            if gs.is_relative() {
                s.ground_state = Some(base.join(gs));
            }
        }
        Ok(s)
    }

    pub fn potentials(&self) -> Result<(Potential, Potential)> {
        Ok((
            Potential::new(self.v, self.grid.half_length)?,
            Potential::new(self.w, self.grid.half_length)?,
        ))
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        let ladder = &self.eps_ladder;
        if ladder.len() < 3 {
            return Err(Error::Config(format!(
                "eps ladder needs at least 3 entries for slope fits, got {}",
                ladder.len()
            )));
        }
        if !ladder.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(Error::Config("eps values must be positive".into()));
        }
        if ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps ladder must be strictly decreasing".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if !(self.grid.half_length > 0.0) || self.grid.reference_n < 8 {
            return Err(Error::Config("grid policy needs L > 0 and reference_n >= 8".into()));
        }
        if let TimeStep::FixedRatio { dt_over_eps } = self.time_step {
            if !(dt_over_eps > 0.0 && dt_over_eps <= 1.0) {
                return Err(Error::Config("dt_over_eps must lie in (0, 1]".into()));
            }
        }
        if !(self.tube > 0.0) {
            return Err(Error::Config("tube must be positive".into()));
        }
        if ![self.x0, self.xi1, self.xi2].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("initial position and velocities must be finite".into()));
        }
        self.potentials()?;
        if mode == Mode::Tracking && (self.v != self.w || self.xi1 != self.xi2) {
            return Err(Error::Config(
                "tracking runs need V = W and equal initial velocities; use two-potential".into(),
            ));
        }
        Ok(())
    }

    /// Step, stride and sample count for one eps: the step bound is met and
    /// the horizon is an integer number of equal sample intervals.
    pub fn evolution_config(&self, eps: f64) -> Result<EvolutionConfig> {
        let bound = match self.time_step {
            TimeStep::Default => eps * self.grid.reference_dx().min(0.1),
            TimeStep::FixedRatio { dt_over_eps } => eps * dt_over_eps,
        };
        let per_sample = (self.horizon / (bound * self.samples as f64)).ceil().max(1.0) as usize;
        let steps = per_sample * self.samples;
        EvolutionConfig::new(eps, self.horizon / steps as f64, self.horizon, per_sample)
    }

    pub fn solve_ground_state(&self) -> Result<GroundStatePair> {
        if let Some(path) = &self.ground_state {
            let r = GroundStatePair::load(path)?;
            if r.p() != self.p || r.beta() != self.beta {
                return Err(Error::Config(format!(
                    "saved ground state has (p, beta) = ({}, {}), scenario wants ({}, {})",
                    r.p(),
                    r.beta(),
                    self.p,
                    self.beta
                )));
            }
            return Ok(r);
        }
        let grid = Grid::new(self.grid.half_length, self.grid.reference_n)?;
        let opts = SolverOptions {
            seed: self.seed,
            ..SolverOptions::default()
        };
        solve_ground_state(self.p, self.beta, &grid, self.branch, opts)
    }
}

/// `|xi1 a1 + xi2 a2| + |a1 + a2|`, `|eta1 + eta2|` and `|gamma1| + |gamma2|` at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Composite {
    pub t: f64,
    pub alpha_hat: f64,
    pub eta: f64,
    pub gamma: f64,
    pub rho: f64,
    #[serde(rename = "Heps")]
    pub heps: f64,
}

impl Composite {
    pub fn of(rec: &DiagnosticsRecord, s: &PhasePoint) -> Self {
        let alpha_hat = (s.xi1 * rec.alpha1 + s.xi2 * rec.alpha2).abs() + (rec.alpha1 + rec.alpha2).abs();
        let eta = (rec.eta1 + rec.eta2).abs();
        let gamma = rec.gamma1.abs() + rec.gamma2.abs();
        Self {
            t: rec.t,
            alpha_hat,
            eta,
            gamma,
            rho: alpha_hat + eta + gamma,
            heps: rec.heps,
        }
    }
}

/// One evolution at a single eps, with its full time series.
#[derive(Debug, Clone)]
pub struct EpsRun {
    pub summary: EpsSummary,
    pub records: Vec<DiagnosticsRecord>,
    pub particles: Vec<PhasePoint>,
    pub composite: Vec<Composite>,
}

/// Sup-in-time errors and conservation checks for one eps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSummary {
    pub eps: f64,
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub cutoff_radius: f64,
    pub sup_heps: f64,
    pub sup_orbit_distance: f64,
    pub sup_dual_mass: [f64; 2],
    pub sup_dual_momentum: f64,
    /// `sup_t max_i |center_i(t) - x_i(t)|`
    pub sup_center_error: f64,
    /// `(center_i(T) - center_i(0)) / T`
    pub center_velocity: [f64; 2],
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
    pub max_momentum_drift: f64,
    pub initial_alpha: f64,
    pub initial_eta: f64,
    pub initial_gamma: f64,
    pub initial_rho: f64,
    pub sup_rho: f64,
    pub out_of_tube: usize,
}

fn summarize(eps: f64, cfg: &EvolutionConfig, n: usize, chi: &Cutoff, c: &DiagnosticsCollector) -> EpsRun {
    let recs = &c.records;
    let first = recs[0];
    let last = recs[recs.len() - 1];
    let composite: Vec<Composite> = recs.iter().zip(&c.particles).map(|(r, s)| Composite::of(r, s)).collect();
    let sup = |f: &dyn Fn(&DiagnosticsRecord) -> f64| recs.iter().map(f).fold(0.0, f64::max);
    let sup_center_error = recs
        .iter()
        .zip(&c.particles)
        .map(|(r, s)| (r.center1 - s.x1).abs().max((r.center2 - s.x2).abs()))
        .fold(0.0, f64::max);
    let duration = last.t - first.t;
    let summary = EpsSummary {
        eps,
        n,
        dt: cfg.dt,
        steps: cfg.steps(),
        cutoff_radius: chi.inner,
        sup_heps: sup(&|r| r.heps),
        sup_orbit_distance: sup(&|r| r.gamma),
        sup_dual_mass: [sup(&|r| r.dual_m1), sup(&|r| r.dual_m2)],
        sup_dual_momentum: sup(&|r| r.dual_p),
        sup_center_error,
        center_velocity: [
            (last.center1 - first.center1) / duration,
            (last.center2 - first.center2) / duration,
        ],
        max_mass_drift: sup(&|r| {
            let a = if first.n1 > 0.0 { (r.n1 - first.n1).abs() / first.n1 } else { r.n1 };
            let b = if first.n2 > 0.0 { (r.n2 - first.n2).abs() / first.n2 } else { r.n2 };
            a.max(b)
        }),
        max_energy_drift: sup(&|r| (r.e - first.e).abs()),
        max_momentum_drift: sup(&|r| (r.ptot - first.ptot).abs()),
        initial_alpha: first.alpha1.abs().max(first.alpha2.abs()),
        initial_eta: first.eta1.abs().max(first.eta2.abs()),
        initial_gamma: first.gamma1.abs().max(first.gamma2.abs()),
        initial_rho: composite[0].rho,
        sup_rho: composite.iter().map(|c| c.rho).fold(0.0, f64::max),
        out_of_tube: c.out_of_tube,
    };
    EpsRun {
        summary,
        records: c.records.clone(),
        particles: c.particles.clone(),
        composite,
    }
}

/// Ground state, initial data, co-integration and diagnostics at one eps.
pub fn run_single(scenario: &Scenario, r: &GroundStatePair, eps: f64) -> Result<EpsRun> {
    let (v, w) = scenario.potentials()?;
    let cfg = scenario.evolution_config(eps)?;
    let n = scenario.grid.points_for(eps);
    let grid = Grid::new(scenario.grid.half_length, n)?;
    let start = PhasePoint::new(scenario.x0, scenario.xi1, scenario.xi2);
    let path = trajectory(start, &v, &w, cfg.dt, cfg.steps());
    let chi = Cutoff::from_trajectory(&path, soliton_width(r, eps))?;
    run_with(&grid, r, &v, &w, start, &cfg, chi, scenario.tube)
}

#[allow(clippy::too_many_arguments)]
fn run_with(
    grid: &Arc<Grid>,
    r: &GroundStatePair,
    v: &Potential,
    w: &Potential,
    start: PhasePoint,
    cfg: &EvolutionConfig,
    chi: Cutoff,
    tube: f64,
) -> Result<EpsRun> {
    let phi0 = initial_data(r, start.x1, [start.xi1, start.xi2], cfg.eps, grid)?;
    let dictionary = TestDictionary::standard();
    let mut collector = DiagnosticsCollector::new(DiagnosticsContext {
        ground_state: r,
        v,
        w,
        cutoff: chi,
        dictionary: &dictionary,
        tube,
    });
    evolve(phi0, start, v, w, cfg, &mut collector)?;
    Ok(summarize(cfg.eps, cfg, grid.len(), &chi, &collector))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub errors: Vec<(f64, f64)>,
    pub fit: Option<OrderFit>,
    pub target: f64,
    /// Errors decrease strictly along the ladder.
    pub monotone: bool,
    /// Every error is at or below [`VANISHING_FLOOR`].
    pub vanishing: bool,
    pub pass: bool,
    pub note: String,
}

impl SlopeCheck {
    pub fn evaluate(errors: Vec<(f64, f64)>, target: f64) -> Self {
        let vanishing = errors.iter().all(|(_, e)| *e <= VANISHING_FLOOR);
        let monotone = errors.windows(2).all(|w| w[1].1 < w[0].1);
        if vanishing {
            return Self {
                errors,
                fit: None,
                target,
                monotone,
                vanishing,
                pass: true,
                note: format!("vanishing below floor {VANISHING_FLOOR:e}; no slope fitted"),
            };
        }
        match fit_order(&errors) {
            Ok(fit) => {
                let pass = fit.slope >= target && monotone;
                let note = if !monotone {
                    "error ladder is not monotone".to_string()
                } else if fit.slope < target {
                    format!("slope {:.3} below target {target}", fit.slope)
                } else {
                    String::new()
                };
                Self {
                    errors,
                    fit: Some(fit),
                    target,
                    monotone,
                    vanishing,
                    pass,
                    note,
                }
            }
            Err(e) => Self {
                errors,
                fit: None,
                target,
                monotone,
                vanishing,
                pass: false,
                note: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub scenario: Scenario,
    pub per_eps: Vec<EpsSummary>,
    pub slopes: BTreeMap<String, SlopeCheck>,
    /// `None` for two-potential runs, which make no smallness claim.
    pub pass: Option<bool>,
    #[serde(skip)]
    pub runs: Vec<EpsRun>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.pass.unwrap_or(true)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario.name);
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
            "eps", "n", "Heps", "dualM1", "dualM2", "dualP", "center", "rho(0)", "mass drift"
        );
        for e in &self.per_eps {
            let _ = writeln!(
                s,
                "{:>8} {:>8} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
                e.eps,
                e.n,
                e.sup_heps,
                e.sup_dual_mass[0],
                e.sup_dual_mass[1],
                e.sup_dual_momentum,
                e.sup_center_error,
                e.initial_rho,
                e.max_mass_drift
            );
        }
        for (name, c) in &self.slopes {
            let slope = c.fit.as_ref().map_or("-".to_string(), |f| format!("{:.3}", f.slope));
            let verdict = match self.pass {
                Some(_) if c.pass => "PASS",
                Some(_) => "FAIL",
                None => "reported",
            };
            let _ = writeln!(s, "{name:<12} slope {slope:>7} target {:>4} {verdict} {}", c.target, c.note);
        }
        let tube: usize = self.per_eps.iter().map(|e| e.out_of_tube).sum();
        if tube > 0 {
            let _ = writeln!(s, "samples out of tube: {tube}");
        }
        let _ = writeln!(
            s,
            "overall: {}",
            match self.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "no assertion (two-potential regime)",
            }
        );
        s
    }

    /// `report.json`, `summary.txt` and per-eps `eps_<eps>/diagnostics.csv` and `composite.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for run in &self.runs {
            let sub = dir.join(format!("eps_{}", run.summary.eps));
            fs::create_dir_all(&sub)?;
            write_diagnostics_csv(&sub.join("diagnostics.csv"), &run.records)?;
            let mut w = csv::Writer::from_path(sub.join("composite.csv"))?;
            for c in &run.composite {
                w.serialize(c)?;
            }
            w.flush()?;
        }
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        fs::write(dir.join("summary.txt"), self.summary_text())?;
        Ok(())
    }
}

fn sweep(s: &Scenario, r: &GroundStatePair) -> Result<Vec<EpsRun>> {
    s.eps_ladder.par_iter().map(|&eps| run_single(s, r, eps)).collect()
}

fn column(runs: &[EpsRun], f: impl Fn(&EpsSummary) -> f64) -> Vec<(f64, f64)> {
    runs.iter().map(|r| (r.summary.eps, f(&r.summary))).collect()
}

/// Sweeps the ladder with `V = W`, `xi1 = xi2` and checks the convergence orders.
pub fn run_scenario(s: &Scenario) -> Result<ConvergenceReport> {
    s.validate(Mode::Tracking)?;
    let r = s.solve_ground_state()?;
    run_scenario_with(s, &r)
}

/// [`run_scenario`] with a ground state computed elsewhere.
pub fn run_scenario_with(s: &Scenario, r: &GroundStatePair) -> Result<ConvergenceReport> {
    s.validate(Mode::Tracking)?;
    let runs = sweep(s, r)?;
    let mut slopes = BTreeMap::new();
    slopes.insert(
        "Heps".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.sup_heps), FIRST_ORDER_TARGET),
    );
    slopes.insert(
        "dualM1".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.sup_dual_mass[0]), SECOND_ORDER_TARGET),
    );
    slopes.insert(
        "dualM2".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.sup_dual_mass[1]), SECOND_ORDER_TARGET),
    );
    slopes.insert(
        "dualP".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.sup_dual_momentum), SECOND_ORDER_TARGET),
    );
    slopes.insert(
        "center".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.sup_center_error), SECOND_ORDER_TARGET),
    );
    let pass = slopes.values().all(|c| c.pass);
    Ok(ConvergenceReport {
        scenario: s.clone(),
        per_eps: runs.iter().map(|r| r.summary.clone()).collect(),
        slopes,
        pass: Some(pass),
        runs,
    })
}

/// Sweeps the general system and reports the composite defect and the
/// `H_eps` distance to the family pinned at `x1(t)`, without pass/fail.
pub fn run_two_potential(s: &Scenario) -> Result<ConvergenceReport> {
    s.validate(Mode::TwoPotential)?;
    let r = s.solve_ground_state()?;
    run_two_potential_with(s, &r)
}

pub fn run_two_potential_with(s: &Scenario, r: &GroundStatePair) -> Result<ConvergenceReport> {
    s.validate(Mode::TwoPotential)?;
    let runs = sweep(s, r)?;
    let mut slopes = BTreeMap::new();
    slopes.insert(
        "rho0".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.initial_rho), SECOND_ORDER_TARGET),
    );
    slopes.insert(
        "rho".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.sup_rho), SECOND_ORDER_TARGET),
    );
    slopes.insert(
        "Heps".to_string(),
        SlopeCheck::evaluate(column(&runs, |e| e.sup_heps), FIRST_ORDER_TARGET),
    );
    Ok(ConvergenceReport {
        scenario: s.clone(),
        per_eps: runs.iter().map(|r| r.summary.clone()).collect(),
        slopes,
        pass: None,
        runs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PortraitSummary {
    pub omega: [f64; 2],
    pub common_period: Option<f64>,
    pub closure_error: Option<f64>,
    pub closed: bool,
    pub min_return_distance: f64,
    pub samples: usize,
}

impl From<&LissajousPortrait> for PortraitSummary {
    fn from(p: &LissajousPortrait) -> Self {
        Self {
            omega: p.omega,
            common_period: p.common_period,
            closure_error: p.closure_error,
            closed: p.closed,
            min_return_distance: p.min_return_distance,
            samples: p.samples.len(),
        }
    }
}

/// Writes the Lissajous trajectory to `out` and its classification to the sibling `.json`.
pub fn portrait_command(
    omega: [f64; 2],
    start: [f64; 2],
    velocity: [f64; 2],
    horizon: f64,
    dt: f64,
    out: &Path,
) -> Result<PortraitSummary> {
    let portrait = lissajous_portrait(omega, start, velocity, horizon, dt)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    portrait.write_csv(out)?;
    let summary = PortraitSummary::from(&portrait);
    fs::write(out.with_extension("json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Reads `eps,error` rows (header optional) and fits the order.
pub fn fit_order_file(path: &Path) -> Result<OrderFit> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Config("fit input rows need eps and error columns".into()));
        }
        match (rec[0].trim().parse::<f64>(), rec[1].trim().parse::<f64>()) {
            (Ok(e), Ok(v)) => pts.push((e, v)),
            _ if pts.is_empty() => continue,
            _ => return Err(Error::Config(format!("bad fit row: {:?}", rec.iter().collect::<Vec<_>>()))),
        }
    }
    fit_order(&pts)
}
