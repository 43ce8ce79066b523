use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use solitonlab::experiment::{fit_order_file, portrait_command, run_scenario, run_two_potential, Scenario};
use solitonlab::ground_state::{branch_energies, solve_ground_state, Branch, SolverOptions};
use solitonlab::{Error, Grid, Result};

#[derive(Parser, Debug)]
#[command(version, about = "Semiclassical soliton dynamics experiments for coupled NLS systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BranchArg {
    Symmetric,
    Semitrivial,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the elliptic system and save the profiles as CSV plus JSON sidecar.
    Groundstate {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long = "L", default_value_t = 20.0)]
        half_length: f64,
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = BranchArg::Symmetric)]
        branch: BranchArg,
        #[arg(long, default_value = "groundstate.csv")]
        out: PathBuf,
    },
    /// eps sweep with V = W; exits 1 if a convergence order misses its target.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// eps sweep of the general system; reports curves without pass/fail.
    TwoPotential {
        #[arg(long)]
        config: PathBuf,
    },
    /// Lissajous trajectory of two decoupled harmonic oscillators.
    Portrait {
        #[arg(long)]
        w1: f64,
        #[arg(long)]
        w2: f64,
        /// Start position as `x,y`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 1.0])]
        x0: Vec<f64>,
        /// Start velocity as `vx,vy`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 0.0])]
        v0: Vec<f64>,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value = "portrait.csv")]
        out: PathBuf,
    },
    /// Least-squares order of `eps,error` rows.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

fn output_dir(s: &Scenario) -> PathBuf {
    s.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&s.name))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Groundstate {
            p,
            beta,
            half_length,
            n,
            tol,
            branch,
            out,
        } => {
            if !(tol > 0.0) {
                return Err(Error::Config("tol must be positive".into()));
            }
            let grid = Grid::new(half_length, n)?;
            let branch = match branch {
                BranchArg::Symmetric => Branch::Symmetric,
                BranchArg::Semitrivial => Branch::Semitrivial,
            };
            let opts = SolverOptions {
                tol,
                ..SolverOptions::default()
            };
            let r = solve_ground_state(p, beta, &grid, branch, opts)?;
            r.save(&out)?;
            let branches = branch_energies(p, beta, &grid, tol).ok();
            let report = json!({
                "meta": r.meta(),
                "iterations": r.iterations(),
                "peak": [r.peak(0), r.peak(1)],
                "minimality": r.minimality(),
                "branches": branches,
                "profiles": out,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Run { config } => {
            let s = Scenario::from_path(&config)?;
            let report = run_scenario(&s)?;
            report.write(&output_dir(&s))?;
            print!("{}", report.summary_text());
            if !report.passed() {
                let failed: Vec<_> = report
                    .slopes
                    .iter()
                    .filter(|(_, c)| !c.pass)
                    .map(|(k, _)| k.as_str())
                    .collect();
                return Err(Error::Assertion(format!("convergence targets missed: {}", failed.join(", "))));
            }
        }
        Command::TwoPotential { config } => {
            let s = Scenario::from_path(&config)?;
            let report = run_two_potential(&s)?;
            report.write(&output_dir(&s))?;
            print!("{}", report.summary_text());
        }
        Command::Portrait {
            w1,
            w2,
            x0,
            v0,
            horizon,
            dt,
            out,
        } => {
            let summary = portrait_command([w1, w2], [x0[0], x0[1]], [v0[0], v0[1]], horizon, dt, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Fit { input } => {
            let fit = fit_order_file(&input)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
