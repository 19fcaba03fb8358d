use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dsm_core::report::{
    emit_results, run_scenario, sweep_alpha, verify_file, write_sweep, AlphaSetting,
};
use dsm_core::{DsmError, ModeKind, Scenario};

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "dsm", version, about = "Load-shifting DSM game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Eut,
    Pt,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write CSV and JSON outputs.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario modes.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Compare expected nonparticipating load at one hour across alphas.
    SweepAlpha {
        scenario: PathBuf,
        /// Comma-separated; use a/b/c for a per-customer vector.
        #[arg(long)]
        alphas: String,
        #[arg(long)]
        hour: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute epsilon for a saved result.json.
    Verify { result: PathBuf },
}

enum Failure {
    Dsm(DsmError),
    Mismatch,
    NotConverged(String),
}

impl From<DsmError> for Failure {
    fn from(e: DsmError) -> Self {
        Failure::Dsm(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            mode,
        } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(mode) = mode {
                s.modes = match mode {
                    ModeArg::Eut => vec![ModeKind::Eut],
                    ModeArg::Pt => vec![ModeKind::Pt],
                    ModeArg::Both => vec![ModeKind::Eut, ModeKind::Pt],
                };
            }
            let result = run_scenario(&s)?;
            let files = emit_results(&result, &out)?;
            for m in &result.modes {
                println!(
                    "{}: epsilon {:.6e} (tolerance {:.6e}) after {} iterations{}",
                    m.mode.label(),
                    m.epsilon.max,
                    m.tolerance,
                    m.iterations,
                    if m.converged { "" } else { ", not converged" }
                );
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            if !result.all_converged() {
                return Err(Failure::NotConverged(
                    "solver hit the iteration budget".into(),
                ));
            }
        }
        Command::SweepAlpha {
            scenario,
            alphas,
            hour,
            out,
        } => {
            let s = Scenario::load(&scenario)?;
            let settings = alphas
                .split(',')
                .map(AlphaSetting::parse)
                .collect::<Result<Vec<_>, _>>()?;
            let sweep = sweep_alpha(&s, &settings, hour)?;
            println!(
                "hour {hour}: eut expected nonparticipating load {:.4} kWh",
                sweep.eut_nonparticipating_kwh
            );
            for r in &sweep.rows {
                println!(
                    "alpha {}: pt {:.4} kWh (epsilon {:.3e})",
                    r.label, r.pt_nonparticipating_kwh, r.epsilon
                );
            }
            match sweep.crossover_alpha {
                Some(a) => println!("crossover near alpha {a:.4}"),
                None => println!("no crossover in the swept range"),
            }
            for f in write_sweep(&sweep, &out)? {
                println!("wrote {}", f.display());
            }
            if !sweep.eut_converged || sweep.rows.iter().any(|r| !r.converged) {
                return Err(Failure::NotConverged(
                    "a sweep solve hit the iteration budget".into(),
                ));
            }
        }
        Command::Verify { result } => {
            let report = verify_file(&result)?;
            for c in &report.checks {
                println!(
                    "{}: stored {:.12e} recomputed {:.12e} {}",
                    c.mode,
                    c.stored_epsilon,
                    c.recomputed_epsilon,
                    if c.epsilon_matches && c.load_matches {
                        "ok"
                    } else {
                        "MISMATCH"
                    }
                );
            }
            if !report.ok() {
                return Err(Failure::Mismatch);
            }
            if report.checks.iter().any(|c| !c.converged) {
                return Err(Failure::NotConverged(
                    "stored profile is above its tolerance".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Dsm(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { EXIT_IO } else { EXIT_INVALID })
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("not converged: {msg}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Mismatch) => {
            eprintln!("error: stored values do not match recomputation");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
