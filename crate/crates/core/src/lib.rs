//! Day-ahead load-shifting demand-side management as a finite game.
//!
//! Customers pick the hour at which they start shifting demand toward a
//! target profile. Expected bills are evaluated either with objective
//! probabilities or with Prelec-weighted beliefs, and inertia-weighted
//! fictitious play searches for an approximate mixed equilibrium.

pub mod error;
pub mod game;
pub mod ingest;
pub mod load_shift;
pub mod report;
pub mod scenario;
pub mod solver;

pub use error::{DsmError, Result};
pub use game::{
    cond_cost, cond_costs, dsm_game_build, epsilon_of_profile, eut_cost, mixed_cost, prelec_weight,
    pt_cost, ActionSet, EpsilonReport, GameTable, MixedStrategyProfile, Mode, WeightingSpec,
};
pub use load_shift::{
    bill, bills, build_target, price, shift_schedule, DsmSchedule, JointAction, LoadProfile,
    ShiftParams, TargetProfile,
};
pub use report::{
    emit_results, expected_nonparticipating_load, run_scenario, sweep_alpha, verify_file,
    verify_result, AlphaSetting, RunResult, SweepResult, VerifyReport,
};
pub use scenario::{ModeKind, Scenario};
pub use solver::{
    best_response, convergence_rate, cycle_detect, sfp_step, solve, Init, SolveOutcome,
    SolverConfig,
};
