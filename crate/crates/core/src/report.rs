//! End-to-end runs: build the game once, solve it per mode, derive the hourly
//! participation metrics, persist everything, and re-certify saved results.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DsmError, Result, StageExt};
use crate::game::{
    dsm_game_build, epsilon_of_profile, ActionSet, EpsilonReport, GameTable, MixedStrategyProfile,
    Mode, WeightingSpec,
};
use crate::load_shift::LoadProfile;
use crate::scenario::{DsmModel, ModeKind, ModelInputs, ResolvedScenario, Scenario};
use crate::solver::{convergence_rate, cycle_detect, solve, RateEstimate, SolveOutcome};

/// Relative tolerance used when re-certifying a saved epsilon.
pub const VERIFY_RTOL: f64 = 1e-9;

/// Probability that a customer is not yet enrolled at `hour`: mass on the
/// opt-out action or on start hours after `hour`.
pub fn nonparticipation_probability(
    p_i: &[f64],
    actions: &ActionSet,
    hour: usize,
    sentinel: usize,
) -> f64 {
    actions
        .hours()
        .iter()
        .zip(p_i)
        .filter(|(&a, _)| a == sentinel || a > hour)
        .map(|(_, &q)| q)
        .sum()
}

/// Expected baseline demand at `hour` of customers not yet enrolled, under
/// the objective probabilities in `p`. Customers act independently, so the
/// expectation over joint actions factors per customer.
pub fn expected_nonparticipating_load(
    p: &MixedStrategyProfile,
    profiles: &[LoadProfile],
    action_sets: &[ActionSet],
    sentinel: usize,
    hour: usize,
) -> Result<f64> {
    let n = profiles.len();
    if p.num_players() != n || action_sets.len() != n {
        return Err(DsmError::dim(
            "profile, load profiles and action sets differ in length",
        ));
    }
    if p.dims() != action_sets.iter().map(ActionSet::len).collect::<Vec<_>>() {
        return Err(DsmError::dim("profile does not match the action sets"));
    }
    let horizon = profiles[0].horizon();
    if hour == 0 || hour > horizon {
        return Err(DsmError::HourOutOfRange { hour, horizon });
    }
    Ok((0..n)
        .map(|i| {
            profiles[i].at(hour)
                * nonparticipation_probability(p.player(i), &action_sets[i], hour, sentinel)
        })
        .sum())
}

pub fn nonparticipating_profile(p: &MixedStrategyProfile, model: &DsmModel) -> Result<Vec<f64>> {
    (1..=model.horizon())
        .map(|h| {
            expected_nonparticipating_load(
                p,
                &model.profiles,
                &model.action_sets,
                model.sentinel(),
                h,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub k: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    #[serde(flatten)]
    pub mode: Mode,
    pub profile: MixedStrategyProfile,
    pub epsilon: EpsilonReport,
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub nonparticipating_kwh: Vec<f64>,
    pub rate: Option<RateEstimate>,
    pub cycle_period: Option<usize>,
    pub bound_violations: usize,
    pub max_deviation_ratio: f64,
    pub max_step_ratio: f64,
    pub trace_customer: usize,
    pub trace: Vec<TraceSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub timestamp_unix: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub name: String,
    pub provenance: Provenance,
    pub scenario: Scenario,
    pub inputs: ModelInputs,
    pub joint_actions: usize,
    pub cost_spread: f64,
    pub actual_demand_kwh: Vec<f64>,
    pub modes: Vec<ModeResult>,
}

impl RunResult {
    pub fn mode(&self, kind: ModeKind) -> Option<&ModeResult> {
        self.modes.iter().find(|m| {
            matches!(
                (kind, &m.mode),
                (ModeKind::Eut, Mode::Eut) | (ModeKind::Pt, Mode::Pt(_))
            )
        })
    }

    pub fn all_converged(&self) -> bool {
        self.modes.iter().all(|m| m.converged)
    }
}

pub fn config_hash(scenario: &Scenario) -> Result<String> {
    let bytes = serde_json::to_vec(scenario)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn build_game(resolved: &ResolvedScenario) -> Result<GameTable> {
    let m = &resolved.model;
    dsm_game_build(
        &m.profiles,
        &m.target,
        &m.params,
        &m.action_sets,
        resolved.table_cap,
    )
}

fn mode_result(resolved: &ResolvedScenario, mode: Mode, out: SolveOutcome) -> Result<ModeResult> {
    let tc = resolved.trace_customer;
    let trace = out
        .trace
        .snapshots
        .iter()
        .map(|s| TraceSample {
            k: s.k,
            probs: s.profile[tc].clone(),
        })
        .collect();
    let window = (out.trace.iterations.len() / 2).max(2);
    Ok(ModeResult {
        mode,
        nonparticipating_kwh: nonparticipating_profile(&out.profile, &resolved.model)?,
        rate: convergence_rate(&out.trace.snapshots),
        cycle_period: cycle_detect(&out.trace.iterations, window),
        bound_violations: out.trace.bound_violations,
        max_deviation_ratio: out.trace.max_deviation_ratio,
        max_step_ratio: out.trace.max_step_ratio,
        trace_customer: tc,
        trace,
        profile: out.profile,
        epsilon: out.epsilon,
        tolerance: out.tolerance,
        converged: out.converged,
        iterations: out.iterations,
    })
}

fn solve_mode(resolved: &ResolvedScenario, game: &GameTable, mode: Mode) -> Result<ModeResult> {
    let cfg = resolved.solver_config(mode.clone())?;
    let out = solve(game, &cfg)?;
    mode_result(resolved, mode, out)
}

/// Build the game once and solve it in every requested mode. All modes share
/// the same initial profile.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    let resolved = scenario.resolve().stage("scenario")?;
    let game = build_game(&resolved).stage("game table")?;
    let modes: Vec<Mode> = resolved.modes.iter().map(|&k| resolved.mode(k)).collect();
    let results = modes
        .into_par_iter()
        .map(|mode| solve_mode(&resolved, &game, mode))
        .collect::<Result<Vec<_>>>()
        .stage("solve")?;
    let m = &resolved.model;
    Ok(RunResult {
        name: resolved.name.clone(),
        provenance: Provenance {
            config_hash: config_hash(scenario)?,
            seed: resolved.seed,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        scenario: scenario.clone(),
        inputs: resolved.inputs.clone(),
        joint_actions: game.num_joint(),
        cost_spread: game.spread(),
        actual_demand_kwh: (1..=m.horizon())
            .map(|h| m.profiles.iter().map(|p| p.at(h)).sum())
            .collect(),
        modes: results,
    })
}

/// One weighting setting in an alpha sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Shared(f64),
    PerCustomer(Vec<f64>),
}

impl AlphaSetting {
    pub fn label(&self) -> String {
        match self {
            AlphaSetting::Shared(a) => format!("{a}"),
            AlphaSetting::PerCustomer(v) => v
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join("/"),
        }
    }

    fn spec(&self, n: usize) -> Result<WeightingSpec> {
        match self {
            AlphaSetting::Shared(a) => WeightingSpec::uniform(n, *a),
            AlphaSetting::PerCustomer(v) if v.len() == n => WeightingSpec::new(v.clone()),
            AlphaSetting::PerCustomer(v) => Err(DsmError::dim(format!(
                "alpha vector {} has {} entries for {n} customers",
                self.label(),
                v.len()
            ))),
        }
    }

    /// Parse `0.7` or a slash-separated per-customer vector `0.5/0.5/0.2`.
    pub fn parse(s: &str) -> Result<Self> {
        let parse_one = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| DsmError::invalid(format!("alpha {t:?} is not a number")))
        };
        if s.contains('/') {
            Ok(AlphaSetting::PerCustomer(
                s.split('/').map(parse_one).collect::<Result<_>>()?,
            ))
        } else {
            Ok(AlphaSetting::Shared(parse_one(s)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub alpha: Vec<f64>,
    pub pt_nonparticipating_kwh: f64,
    pub epsilon: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub hour: usize,
    pub total_demand_kwh: f64,
    pub eut_nonparticipating_kwh: f64,
    pub eut_epsilon: f64,
    pub eut_converged: bool,
    pub rows: Vec<SweepRow>,
    /// Interpolated shared alpha where the PT level crosses the EUT level.
    pub crossover_alpha: Option<f64>,
}

/// First alpha where `pt - eut` changes sign over shared alphas sorted
/// ascending, by linear interpolation between the bracketing points. Points
/// where the levels coincide only count when the sign differs on either side.
pub fn crossover(points: &[(f64, f64)], eut: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(a, v)| (a, v - eut)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut last: Option<(f64, f64)> = None;
    let mut touch: Option<f64> = None;
    for (a, d) in pts {
        if d == 0.0 {
            touch = touch.or(Some(a));
            continue;
        }
        if let Some((a0, d0)) = last {
            if (d0 < 0.0) != (d < 0.0) {
                return Some(touch.unwrap_or(a0 + (a - a0) * d0 / (d0 - d)));
            }
        }
        last = Some((a, d));
        touch = None;
    }
    None
}

/// One EUT solve plus one PT solve per alpha setting, reporting the expected
/// nonparticipating load at `hour`.
pub fn sweep_alpha(
    scenario: &Scenario,
    settings: &[AlphaSetting],
    hour: usize,
) -> Result<SweepResult> {
    if settings.is_empty() {
        return Err(DsmError::invalid("alpha list must not be empty"));
    }
    let resolved = scenario.resolve().stage("scenario")?;
    let m = &resolved.model;
    if hour == 0 || hour > m.horizon() {
        return Err(DsmError::HourOutOfRange {
            hour,
            horizon: m.horizon(),
        });
    }
    let n = m.profiles.len();
    let specs = settings
        .iter()
        .map(|s| s.spec(n))
        .collect::<Result<Vec<_>>>()
        .stage("alpha list")?;
    let game = build_game(&resolved).stage("game table")?;
    let load_at = |p: &MixedStrategyProfile| {
        expected_nonparticipating_load(p, &m.profiles, &m.action_sets, m.sentinel(), hour)
    };

    let eut = solve(&game, &resolved.solver_config(Mode::Eut)?).stage("solve eut")?;
    let rows = settings
        .par_iter()
        .zip(specs)
        .map(|(setting, spec)| {
            let out = solve(&game, &resolved.solver_config(Mode::Pt(spec.clone()))?)?;
            Ok(SweepRow {
                label: setting.label(),
                alpha: spec.alpha().to_vec(),
                pt_nonparticipating_kwh: load_at(&out.profile)?,
                epsilon: out.epsilon.max,
                converged: out.converged,
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage("solve pt")?;

    let eut_load = load_at(&eut.profile)?;
    let shared: Vec<(f64, f64)> = settings
        .iter()
        .zip(&rows)
        .filter_map(|(s, r)| match s {
            AlphaSetting::Shared(a) => Some((*a, r.pt_nonparticipating_kwh)),
            AlphaSetting::PerCustomer(_) => None,
        })
        .collect();
    Ok(SweepResult {
        name: resolved.name.clone(),
        hour,
        total_demand_kwh: m.profiles.iter().map(|p| p.at(hour)).sum(),
        eut_nonparticipating_kwh: eut_load,
        eut_epsilon: eut.epsilon.max,
        eut_converged: eut.converged,
        crossover_alpha: crossover(&shared, eut_load),
        rows,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path)
        .map_err(|e| DsmError::io(path, std::io::Error::other(e.to_string())))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| DsmError::io(path, std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| DsmError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| DsmError::io(path, e))
}

/// Write strategies.csv, nonparticipating_load.csv, trace.csv and
/// result.json. With no solved modes only result.json is written.
pub fn emit_results(result: &RunResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| DsmError::io(out_dir, e))?;
    let mut written = Vec::new();
    let eut = result.mode(ModeKind::Eut);
    let pt = result.mode(ModeKind::Pt);

    if !result.modes.is_empty() {
        let prob =
            |m: Option<&ModeResult>, i: usize, k: usize| fmt_opt(m.map(|m| m.profile.player(i)[k]));
        let mut rows = Vec::new();
        for (i, id) in result.inputs.customer_ids.iter().enumerate() {
            for (k, a) in result.inputs.action_sets[i].iter().enumerate() {
                rows.push(vec![
                    id.clone(),
                    a.to_string(),
                    prob(eut, i, k),
                    prob(pt, i, k),
                ]);
            }
        }
        let path = out_dir.join("strategies.csv");
        write_rows(
            &path,
            &["customer", "action", "eut_prob", "pt_prob"].map(String::from),
            &rows,
        )?;
        written.push(path);

        let load = |m: Option<&ModeResult>, h: usize| fmt_opt(m.map(|m| m.nonparticipating_kwh[h]));
        let rows: Vec<Vec<String>> = result
            .actual_demand_kwh
            .iter()
            .enumerate()
            .map(|(h, d)| {
                vec![
                    (h + 1).to_string(),
                    d.to_string(),
                    load(eut, h),
                    load(pt, h),
                ]
            })
            .collect();
        let path = out_dir.join("nonparticipating_load.csv");
        write_rows(
            &path,
            &[
                "hour",
                "actual_demand_kwh",
                "eut_expected_kwh",
                "pt_expected_kwh",
            ]
            .map(String::from),
            &rows,
        )?;
        written.push(path);

        let tc = result.modes[0].trace_customer;
        let mut header = vec!["mode".to_string(), "iteration".to_string()];
        header.extend(
            result.inputs.action_sets[tc]
                .iter()
                .map(|a| format!("p_{a}")),
        );
        let rows: Vec<Vec<String>> = result
            .modes
            .iter()
            .flat_map(|m| {
                m.trace.iter().map(move |s| {
                    let mut row = vec![m.mode.label().to_string(), s.k.to_string()];
                    row.extend(s.probs.iter().map(|p| p.to_string()));
                    row
                })
            })
            .collect();
        let path = out_dir.join("trace.csv");
        write_rows(&path, &header, &rows)?;
        written.push(path);
    }

    let path = out_dir.join("result.json");
    write_json(&path, result)?;
    written.push(path);
    Ok(written)
}

pub fn write_sweep(sweep: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| DsmError::io(out_dir, e))?;
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                sweep.hour.to_string(),
                sweep.eut_nonparticipating_kwh.to_string(),
                r.pt_nonparticipating_kwh.to_string(),
                (r.pt_nonparticipating_kwh - sweep.eut_nonparticipating_kwh).to_string(),
                r.epsilon.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect();
    let csv_path = out_dir.join("sweep_alpha.csv");
    write_rows(
        &csv_path,
        &[
            "alpha",
            "hour",
            "eut_expected_kwh",
            "pt_expected_kwh",
            "pt_minus_eut_kwh",
            "pt_epsilon",
            "pt_converged",
        ]
        .map(String::from),
        &rows,
    )?;
    let json_path = out_dir.join("sweep_alpha.json");
    write_json(&json_path, sweep)?;
    Ok(vec![csv_path, json_path])
}

pub fn load_result(path: &Path) -> Result<RunResult> {
    let text = std::fs::read_to_string(path).map_err(|e| DsmError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCheck {
    pub mode: String,
    pub stored_epsilon: f64,
    pub recomputed_epsilon: f64,
    pub epsilon_matches: bool,
    pub load_matches: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<ModeCheck>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.epsilon_matches && c.load_matches)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VERIFY_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// Rebuild the game from the embedded inputs and recompute every mode's
/// epsilon and expected nonparticipating load.
pub fn verify_result(result: &RunResult) -> Result<VerifyReport> {
    let model = result.inputs.build().stage("inputs")?;
    let cap = result
        .scenario
        .table_cap
        .unwrap_or(crate::game::DEFAULT_TABLE_CAP);
    let game = dsm_game_build(
        &model.profiles,
        &model.target,
        &model.params,
        &model.action_sets,
        cap,
    )
    .stage("game table")?;
    let checks = result
        .modes
        .iter()
        .map(|m| {
            let rep = epsilon_of_profile(&m.profile, &game, &m.mode)?;
            let loads = nonparticipating_profile(&m.profile, &model)?;
            Ok(ModeCheck {
                mode: m.mode.label().to_string(),
                stored_epsilon: m.epsilon.max,
                recomputed_epsilon: rep.max,
                epsilon_matches: close(m.epsilon.max, rep.max)
                    && m.epsilon.per_player.len() == rep.per_player.len()
                    && m.epsilon
                        .per_player
                        .iter()
                        .zip(&rep.per_player)
                        .all(|(a, b)| close(*a, *b)),
                load_matches: loads.len() == m.nonparticipating_kwh.len()
                    && loads
                        .iter()
                        .zip(&m.nonparticipating_kwh)
                        .all(|(a, b)| close(*a, *b)),
                converged: rep.max <= m.tolerance,
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage("verify")?;
    Ok(VerifyReport { checks })
}

pub fn verify_file(path: &Path) -> Result<VerifyReport> {
    verify_result(&load_result(path)?)
}
