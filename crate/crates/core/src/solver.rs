//! Inertia-weighted fictitious play.
//!
//! Each iteration every player best-responds to the same frozen profile
//! `p(k)`, then all players move a step of size `lambda / (k + 1)` towards
//! their best response. `lambda = 1` is classical fictitious play.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};
use crate::game::{
    cond_costs, cond_costs_unchecked, epsilon_of_profile, one_hot, EpsilonReport, GameTable,
    MixedStrategyProfile, Mode,
};

/// Relative slack when checking the per-iteration distance bounds.
const BOUND_SLACK: f64 = 1e-12;

/// Tables at least this large compute best responses in parallel.
const PARALLEL_BR_THRESHOLD: usize = 1 << 12;

/// Smallest stopping tolerance relative to the largest cost magnitude. Cost
/// differences below this are rounding noise of the tabulation.
pub const TOLERANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Uniform,
    Explicit { profile: MixedStrategyProfile },
    RandomSimplex { seed: u64 },
}

impl Init {
    pub fn profile(&self, dims: &[usize]) -> Result<MixedStrategyProfile> {
        match self {
            Init::Uniform => Ok(MixedStrategyProfile::uniform(dims)),
            Init::Explicit { profile } => {
                if profile.dims() != dims {
                    return Err(DsmError::dim(format!(
                        "initial profile shape {:?} does not match game shape {dims:?}",
                        profile.dims()
                    )));
                }
                Ok(profile.clone())
            }
            Init::RandomSimplex { seed } => Ok(random_simplex_profile(dims, *seed)),
        }
    }
}

/// Uniform draw from each player's simplex (normalized exponentials).
pub fn random_simplex_profile(dims: &[usize], seed: u64) -> MixedStrategyProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = dims
        .iter()
        .map(|&d| {
            let draws: Vec<f64> = (0..d).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            draws.into_iter().map(|x| x / total).collect()
        })
        .collect();
    MixedStrategyProfile::from_raw(probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the certified epsilon is at most `eps_stop` times the table's cost spread.
    pub eps_stop: f64,
    pub check_every: usize,
    /// Record the profile every this many iterations.
    pub snapshot_every: usize,
    pub init: Init,
    pub mode: Mode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.5,
            max_iter: 100_000,
            eps_stop: 1e-3,
            check_every: 50,
            snapshot_every: 10,
            init: Init::Uniform,
            mode: Mode::Eut,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(DsmError::invalid(format!(
                "lambda {} outside (0, 1]",
                self.lambda
            )));
        }
        if !(self.eps_stop > 0.0 && self.eps_stop.is_finite()) {
            return Err(DsmError::invalid(format!(
                "eps_stop {} must be > 0",
                self.eps_stop
            )));
        }
        if self.max_iter == 0 || self.check_every == 0 || self.snapshot_every == 0 {
            return Err(DsmError::invalid(
                "max_iter, check_every and snapshot_every must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Best-response action index of each player at iteration `k`.
    pub choices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    pub profile: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckPoint {
    pub k: usize,
    pub epsilon: Vec<f64>,
    pub max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    /// `p(k)` at sampled `k`, always including the first and the last.
    pub snapshots: Vec<Snapshot>,
    pub checks: Vec<CheckPoint>,
    /// Largest observed `|(1 - lambda)/(k + 1) (p_i - v_i)|` divided by its bound.
    pub max_deviation_ratio: f64,
    /// Largest observed `|p_i(k+1) - p_i(k)|` divided by `lambda sqrt(2)/(k + 1)`.
    pub max_step_ratio: f64,
    pub bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub profile: MixedStrategyProfile,
    /// Recomputed on `profile` after the loop ends.
    pub epsilon: EpsilonReport,
    /// See [`stopping_tolerance`].
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: SolverTrace,
}

fn argmin_first(costs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = k;
        }
    }
    best
}

/// Index of player `i`'s cheapest pure action; ties go to the lowest index,
/// which is the earliest hour since action sets are increasing.
pub fn best_response_index(
    i: usize,
    p: &MixedStrategyProfile,
    game: &GameTable,
    mode: &Mode,
) -> Result<usize> {
    Ok(argmin_first(&cond_costs(i, p, game, mode)?))
}

/// Indicator vector of player `i`'s best response.
pub fn best_response(
    i: usize,
    p: &MixedStrategyProfile,
    game: &GameTable,
    mode: &Mode,
) -> Result<Vec<f64>> {
    let k = best_response_index(i, p, game, mode)?;
    Ok(one_hot(game.dims()[i], k))
}

/// `p_i + lambda/(k+1) (v_i - p_i)` for every player, with `v_i` the
/// indicator of `choices[i]`.
pub fn sfp_step(
    p: &MixedStrategyProfile,
    choices: &[usize],
    k: usize,
    lambda: f64,
) -> Result<MixedStrategyProfile> {
    if k == 0 {
        return Err(DsmError::invalid("iteration index starts at 1"));
    }
    if choices.len() != p.num_players()
        || choices.iter().zip(p.probs()).any(|(&c, pi)| c >= pi.len())
    {
        return Err(DsmError::dim(
            "best-response choices do not match the profile",
        ));
    }
    Ok(step_unchecked(p, choices, k, lambda))
}

fn step_unchecked(
    p: &MixedStrategyProfile,
    choices: &[usize],
    k: usize,
    lambda: f64,
) -> MixedStrategyProfile {
    let s = lambda / (k as f64 + 1.0);
    let probs = p
        .probs()
        .iter()
        .zip(choices)
        .map(|(pi, &c)| {
            pi.iter()
                .enumerate()
                .map(|(a, &x)| {
                    let v = if a == c { 1.0 } else { 0.0 };
                    x + s * (v - x)
                })
                .collect()
        })
        .collect();
    MixedStrategyProfile::from_raw(probs)
}

/// Upper bound `(1 - lambda) sqrt(2) / (k + 1)` on the distance between the
/// inertia-weighted belief and the plain fictitious-play belief at step `k`.
pub fn belief_gap_bound(k: usize, lambda: f64) -> f64 {
    (1.0 - lambda) * std::f64::consts::SQRT_2 / (k as f64 + 1.0)
}

fn distance_to_indicator(pi: &[f64], choice: usize) -> f64 {
    pi.iter()
        .enumerate()
        .map(|(a, &x)| {
            let v = if a == choice { 1.0 } else { 0.0 };
            (x - v) * (x - v)
        })
        .sum::<f64>()
        .sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn exceeds(value: f64, bound: f64) -> bool {
    value > bound * (1.0 + BOUND_SLACK) + f64::EPSILON * BOUND_SLACK
}

/// `eps_stop` times the cost spread, floored at [`TOLERANCE_FLOOR`] times the
/// largest cost magnitude.
pub fn stopping_tolerance(game: &GameTable, eps_stop: f64) -> f64 {
    (eps_stop * game.spread()).max(TOLERANCE_FLOOR * game.max_abs_cost())
}

/// Run the dynamics from `config.init` until the epsilon certificate drops to
/// the tolerance at a check point, or `max_iter` is reached. Running out of
/// iterations is reported through `converged = false`, not as an error.
pub fn solve(game: &GameTable, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let mode = &config.mode;
    let n = game.num_players();
    if let Mode::Pt(w) = mode {
        if w.alpha().len() != n {
            return Err(DsmError::dim(format!(
                "{} alpha values for {n} players",
                w.alpha().len()
            )));
        }
    }
    let mut p = config.init.profile(game.dims())?;
    let tolerance = stopping_tolerance(game, config.eps_stop);
    let lambda = config.lambda;
    let parallel = game.num_joint() >= PARALLEL_BR_THRESHOLD && n > 1;

    let mut trace = SolverTrace {
        snapshots: vec![Snapshot {
            k: 1,
            profile: p.probs().to_vec(),
        }],
        ..SolverTrace::default()
    };
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iter {
        let respond = |i: usize| argmin_first(&cond_costs_unchecked(i, &p, game, mode));
        let choices: Vec<usize> = if parallel {
            (0..n).into_par_iter().map(respond).collect()
        } else {
            (0..n).map(respond).collect()
        };

        let kf = k as f64 + 1.0;
        let gap_bound = belief_gap_bound(k, lambda);
        let step_bound = lambda * std::f64::consts::SQRT_2 / kf;
        let next = step_unchecked(&p, &choices, k, lambda);
        for (i, &c) in choices.iter().enumerate() {
            let deviation = (1.0 - lambda) / kf * distance_to_indicator(p.player(i), c);
            let step = distance(next.player(i), p.player(i));
            if exceeds(deviation, gap_bound) || exceeds(step, step_bound) {
                trace.bound_violations += 1;
            }
            if gap_bound > 0.0 {
                trace.max_deviation_ratio = trace.max_deviation_ratio.max(deviation / gap_bound);
            }
            trace.max_step_ratio = trace.max_step_ratio.max(step / step_bound);
        }
        trace.iterations.push(IterationRecord { k, choices });
        p = next;
        iterations = k;

        let last = k == config.max_iter;
        let checking = k % config.check_every == 0;
        if (k + 1) % config.snapshot_every == 0 || last || checking {
            trace.snapshots.push(Snapshot {
                k: k + 1,
                profile: p.probs().to_vec(),
            });
        }
        if checking {
            let rep = epsilon_of_profile(&p, game, mode)?;
            let done = rep.max <= tolerance;
            trace.checks.push(CheckPoint {
                k: k + 1,
                epsilon: rep.per_player,
                max: rep.max,
            });
            if done {
                converged = true;
                break;
            }
        }
    }

    let epsilon = epsilon_of_profile(&p, game, mode)?;
    converged = converged || epsilon.max <= tolerance;
    Ok(SolveOutcome {
        profile: p,
        epsilon,
        tolerance,
        converged,
        iterations,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Mean per-iteration contraction ratio; `None` when no usable terms exist.
    pub rate: Option<f64>,
    pub window_start: usize,
    pub window_end: usize,
    pub terms: usize,
}

/// Empirical rate `|p(k+1) - p*| / |p(k) - p*|` with `p*` the last snapshot,
/// averaged over the second half of the snapshots. Ratios between snapshots
/// `g` iterations apart are converted to per-iteration ratios by a `g`-th root.
/// Terms whose denominator is zero are skipped.
pub fn convergence_rate(snapshots: &[Snapshot]) -> Option<RateEstimate> {
    let n = snapshots.len();
    if n < 10 {
        return None;
    }
    let star: Vec<f64> = snapshots[n - 1].profile.concat();
    let dist: Vec<f64> = snapshots
        .iter()
        .map(|s| distance(&s.profile.concat(), &star))
        .collect();
    let lo = n / 2;
    let hi = n - 2;
    let mut sum = 0.0;
    let mut terms = 0;
    for j in lo..hi {
        if dist[j] == 0.0 {
            continue;
        }
        let gap = (snapshots[j + 1].k - snapshots[j].k).max(1) as f64;
        sum += (dist[j + 1] / dist[j]).powf(1.0 / gap);
        terms += 1;
    }
    Some(RateEstimate {
        rate: (terms > 0).then(|| sum / terms as f64),
        window_start: snapshots[lo].k,
        window_end: snapshots[hi].k,
        terms,
    })
}

/// Look for a repeating pattern in the trailing `window` best-response
/// records. Runs of identical joint responses are collapsed first, so an
/// orbit that lingers longer on each state at every lap still counts as
/// periodic. Returns the period in collapsed states: 1 for a constant
/// response, 2 for a strict alternation, and so on. `None` if fewer than
/// `window` records exist or no period repeats at least twice.
pub fn cycle_detect(records: &[IterationRecord], window: usize) -> Option<usize> {
    if window == 0 || records.len() < window {
        return None;
    }
    let tail = &records[records.len() - window..];
    let mut states: Vec<&[usize]> = Vec::new();
    for r in tail {
        if states.last() != Some(&r.choices.as_slice()) {
            states.push(&r.choices);
        }
    }
    if states.len() == 1 {
        return Some(1);
    }
    (2..=states.len() / 2)
        .find(|&period| (period..states.len()).all(|t| states[t] == states[t - period]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ActionSet;

    fn matching_pennies() -> GameTable {
        GameTable::bimatrix(
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    fn dominant() -> GameTable {
        // action 2 is strictly cheaper for both players whatever the other does
        GameTable::bimatrix(
            &[vec![3.0, 4.0], vec![1.0, 2.0]],
            &[vec![3.0, 1.0], vec![4.0, 2.0]],
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.lambda = 0.0;
        assert!(c.validate().is_err());
        c.lambda = 1.0;
        c.eps_stop = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn best_response_cases() {
        let g = dominant();
        for p in [
            MixedStrategyProfile::uniform(&[2, 2]),
            MixedStrategyProfile::pure(&[2, 2], &[0, 0]).unwrap(),
        ] {
            assert_eq!(
                best_response(0, &p, &g, &Mode::Eut).unwrap(),
                vec![0.0, 1.0]
            );
            assert_eq!(
                best_response(1, &p, &g, &Mode::Eut).unwrap(),
                vec![0.0, 1.0]
            );
        }
        let mp = matching_pennies();
        let p = MixedStrategyProfile::pure(&[2, 2], &[0, 1]).unwrap();
        assert_eq!(best_response_index(0, &p, &mp, &Mode::Eut).unwrap(), 1);
        assert_eq!(best_response_index(1, &p, &mp, &Mode::Eut).unwrap(), 1);
        // exact tie at the uniform profile goes to the first action
        let u = MixedStrategyProfile::uniform(&[2, 2]);
        assert_eq!(best_response_index(0, &u, &mp, &Mode::Eut).unwrap(), 0);
    }

    #[test]
    fn step_cases() {
        let p = MixedStrategyProfile::new(vec![vec![0.5, 0.5]]).unwrap();
        let next = sfp_step(&p, &[0], 1, 0.5).unwrap();
        assert!((next.player(0)[0] - 0.625).abs() < 1e-15);
        assert!((next.player(0)[1] - 0.375).abs() < 1e-15);

        let pure = MixedStrategyProfile::pure(&[3], &[2]).unwrap();
        assert_eq!(sfp_step(&pure, &[2], 7, 0.3).unwrap(), pure);
        assert!(sfp_step(&pure, &[3], 1, 0.3).is_err());
        assert!(sfp_step(&pure, &[0], 0, 0.3).is_err());
    }

    #[test]
    fn gap_bound_values() {
        assert!((belief_gap_bound(1, 0.5) - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert_eq!(belief_gap_bound(5, 1.0), 0.0);
        assert!((1..50).all(|k| belief_gap_bound(k + 1, 0.3) < belief_gap_bound(k, 0.3)));
    }

    #[test]
    fn dominant_game_concentrates() {
        let cfg = SolverConfig {
            eps_stop: 0.01,
            ..SolverConfig::default()
        };
        let out = solve(&dominant(), &cfg).unwrap();
        assert!(out.converged);
        assert!(out.profile.probs().iter().all(|pi| pi[1] >= 0.98));
        assert!(out.trace.iterations.iter().all(|r| r.choices == [1, 1]));
        assert_eq!(cycle_detect(&out.trace.iterations, 20), Some(1));
    }

    #[test]
    fn matching_pennies_converges_to_half_half() {
        let cfg = SolverConfig {
            eps_stop: 0.01,
            max_iter: 50_000,
            ..SolverConfig::default()
        };
        let out = solve(&matching_pennies(), &cfg).unwrap();
        assert!(out.converged);
        for pi in out.profile.probs() {
            assert!((pi[0] - 0.5).abs() <= 0.05);
        }
        assert_eq!(out.trace.bound_violations, 0);
        assert_eq!(
            out.epsilon,
            epsilon_of_profile(&out.profile, &matching_pennies(), &Mode::Eut).unwrap()
        );
    }

    #[test]
    fn fictitious_play_is_running_average() {
        let g = matching_pennies();
        let init = MixedStrategyProfile::new(vec![vec![0.3, 0.7], vec![0.9, 0.1]]).unwrap();
        let cfg = SolverConfig {
            lambda: 1.0,
            max_iter: 500,
            eps_stop: 1e-9,
            check_every: 10_000,
            snapshot_every: 1,
            init: Init::Explicit {
                profile: init.clone(),
            },
            mode: Mode::Eut,
        };
        let out = solve(&g, &cfg).unwrap();
        let kk = out.iterations as f64;
        for i in 0..2 {
            for a in 0..2 {
                let hits = out
                    .trace
                    .iterations
                    .iter()
                    .filter(|r| r.choices[i] == a)
                    .count() as f64;
                let closed = (init.player(i)[a] + hits) / (kk + 1.0);
                assert!((out.profile.player(i)[a] - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_simplex_is_seeded() {
        let a = random_simplex_profile(&[4, 3], 9);
        assert_eq!(a, random_simplex_profile(&[4, 3], 9));
        assert_ne!(a, random_simplex_profile(&[4, 3], 10));
        assert!(MixedStrategyProfile::new(a.into_inner()).is_ok());
    }

    #[test]
    fn rate_on_geometric_sequence() {
        let star = [0.25, 0.75];
        let mut snaps: Vec<Snapshot> = (1..=30)
            .map(|k| {
                let c = 0.5f64.powi(k as i32);
                Snapshot {
                    k,
                    profile: vec![vec![star[0] + c, star[1] - c]],
                }
            })
            .collect();
        snaps.push(Snapshot {
            k: 31,
            profile: vec![star.to_vec()],
        });
        let est = convergence_rate(&snaps).unwrap();
        assert!((est.rate.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rate_on_constant_trace_is_empty() {
        let snaps: Vec<Snapshot> = (1..=20)
            .map(|k| Snapshot {
                k,
                profile: vec![vec![0.5, 0.5]],
            })
            .collect();
        let est = convergence_rate(&snaps).unwrap();
        assert_eq!(est.rate, None);
        assert_eq!(est.terms, 0);
        assert!(convergence_rate(&snaps[..5]).is_none());
    }

    #[test]
    fn cycle_detection_cases() {
        let rec = |v: &[[usize; 2]]| -> Vec<IterationRecord> {
            v.iter()
                .enumerate()
                .map(|(k, c)| IterationRecord {
                    k: k + 1,
                    choices: c.to_vec(),
                })
                .collect()
        };
        let alt = rec(&[[0, 0], [1, 1], [0, 0], [1, 1], [0, 0], [1, 1]]);
        assert_eq!(cycle_detect(&alt, 6), Some(2));
        assert_eq!(cycle_detect(&alt, 7), None);
        let noise = rec(&[[0, 1], [1, 1], [1, 0], [0, 0], [1, 1]]);
        assert_eq!(cycle_detect(&noise, 5), None);
        let lingering = rec(&[
            [0, 0],
            [0, 1],
            [0, 1],
            [1, 1],
            [1, 1],
            [1, 1],
            [0, 0],
            [0, 0],
            [0, 1],
            [0, 1],
            [1, 1],
        ]);
        assert_eq!(cycle_detect(&lingering, 11), Some(3));
    }

    #[test]
    fn pt_mode_requires_matching_alpha() {
        let g = GameTable::from_costs(vec![ActionSet::labels(2).unwrap()], vec![vec![1.0, 0.0]])
            .unwrap();
        let cfg = SolverConfig {
            mode: Mode::Pt(crate::game::WeightingSpec::uniform(2, 0.5).unwrap()),
            ..SolverConfig::default()
        };
        assert!(solve(&g, &cfg).is_err());
    }
}
