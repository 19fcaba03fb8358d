//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//! Run with `cargo test -p dsm-core --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dsm_core::game::ActionSet;
use dsm_core::report::{emit_results, run_scenario, verify_file, RunResult};
use dsm_core::solver::{random_simplex_profile, SolveOutcome};
use dsm_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, ok: bool, detail: String) {
    println!(
        "criterion {n}: {} {name} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

fn pinned_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/evening_peak.json")
}

fn pinned(modes: &[ModeKind]) -> Scenario {
    let mut s = Scenario::load(&pinned_path()).unwrap();
    s.modes = modes.to_vec();
    s
}

fn matching_pennies() -> GameTable {
    // row pays on a mismatch, column pays on a match
    GameTable::bimatrix(
        &[vec![0.0, 1.0], vec![1.0, 0.0]],
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
    )
    .unwrap()
}

fn dominant() -> GameTable {
    GameTable::bimatrix(
        &[vec![3.0, 4.0], vec![1.0, 2.0]],
        &[vec![3.0, 1.0], vec![4.0, 2.0]],
    )
    .unwrap()
}

fn pennies_config() -> SolverConfig {
    SolverConfig {
        lambda: 0.5,
        max_iter: 50_000,
        eps_stop: 0.01,
        init: Init::Uniform,
        mode: Mode::Eut,
        ..SolverConfig::default()
    }
}

fn random_game(rng: &mut ChaCha8Rng) -> GameTable {
    let n = rng.random_range(1..=4);
    let sets: Vec<ActionSet> = (0..n)
        .map(|_| ActionSet::labels(rng.random_range(1..=4)).unwrap())
        .collect();
    let total: usize = sets.iter().map(ActionSet::len).product();
    let costs = (0..n)
        .map(|_| (0..total).map(|_| rng.random_range(0.0..=10.0)).collect())
        .collect();
    GameTable::from_costs(sets, costs).unwrap()
}

#[test]
fn criterion_1_weighting_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for g_seed in 0..200u64 {
        let g = random_game(&mut rng);
        let w = WeightingSpec::uniform(g.num_players(), 1.0).unwrap();
        for p_seed in 0..5 {
            let p = random_simplex_profile(g.dims(), g_seed * 16 + p_seed);
            for i in 0..g.num_players() {
                let e = eut_cost(i, &p, &g).unwrap();
                let t = pt_cost(i, &p, &g, &w).unwrap();
                worst = worst.max((t - e).abs() / e.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "pt_cost(alpha=1) equals eut_cost",
        worst <= 1e-12 && elapsed < Duration::from_secs(10),
        format!("200 games, max relative gap {worst:e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_conservation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut min_y = f64::INFINITY;
    let mut schedules = 0usize;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let h = if rng.random_bool(0.5) { 3 } else { 24 };
        let profiles: Vec<LoadProfile> = (0..n)
            .map(|i| {
                let d = (0..h).map(|_| rng.random_range(0.0..100.0)).collect();
                LoadProfile::new(format!("c{i}"), d).unwrap()
            })
            .collect();
        let total: Vec<f64> = (0..h)
            .map(|t| profiles.iter().map(|p| p.demand()[t]).sum())
            .collect();
        let target = TargetProfile::new(
            total
                .iter()
                .map(|g| g * rng.random_range(0.3..1.2))
                .collect(),
        )
        .unwrap();
        let gamma = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
        let params = ShiftParams::new(gamma, 1.0, None).unwrap();
        let sets: Vec<ActionSet> = (0..n)
            .map(|_| {
                let mut hours: Vec<usize> = (0..rng.random_range(1..=3))
                    .map(|_| rng.random_range(1..=h))
                    .collect();
                hours.sort_unstable();
                hours.dedup();
                ActionSet::new(hours, h).unwrap()
            })
            .collect();
        let dims: Vec<usize> = sets.iter().map(ActionSet::len).collect();
        let joint: usize = dims.iter().product();
        for flat in 0..joint {
            let mut rem = flat;
            let mut starts = vec![0; n];
            for j in (0..n).rev() {
                starts[j] = sets[j].hours()[rem % dims[j]];
                rem /= dims[j];
            }
            let s = shift_schedule(&profiles, &target, &params, &JointAction(starts)).unwrap();
            for (i, p) in profiles.iter().enumerate() {
                let before = p.daily_total();
                let after: f64 = s.y[i].iter().sum();
                worst = worst.max((before - after).abs() / before.max(f64::MIN_POSITIVE));
                min_y = s.y[i].iter().cloned().fold(min_y, f64::min);
            }
            schedules += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "daily demand conserved, y >= 0",
        worst <= 1e-9 && min_y >= 0.0 && elapsed < Duration::from_secs(30),
        format!("500 instances, {schedules} schedules, max relative drift {worst:e}, min y {min_y}, {elapsed:.2?}"),
    );
}

fn pennies_outcome() -> (SolveOutcome, Duration) {
    let start = Instant::now();
    let out = solve(&matching_pennies(), &pennies_config()).unwrap();
    (out, start.elapsed())
}

#[test]
fn criterion_3_matching_pennies() {
    let (out, elapsed) = pennies_outcome();
    let spread = matching_pennies().spread();
    let linf = out
        .profile
        .probs()
        .iter()
        .flatten()
        .map(|x| (x - 0.5).abs())
        .fold(0.0, f64::max);
    report(
        3,
        "matching pennies reaches the mixed equilibrium",
        out.converged
            && linf <= 0.05
            && out.epsilon.max <= 0.01 * spread
            && out.iterations <= 50_000
            && elapsed < Duration::from_secs(5),
        format!(
            "{} iterations, L-inf {linf:.4}, epsilon {:.3e} vs {:.3e}, {elapsed:.2?}",
            out.iterations,
            out.epsilon.max,
            0.01 * spread
        ),
    );
}

fn solve_pinned(kind: ModeKind) -> (RunResult, Duration) {
    let start = Instant::now();
    let r = run_scenario(&pinned(&[kind])).unwrap();
    (r, start.elapsed())
}

#[test]
fn criterion_4_certified_at_scale() {
    let mut ok = true;
    let mut details = Vec::new();
    for kind in [ModeKind::Eut, ModeKind::Pt] {
        let (r, elapsed) = solve_pinned(kind);
        let m = &r.modes[0];
        let dir = tempfile::tempdir().unwrap();
        emit_results(&r, dir.path()).unwrap();
        let check = verify_file(&dir.path().join("result.json")).unwrap();
        let c = &check.checks[0];
        let within = m.epsilon.max <= 0.01 * r.cost_spread;
        let reproduced = check.ok() && c.recomputed_epsilon == m.epsilon.max;
        ok &= r.joint_actions == 4096
            && m.converged
            && within
            && reproduced
            && elapsed < Duration::from_secs(60);
        details.push(format!(
            "{}: epsilon {:.4e} <= {:.4e} after {} iterations, verify {:.4e}, {elapsed:.2?}",
            m.mode.label(),
            m.epsilon.max,
            0.01 * r.cost_spread,
            m.iterations,
            c.recomputed_epsilon
        ));
    }
    report(
        4,
        "6x4 scenario certified in both modes",
        ok,
        details.join("; "),
    );
}

#[test]
fn criterion_5_belief_gap_bounds() {
    let (pennies, _) = pennies_outcome();
    let mut violations = pennies.trace.bound_violations;
    let mut dev = pennies.trace.max_deviation_ratio;
    let mut step = pennies.trace.max_step_ratio;
    let mut iterations = pennies.iterations;
    for kind in [ModeKind::Eut, ModeKind::Pt] {
        let (r, _) = solve_pinned(kind);
        let m = &r.modes[0];
        violations += m.bound_violations;
        dev = dev.max(m.max_deviation_ratio);
        step = step.max(m.max_step_ratio);
        iterations += m.iterations;
    }
    report(
        5,
        "deviation and step bounds hold every iteration",
        violations == 0 && dev <= 1.0 + 1e-12 && step <= 1.0 + 1e-12,
        format!(
            "{iterations} iterations, {violations} violations, max ratios {dev:.6} / {step:.6}"
        ),
    );
}

#[test]
fn criterion_6_cycling_diagnostic() {
    let cfg = SolverConfig {
        lambda: 1.0,
        max_iter: 3_000,
        eps_stop: 1e-9,
        check_every: 3_000,
        snapshot_every: 1,
        init: Init::Uniform,
        mode: Mode::Eut,
    };
    let out = solve(&matching_pennies(), &cfg).unwrap();
    let records = &out.trace.iterations;
    let period = cycle_detect(records, records.len());

    // p(k+1) = (p(1) + sum_{j<=k} v(j)) / (k + 1)
    let mut sums = vec![vec![0.5, 0.5]; 2];
    let mut worst = 0.0f64;
    let mut compared = 0;
    let snaps = &out.trace.snapshots;
    let mut next_snap = 1;
    for r in records {
        for (i, &c) in r.choices.iter().enumerate() {
            sums[i][c] += 1.0;
        }
        while next_snap < snaps.len() && snaps[next_snap].k < r.k + 1 {
            next_snap += 1;
        }
        if next_snap < snaps.len() && snaps[next_snap].k == r.k + 1 {
            for (i, pi) in snaps[next_snap].profile.iter().enumerate() {
                for (a, &x) in pi.iter().enumerate() {
                    worst = worst.max((x - sums[i][a] / (r.k as f64 + 1.0)).abs());
                }
            }
            compared += 1;
        }
    }

    let dom_cfg = SolverConfig {
        lambda: 1.0,
        max_iter: 500,
        check_every: 500,
        eps_stop: 1e-9,
        ..SolverConfig::default()
    };
    let dom = solve(&dominant(), &dom_cfg).unwrap();
    let dom_period = cycle_detect(&dom.trace.iterations, 100);

    report(
        6,
        "lambda=1 cycling detected, closed form matches",
        period.is_some_and(|p| p >= 2)
            && matches!(dom_period, Some(1) | None)
            && worst <= 1e-12
            && compared == records.len(),
        format!(
            "pennies period {period:?}, dominant period {dom_period:?}, {compared} iterates, max gap {worst:e}"
        ),
    );
}

#[test]
fn criterion_7_pt_emphasizes_modal_action() {
    let r = run_scenario(&pinned(&[ModeKind::Eut, ModeKind::Pt])).unwrap();
    let eut = &r.mode(ModeKind::Eut).unwrap().profile;
    let pt = &r.mode(ModeKind::Pt).unwrap().profile;
    let n = eut.num_players();
    let mut hits = Vec::new();
    for i in 0..n {
        let e = eut.player(i);
        let top = (0..e.len()).fold(0, |b, k| if e[k] > e[b] { k } else { b });
        if pt.player(i)[top] >= e[top] {
            hits.push(r.inputs.customer_ids[i].clone());
        }
    }
    report(
        7,
        "PT keeps or raises the EUT modal action for a strict majority",
        2 * hits.len() > n,
        format!("{}/{n} customers: {}", hits.len(), hits.join(" ")),
    );
}

#[test]
fn criterion_8_deterministic_outputs() {
    let files = ["strategies.csv", "nonparticipating_load.csv", "trace.csv"];
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let r = run_scenario(&pinned(&[ModeKind::Eut, ModeKind::Pt])).unwrap();
        emit_results(&r, dir.path()).unwrap();
        files.map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    let a = run();
    let b = run();
    let same: Vec<bool> = a.iter().zip(&b).map(|(x, y)| x == y).collect();
    report(
        8,
        "identical runs give byte-identical CSVs",
        same.iter().all(|&s| s),
        files
            .iter()
            .zip(&same)
            .map(|(f, s)| format!("{f} {}", if *s { "identical" } else { "differs" }))
            .collect::<Vec<_>>()
            .join(", "),
    );
}
