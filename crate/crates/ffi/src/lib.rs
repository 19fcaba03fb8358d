//! C ABI over `dsm_core`.
//!
//! Every fallible entry point returns a [`DsmStatus`] and writes its result
//! through an out-pointer. On failure, [`dsm_last_error_message`] describes
//! the error for the calling thread. Games and solutions are opaque handles
//! released with their `_free` functions.
//!
//! Mixed profiles cross the boundary as one flat array: player 0's
//! probabilities, then player 1's, and so on.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use dsm_core::report::{emit_results, run_scenario, verify_file};
use dsm_core::scenario::Scenario;
use dsm_core::solver::{solve, Init, SolverConfig};
use dsm_core::{
    epsilon_of_profile, eut_cost, prelec_weight, pt_cost, ActionSet, DsmError, GameTable,
    MixedStrategyProfile, Mode, WeightingSpec,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    Dimension = 4,
    Io = 5,
    Panic = 6,
}

impl From<&DsmError> for DsmStatus {
    fn from(e: &DsmError) -> Self {
        match e {
            _ if e.is_io() => DsmStatus::Io,
            DsmError::Dimension(_) => DsmStatus::Dimension,
            DsmError::Stage { source, .. } => DsmStatus::from(source.as_ref()),
            _ => DsmStatus::InvalidArgument,
        }
    }
}

/// Solver settings. Obtain defaults from [`dsm_solver_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsmSolverOptions {
    pub lambda: f64,
    pub max_iter: usize,
    pub eps_stop: f64,
    pub check_every: usize,
}

/// Opaque cost table.
pub struct DsmGame {
    inner: GameTable,
}

/// Opaque solver result.
pub struct DsmSolution {
    flat: Vec<f64>,
    epsilon: f64,
    tolerance: f64,
    converged: bool,
    iterations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(DsmStatus, String);

impl From<DsmError> for Fail {
    fn from(e: DsmError) -> Self {
        Fail(DsmStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DsmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DsmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DsmStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn game_ref<'a>(game: *const DsmGame) -> Result<&'a GameTable, Fail> {
    game.as_ref().map(|g| &g.inner).ok_or_else(|| null("game"))
}

unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail(DsmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn split_profile(game: &GameTable, flat: &[f64]) -> Result<MixedStrategyProfile, Fail> {
    let total: usize = game.dims().iter().sum();
    if flat.len() != total {
        return Err(Fail(
            DsmStatus::Dimension,
            format!("profile has {} entries, game needs {total}", flat.len()),
        ));
    }
    let mut rest = flat;
    let mut probs = Vec::with_capacity(game.num_players());
    for &d in game.dims() {
        let (head, tail) = rest.split_at(d);
        probs.push(head.to_vec());
        rest = tail;
    }
    Ok(MixedStrategyProfile::new(probs)?)
}

unsafe fn mode_arg(game: &GameTable, alpha: *const f64, alpha_len: usize) -> Result<Mode, Fail> {
    if alpha.is_null() {
        return Ok(Mode::Eut);
    }
    let a = slice(alpha, alpha_len, "alpha")?;
    if a.len() != game.num_players() {
        return Err(Fail(
            DsmStatus::Dimension,
            format!(
                "{} alpha values for {} players",
                a.len(),
                game.num_players()
            ),
        ));
    }
    Ok(Mode::Pt(WeightingSpec::new(a.to_vec())?))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn dsm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dsm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Prelec weight w(sigma) = exp(-(-ln sigma)^alpha).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_prelec_weight(sigma: f64, alpha: f64, out: *mut f64) -> DsmStatus {
    guard(|| write(out, prelec_weight(sigma, alpha)?, "out"))
}

/// Build a game from per-player cost tables. `dims[i]` is player i's action
/// count; `costs` holds `num_players` row-major tables of `prod(dims)`
/// entries each, player 0's table first, with player 0 the slowest axis.
///
/// # Safety
/// `dims` must hold `num_players` entries and `costs` `costs_len` entries.
/// `out` must be valid for writes. Release the handle with [`dsm_game_free`].
#[no_mangle]
pub unsafe extern "C" fn dsm_game_new(
    num_players: usize,
    dims: *const usize,
    costs: *const f64,
    costs_len: usize,
    out: *mut *mut DsmGame,
) -> DsmStatus {
    guard(|| {
        let dims = slice(dims, num_players, "dims")?;
        let costs = slice(costs, costs_len, "costs")?;
        let joint = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Fail(DsmStatus::Dimension, "joint action count overflows".into()))?;
        if num_players == 0 || joint == 0 || costs.len() != joint * num_players {
            return Err(Fail(
                DsmStatus::Dimension,
                format!(
                    "expected {} costs, got {}",
                    joint * num_players,
                    costs.len()
                ),
            ));
        }
        let sets = dims
            .iter()
            .map(|&d| ActionSet::labels(d))
            .collect::<dsm_core::Result<Vec<_>>>()?;
        let tables = costs.chunks(joint).map(<[f64]>::to_vec).collect();
        let game = GameTable::from_costs(sets, tables)?;
        write(out, Box::into_raw(Box::new(DsmGame { inner: game })), "out")
    })
}

/// Build the load-shifting game described by a scenario JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_game_from_scenario(
    path: *const c_char,
    out: *mut *mut DsmGame,
) -> DsmStatus {
    guard(|| {
        let scenario = Scenario::load(path_arg(path, "path")?)?;
        let game = dsm_core::report::build_game(&scenario.resolve()?)?;
        write(out, Box::into_raw(Box::new(DsmGame { inner: game })), "out")
    })
}

/// # Safety
/// `game` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dsm_game_free(game: *mut DsmGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// # Safety
/// `game` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_game_num_players(game: *const DsmGame, out: *mut usize) -> DsmStatus {
    guard(|| write(out, game_ref(game)?.num_players(), "out"))
}

/// # Safety
/// `game` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_game_num_actions(
    game: *const DsmGame,
    player: usize,
    out: *mut usize,
) -> DsmStatus {
    guard(|| {
        let g = game_ref(game)?;
        let d = *g.dims().get(player).ok_or_else(|| {
            Fail(
                DsmStatus::InvalidArgument,
                format!("player {player} out of range"),
            )
        })?;
        write(out, d, "out")
    })
}

/// Largest minus smallest entry over all cost tables.
///
/// # Safety
/// `game` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_game_spread(game: *const DsmGame, out: *mut f64) -> DsmStatus {
    guard(|| write(out, game_ref(game)?.spread(), "out"))
}

/// Expected cost of `player` under objective probabilities.
///
/// # Safety
/// `profile` must hold `profile_len` entries; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_eut_cost(
    game: *const DsmGame,
    player: usize,
    profile: *const f64,
    profile_len: usize,
    out: *mut f64,
) -> DsmStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = split_profile(g, slice(profile, profile_len, "profile")?)?;
        write(out, eut_cost(player, &p, g)?, "out")
    })
}

/// Expected cost of `player` with opponents' probabilities weighted by the
/// player's own alpha. `alpha` holds one value per player.
///
/// # Safety
/// Array arguments must hold their stated lengths; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_pt_cost(
    game: *const DsmGame,
    player: usize,
    profile: *const f64,
    profile_len: usize,
    alpha: *const f64,
    alpha_len: usize,
    out: *mut f64,
) -> DsmStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = split_profile(g, slice(profile, profile_len, "profile")?)?;
        let w = match mode_arg(g, alpha, alpha_len)? {
            Mode::Pt(w) => w,
            Mode::Eut => return Err(null("alpha")),
        };
        write(out, pt_cost(player, &p, g, &w)?, "out")
    })
}

/// Largest unilateral improvement over all players. Pass `alpha = NULL` for
/// objective probabilities.
///
/// # Safety
/// Array arguments must hold their stated lengths; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_epsilon(
    game: *const DsmGame,
    profile: *const f64,
    profile_len: usize,
    alpha: *const f64,
    alpha_len: usize,
    out: *mut f64,
) -> DsmStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = split_profile(g, slice(profile, profile_len, "profile")?)?;
        let mode = mode_arg(g, alpha, alpha_len)?;
        write(out, epsilon_of_profile(&p, g, &mode)?.max, "out")
    })
}

#[no_mangle]
pub extern "C" fn dsm_solver_options_default() -> DsmSolverOptions {
    let d = SolverConfig::default();
    DsmSolverOptions {
        lambda: d.lambda,
        max_iter: d.max_iter,
        eps_stop: d.eps_stop,
        check_every: d.check_every,
    }
}

/// Run the dynamics from the uniform profile. Pass `alpha = NULL` for
/// objective probabilities. Hitting `max_iter` is not an error; query
/// [`dsm_solution_converged`].
///
/// # Safety
/// `game` must be a live handle, `options` readable, `alpha` NULL or holding
/// `alpha_len` entries, and `out` valid for writes. Release the result with
/// [`dsm_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn dsm_solve(
    game: *const DsmGame,
    options: *const DsmSolverOptions,
    alpha: *const f64,
    alpha_len: usize,
    out: *mut *mut DsmSolution,
) -> DsmStatus {
    guard(|| {
        let g = game_ref(game)?;
        let opts = options.as_ref().ok_or_else(|| null("options"))?;
        let cfg = SolverConfig {
            lambda: opts.lambda,
            max_iter: opts.max_iter,
            eps_stop: opts.eps_stop,
            check_every: opts.check_every,
            snapshot_every: opts.check_every,
            init: Init::Uniform,
            mode: mode_arg(g, alpha, alpha_len)?,
        };
        let outcome = solve(g, &cfg)?;
        let sol = DsmSolution {
            flat: outcome.profile.probs().concat(),
            epsilon: outcome.epsilon.max,
            tolerance: outcome.tolerance,
            converged: outcome.converged,
            iterations: outcome.iterations,
        };
        write(out, Box::into_raw(Box::new(sol)), "out")
    })
}

/// # Safety
/// `solution` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dsm_solution_free(solution: *mut DsmSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Copy the flat profile into `buf`, which must hold exactly the number of
/// entries reported by [`dsm_solution_len`].
///
/// # Safety
/// `solution` must be a live handle and `buf` writable for `buf_len` entries.
#[no_mangle]
pub unsafe extern "C" fn dsm_solution_profile(
    solution: *const DsmSolution,
    buf: *mut f64,
    buf_len: usize,
) -> DsmStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if buf_len != s.flat.len() {
            return Err(Fail(
                DsmStatus::Dimension,
                format!(
                    "buffer holds {buf_len} entries, profile has {}",
                    s.flat.len()
                ),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::ptr::copy_nonoverlapping(s.flat.as_ptr(), buf, buf_len);
        Ok(())
    })
}

/// Number of entries in the flat profile, or 0 for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsm_solution_len(solution: *const DsmSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.flat.len())
}

/// Certified epsilon of the final profile, or NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsm_solution_epsilon(solution: *const DsmSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.epsilon)
}

/// Stopping threshold the epsilon was compared against, or NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsm_solution_tolerance(solution: *const DsmSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.tolerance)
}

/// 1 when converged, 0 otherwise (including NULL).
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsm_solution_converged(solution: *const DsmSolution) -> c_int {
    solution.as_ref().map_or(0, |s| s.converged as c_int)
}

/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsm_solution_iterations(solution: *const DsmSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.iterations)
}

/// Solve a scenario file and write its outputs into `out_dir`. Returns
/// `DSM_STATUS_NOT_CONVERGED` when any mode ran out of iterations; the files
/// are written either way.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dsm_run_scenario_file(
    path: *const c_char,
    out_dir: *const c_char,
) -> DsmStatus {
    guard(|| {
        let scenario = Scenario::load(path_arg(path, "path")?)?;
        let result = run_scenario(&scenario)?;
        emit_results(&result, path_arg(out_dir, "out_dir")?)?;
        if result.all_converged() {
            Ok(())
        } else {
            Err(Fail(
                DsmStatus::NotConverged,
                "solver hit the iteration budget".into(),
            ))
        }
    })
}

/// Recompute the epsilon stored in a result.json. Writes 1 to `ok` when every
/// stored value matches the recomputation, 0 otherwise.
///
/// # Safety
/// `path` must be a NUL-terminated string and `ok` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsm_verify_result_file(path: *const c_char, ok: *mut c_int) -> DsmStatus {
    guard(|| {
        let report = verify_file(path_arg(path, "path")?)?;
        write(ok, report.ok() as c_int, "ok")
    })
}
