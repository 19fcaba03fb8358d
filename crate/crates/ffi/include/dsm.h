#ifndef DSM_H
#define DSM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DsmStatus {
  DSM_STATUS_OK = 0,
  DSM_STATUS_NULL_POINTER = 1,
  DSM_STATUS_INVALID_ARGUMENT = 2,
  DSM_STATUS_NOT_CONVERGED = 3,
  DSM_STATUS_DIMENSION = 4,
  DSM_STATUS_IO = 5,
  DSM_STATUS_PANIC = 6,
} DsmStatus;

// Opaque cost table.
typedef struct DsmGame DsmGame;

// Opaque solver result.
typedef struct DsmSolution DsmSolution;

// Solver settings. Obtain defaults from [`dsm_solver_options_default`].
typedef struct DsmSolverOptions {
  double lambda;
  size_t max_iter;
  double eps_stop;
  size_t check_every;
} DsmSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next call on the same thread.
const char *dsm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dsm_version(void);

// Prelec weight w(sigma) = exp(-(-ln sigma)^alpha).
//
// # Safety
// `out` must be valid for writes.
enum DsmStatus dsm_prelec_weight(double sigma, double alpha, double *out);

// Build a game from per-player cost tables. `dims[i]` is player i's action
// count; `costs` holds `num_players` row-major tables of `prod(dims)`
// entries each, player 0's table first, with player 0 the slowest axis.
//
// # Safety
// `dims` must hold `num_players` entries and `costs` `costs_len` entries.
// `out` must be valid for writes. Release the handle with [`dsm_game_free`].
enum DsmStatus dsm_game_new(size_t num_players,
                            const size_t *dims,
                            const double *costs,
                            size_t costs_len,
                            struct DsmGame **out);

// Build the load-shifting game described by a scenario JSON file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum DsmStatus dsm_game_from_scenario(const char *path, struct DsmGame **out);

// # Safety
// `game` must come from this library and not be used afterwards. NULL is ignored.
void dsm_game_free(struct DsmGame *game);

// # Safety
// `game` must be a live handle and `out` valid for writes.
enum DsmStatus dsm_game_num_players(const struct DsmGame *game, size_t *out);

// # Safety
// `game` must be a live handle and `out` valid for writes.
enum DsmStatus dsm_game_num_actions(const struct DsmGame *game, size_t player, size_t *out);

// Largest minus smallest entry over all cost tables.
//
// # Safety
// `game` must be a live handle and `out` valid for writes.
enum DsmStatus dsm_game_spread(const struct DsmGame *game, double *out);

// Expected cost of `player` under objective probabilities.
//
// # Safety
// `profile` must hold `profile_len` entries; `out` must be valid for writes.
enum DsmStatus dsm_eut_cost(const struct DsmGame *game,
                            size_t player,
                            const double *profile,
                            size_t profile_len,
                            double *out);

// Expected cost of `player` with opponents' probabilities weighted by the
// player's own alpha. `alpha` holds one value per player.
//
// # Safety
// Array arguments must hold their stated lengths; `out` must be valid for writes.
enum DsmStatus dsm_pt_cost(const struct DsmGame *game,
                           size_t player,
                           const double *profile,
                           size_t profile_len,
                           const double *alpha,
                           size_t alpha_len,
                           double *out);

// Largest unilateral improvement over all players. Pass `alpha = NULL` for
// objective probabilities.
//
// # Safety
// Array arguments must hold their stated lengths; `out` must be valid for writes.
enum DsmStatus dsm_epsilon(const struct DsmGame *game,
                           const double *profile,
                           size_t profile_len,
                           const double *alpha,
                           size_t alpha_len,
                           double *out);

struct DsmSolverOptions dsm_solver_options_default(void);

// Run the dynamics from the uniform profile. Pass `alpha = NULL` for
// objective probabilities. Hitting `max_iter` is not an error; query
// [`dsm_solution_converged`].
//
// # Safety
// `game` must be a live handle, `options` readable, `alpha` NULL or holding
// `alpha_len` entries, and `out` valid for writes. Release the result with
// [`dsm_solution_free`].
enum DsmStatus dsm_solve(const struct DsmGame *game,
                         const struct DsmSolverOptions *options,
                         const double *alpha,
                         size_t alpha_len,
                         struct DsmSolution **out);

// # Safety
// `solution` must come from this library and not be used afterwards. NULL is ignored.
void dsm_solution_free(struct DsmSolution *solution);

// Copy the flat profile into `buf`, which must hold exactly the number of
// entries reported by [`dsm_solution_len`].
//
// # Safety
// `solution` must be a live handle and `buf` writable for `buf_len` entries.
enum DsmStatus dsm_solution_profile(const struct DsmSolution *solution,
                                    double *buf,
                                    size_t buf_len);

// Number of entries in the flat profile, or 0 for NULL.
//
// # Safety
// `solution` must be NULL or a live handle.
size_t dsm_solution_len(const struct DsmSolution *solution);

// Certified epsilon of the final profile, or NaN for NULL.
//
// # Safety
// `solution` must be NULL or a live handle.
double dsm_solution_epsilon(const struct DsmSolution *solution);

// Stopping threshold the epsilon was compared against, or NaN for NULL.
//
// # Safety
// `solution` must be NULL or a live handle.
double dsm_solution_tolerance(const struct DsmSolution *solution);

// 1 when converged, 0 otherwise (including NULL).
//
// # Safety
// `solution` must be NULL or a live handle.
int dsm_solution_converged(const struct DsmSolution *solution);

// # Safety
// `solution` must be NULL or a live handle.
size_t dsm_solution_iterations(const struct DsmSolution *solution);

// Solve a scenario file and write its outputs into `out_dir`. Returns
// `DSM_STATUS_NOT_CONVERGED` when any mode ran out of iterations; the files
// are written either way.
//
// # Safety
// Both arguments must be NUL-terminated strings.
enum DsmStatus dsm_run_scenario_file(const char *path, const char *out_dir);

// Recompute the epsilon stored in a result.json. Writes 1 to `ok` when every
// stored value matches the recomputation, 0 otherwise.
//
// # Safety
// `path` must be a NUL-terminated string and `ok` valid for writes.
enum DsmStatus dsm_verify_result_file(const char *path, int *ok);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSM_H */
