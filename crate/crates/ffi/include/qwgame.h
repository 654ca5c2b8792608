/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef QWGAME_H
#define QWGAME_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum QwgStatus {
  QWG_STATUS_OK = 0,
  // A required pointer was null.
  QWG_STATUS_NULL_POINTER = 1,
  // A parameter violated a documented invariant.
  QWG_STATUS_INVALID_ARGUMENT = 2,
  // A strategy angle lies outside `[0, π]`.
  QWG_STATUS_DOMAIN = 3,
  // A caller buffer has the wrong length.
  QWG_STATUS_BUFFER_SIZE = 4,
  // File system or serialization failure.
  QWG_STATUS_IO = 5,
  // A recipe run failed after starting.
  QWG_STATUS_RUNTIME = 6,
  // The library panicked; this is a bug.
  QWG_STATUS_PANIC = 7,
} QwgStatus;

typedef enum QwgBoundary {
  QWG_BOUNDARY_PERIODIC = 0,
  QWG_BOUNDARY_REFLECTING = 1,
} QwgBoundary;

typedef enum QwgInteraction {
  QWG_INTERACTION_NONE = 0,
  QWG_INTERACTION_COLLISION_PHASE = 1,
  QWG_INTERACTION_ATTRACTIVE_COLLISION = 2,
  QWG_INTERACTION_LONG_RANGE = 3,
  QWG_INTERACTION_COIN_DEPENDENT = 4,
  QWG_INTERACTION_NOISY_COLLISION = 5,
} QwgInteraction;

typedef enum QwgGame {
  QWG_GAME_RACE = 0,
  QWG_GAME_RENDEZVOUS = 1,
  QWG_GAME_TUG_OF_WAR = 2,
} QwgGame;

// Opaque experiment handle: walk, game, seed and noise ensemble.
typedef struct QwgConfig QwgConfig;

// Expected utilities and diagnostics at one profile.
typedef struct QwgPayoff {
  double u_a;
  double u_b;
  double mean_x_a;
  double mean_x_b;
  double mean_separation;
  double meeting_probability;
  double center_of_mass;
} QwgPayoff;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failed call on this thread, or an empty
// string. Valid until the next library call on the same thread.
const char *qwg_last_error(void);

// Library version as a static NUL-terminated string.
const char *qwg_version(void);

// Creates a configuration with walkers starting in `|R⟩`, no interaction,
// the race game, seed 0 and an ensemble of 32. `boundary` takes a
// [`QwgBoundary`] value.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum QwgStatus qwg_config_new(uint32_t size,
                              uint32_t boundary,
                              uint32_t steps,
                              struct QwgConfig **out);

// Releases a handle from [`qwg_config_new`]. Null is ignored.
//
// # Safety
// `config` must be null or a handle not yet freed.
void qwg_config_free(struct QwgConfig *config);

// Sets both initial coins as `{re_R, im_R, re_L, im_L}`; each must be
// normalized.
//
// # Safety
// `config` must be a live handle; `coin_a` and `coin_b` must each point to
// four doubles.
enum QwgStatus qwg_config_set_coins(struct QwgConfig *config,
                                    const double *coin_a,
                                    const double *coin_b);

// Sets the interaction. `kind` takes a [`QwgInteraction`] value;
// `range_exponent` is read only by long-range and `noise_sigma` only by the
// noisy collision.
//
// # Safety
// `config` must be a live handle.
enum QwgStatus qwg_config_set_interaction(struct QwgConfig *config,
                                          uint32_t kind,
                                          double strength,
                                          double range_exponent,
                                          double noise_sigma);

// Selects the payoff game; `game` takes a [`QwgGame`] value.
//
// # Safety
// `config` must be a live handle.
enum QwgStatus qwg_config_set_game(struct QwgConfig *config, uint32_t game);

// Seed for noisy interactions and the number of seeds averaged per
// evaluation (at least 1).
//
// # Safety
// `config` must be a live handle.
enum QwgStatus qwg_config_set_seed(struct QwgConfig *config, uint64_t seed, uint32_t ensemble);

// Writes the measured joint distribution `P(x_A, x_B)` at `(theta_a,
// theta_b)` into `out`, row-major in `x_A` from `-(L-1)/2`. `len` must be
// `L * L`.
//
// # Safety
// `config` must be a live handle and `out` must point to `len` writable doubles.
enum QwgStatus qwg_evolve_distribution(const struct QwgConfig *config,
                                       double theta_a,
                                       double theta_b,
                                       double *out,
                                       size_t len);

// Payoffs and diagnostics at `(theta_a, theta_b)`.
//
// # Safety
// `config` must be a live handle and `out` writable.
enum QwgStatus qwg_payoff(const struct QwgConfig *config,
                          double theta_a,
                          double theta_b,
                          struct QwgPayoff *out);

// Payoff surfaces on the `n × n` grid `θ_k = kπ/(n−1)`; entry `j * n + k`
// is the value at `(θ_j, θ_k)`. Both buffers hold `len = n * n` doubles.
//
// # Safety
// `config` must be a live handle; `u_a` and `u_b` must each point to `len`
// writable doubles.
enum QwgStatus qwg_sweep_surface(const struct QwgConfig *config,
                                 uint32_t n,
                                 double *u_a,
                                 double *u_b,
                                 size_t len);

// Single-walker drift `⟨x⟩` after `steps` steps from `coin`
// (`{re_R, im_R, re_L, im_L}`).
//
// # Safety
// `coin` must point to four doubles and `out` must be writable.
enum QwgStatus qwg_drift(uint32_t size,
                         uint32_t boundary,
                         uint32_t steps,
                         double theta,
                         const double *coin,
                         double *out);

// Runs a named recipe like the command-line driver. `config_path` and
// `recipe` may be null (but not both). `exit_code` receives the driver's
// exit code (0, 1, 2 or 3) and may be null.
//
// # Safety
// String arguments must be null or NUL-terminated; `exit_code` must be null
// or writable.
enum QwgStatus qwg_run_recipe(const char *config_path,
                              const char *recipe,
                              const char *out_dir,
                              int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QWGAME_H */
