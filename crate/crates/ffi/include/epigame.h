#ifndef EPIGAME_H
#define EPIGAME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum EpgStatus {
  EPG_STATUS_OK = 0,
  EPG_STATUS_NULL_POINTER = 1,
  EPG_STATUS_INVALID_ARGUMENT = 2,
  EPG_STATUS_NO_INTERFERERS = 3,
  EPG_STATUS_NO_CONVERGENCE = 4,
  EPG_STATUS_BUFFER_TOO_SMALL = 5,
  EPG_STATUS_PANIC = 6,
} EpgStatus;

/**
 * Opaque discrete power grid.
 */
typedef struct EpgGrid EpgGrid;

/**
 * Opaque network of nodes with gains and SINR thresholds.
 */
typedef struct EpgNetwork EpgNetwork;

/**
 * Opaque Monte Carlo scenario.
 */
typedef struct EpgScenario EpgScenario;

/**
 * Method-of-moments Gamma fit of an interference sum.
 */
typedef struct EpgGammaFit {
  double alpha_hat;
  double theta_hat;
  double mean;
  double variance;
  /**
   * Raw moments of orders 1 to 4.
   */
  double raw_moments[4];
} EpgGammaFit;

/**
 * Run statistics of an epistemic solve.
 */
typedef struct EpgEpistemicSummary {
  bool converged;
  size_t passes;
  uint64_t eu_evaluations;
} EpgEpistemicSummary;

/**
 * Aggregated Monte Carlo metrics.
 */
typedef struct EpgMetrics {
  double coverage;
  double outage;
  /**
   * Mean transmit power as a fraction of `p_max`.
   */
  double avg_power;
  /**
   * 95% half-width of the coverage estimate.
   */
  double ci_halfwidth;
  /**
   * 95% half-width of the power estimate.
   */
  double power_ci_halfwidth;
  size_t trials_run;
  size_t nonconverged;
  /**
   * Set when non-converged trials exceed the warning budget.
   */
  bool warning;
} EpgMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated, into
 * `buf`. Returns the message length without the terminator; when that is
 * `>= len` the copy was truncated.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t epg_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *epg_version(void);

/**
 * Fits the Gamma law of `sum_j p_j X_j`, `X_j ~ exp(lambda)`.
 *
 * # Safety
 * `powers` must point to `count` doubles; `out` must be writable.
 */
enum EpgStatus epg_fit_gamma(const double *powers,
                             size_t count,
                             double lambda,
                             struct EpgGammaFit *out);

/**
 * Creates a network with node ids `0..count`.
 *
 * # Safety
 * `gains` and `thresholds` must each point to `count` doubles; `out` must
 * be writable.
 */
enum EpgStatus epg_network_new(const double *gains,
                               const double *thresholds,
                               size_t count,
                               double noise_power,
                               struct EpgNetwork **out);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `network` must be null or a live handle.
 */
size_t epg_network_len(const struct EpgNetwork *network);

/**
 * # Safety
 * `network` must be null or a handle from [`epg_network_new`] not yet freed.
 */
void epg_network_free(struct EpgNetwork *network);

/**
 * Evenly spaced grid of `levels` powers on `[0, p_max]`.
 *
 * # Safety
 * `out` must be writable.
 */
enum EpgStatus epg_grid_new_linear(size_t levels, double p_max, struct EpgGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from [`epg_grid_new_linear`] not yet freed.
 */
void epg_grid_free(struct EpgGrid *grid);

/**
 * Full-CSI equilibrium by best-response iteration from the lowest level.
 * Powers are written in node id order.
 *
 * # Safety
 * Handles must be live; `powers_out` must point to `len` writable doubles.
 */
enum EpgStatus epg_solve_nash(const struct EpgNetwork *network,
                              const struct EpgGrid *grid,
                              size_t max_rounds,
                              double *powers_out,
                              size_t len);

/**
 * Belief-based solve with moment-order policy `M_k`. Powers are written in
 * node id order; a run that stops without converging still writes its last
 * profile and returns `NoConvergence`.
 *
 * # Safety
 * Handles must be live; `powers_out` must point to `len` writable doubles;
 * `summary` must be null or writable.
 */
enum EpgStatus epg_solve_epistemic(const struct EpgNetwork *network,
                                   const struct EpgGrid *grid,
                                   uint32_t moment_order,
                                   size_t max_stages,
                                   double *powers_out,
                                   size_t len,
                                   struct EpgEpistemicSummary *summary);

/**
 * Scenario with the default experiment settings: 100 nodes, unit-scale
 * Rayleigh prior, noise -120 dB, threshold -20 dB, every node
 * interfering, policy M1, 10 000 trials, seed 0.
 *
 * # Safety
 * `out` must be writable.
 */
enum EpgStatus epg_scenario_new(struct EpgScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from [`epg_scenario_new`] not yet freed.
 */
void epg_scenario_free(struct EpgScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum EpgStatus epg_scenario_set_nodes(struct EpgScenario *scenario, size_t n_nodes);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum EpgStatus epg_scenario_set_trials(struct EpgScenario *scenario, size_t trials);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum EpgStatus epg_scenario_set_seed(struct EpgScenario *scenario, uint64_t seed);

/**
 * Worker threads; 0 lets the pool choose.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum EpgStatus epg_scenario_set_workers(struct EpgScenario *scenario, size_t workers);

/**
 * Uniform SINR threshold in dB.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum EpgStatus epg_scenario_set_threshold_db(struct EpgScenario *scenario, double threshold_db);

/**
 * Share of the population interfering, in percent.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum EpgStatus epg_scenario_set_interference_pct(struct EpgScenario *scenario, double pct);

/**
 * Fixes node 0's gain magnitude; a negative value restores random gains.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum EpgStatus epg_scenario_set_desired_gain(struct EpgScenario *scenario, double gain);

/**
 * Policy by label: `M1`..`M4`, `EPA`, `SNCPC` or `NASH`.
 *
 * # Safety
 * `scenario` must be a live handle; `label` a NUL-terminated string.
 */
enum EpgStatus epg_scenario_set_policy(struct EpgScenario *scenario, const char *label);

/**
 * Runs every trial of the scenario.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum EpgStatus epg_scenario_run(const struct EpgScenario *scenario, struct EpgMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPIGAME_H */
