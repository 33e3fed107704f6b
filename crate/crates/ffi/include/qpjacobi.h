#ifndef QPJACOBI_H
#define QPJACOBI_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum QpjStatus {
  QPJ_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  QPJ_STATUS_NULL_POINTER = 1,
  /**
   * Malformed JSON, interchange text or invalid configuration.
   */
  QPJ_STATUS_INVALID_INPUT = 2,
  /**
   * A numerical step failed (quadrature, eigenvalue search, GLM solve, ...).
   */
  QPJ_STATUS_NUMERICAL = 3,
  /**
   * Index out of range.
   */
  QPJ_STATUS_OUT_OF_RANGE = 4,
  /**
   * The computation completed but an invariant or admissibility check failed.
   */
  QPJ_STATUS_WARN = 5,
  /**
   * Unexpected internal failure.
   */
  QPJ_STATUS_INTERNAL = 6,
} QpjStatus;

/**
 * Scattering data on the circle grid.
 */
typedef struct QpjScatteringData QpjScatteringData;

/**
 * Scenario built from a JSON configuration.
 */
typedef struct QpjScenario QpjScenario;

/**
 * Scattering coefficients at one quadrature node.
 */
typedef struct QpjNode {
  size_t band;
  double side;
  double lambda;
  double weight;
  double w_re;
  double w_im;
  double t_re;
  double t_im;
  double r_plus_re;
  double r_plus_im;
  double r_minus_re;
  double r_minus_im;
} QpjNode;

/**
 * Eigenvalue with its norming constants.
 */
typedef struct QpjBoundState {
  double rho;
  double gamma_plus;
  double gamma_minus;
} QpjBoundState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after a successful call.
 * The pointer stays valid until the next call on the same thread.
 */
const char *qpj_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library that has not been freed.
 */
void qpj_string_free(char *s);

/**
 * Builds a scenario (curve, background, perturbation) from a JSON configuration.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QpjStatus qpj_scenario_new(const char *config_json, struct QpjScenario **out);

/**
 * # Safety
 * `sc` must be null or a handle from [`qpj_scenario_new`] that has not been freed.
 */
void qpj_scenario_free(struct QpjScenario *sc);

/**
 * Computes scattering data. Returns `Warn` if a forward identity exceeds its tolerance;
 * the data and report are produced in that case too. `report_json` may be null.
 *
 * # Safety
 * `sc` must be a live scenario handle, `out` a valid pointer.
 */
enum QpjStatus qpj_forward(const struct QpjScenario *sc,
                           struct QpjScatteringData **out,
                           char **report_json);

/**
 * Forward and inverse problem in one pass; the report is written to `report_json`.
 *
 * # Safety
 * `sc` must be a live scenario handle.
 */
enum QpjStatus qpj_roundtrip(const struct QpjScenario *sc, char **report_json);

/**
 * # Safety
 * `data` must be null or a handle from this library that has not been freed.
 */
void qpj_data_free(struct QpjScatteringData *data);

/**
 * Parses the interchange text format.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QpjStatus qpj_data_from_interchange(const char *text, struct QpjScatteringData **out);

/**
 * Serialises scattering data to the interchange text format.
 *
 * # Safety
 * `data` must be a live handle and `out` a valid pointer.
 */
enum QpjStatus qpj_data_to_interchange(const struct QpjScatteringData *data, char **out);

/**
 * Number of quadrature nodes.
 *
 * # Safety
 * `data` must be a live handle and `count` a valid pointer.
 */
enum QpjStatus qpj_data_node_count(const struct QpjScatteringData *data, size_t *count);

/**
 * Coefficients at node `index`.
 *
 * # Safety
 * `data` must be a live handle and `node` a valid pointer.
 */
enum QpjStatus qpj_data_node(const struct QpjScatteringData *data,
                             size_t index,
                             struct QpjNode *node);

/**
 * Number of eigenvalues below, between and above the bands.
 *
 * # Safety
 * `data` must be a live handle and `count` a valid pointer.
 */
enum QpjStatus qpj_data_bound_state_count(const struct QpjScatteringData *data, size_t *count);

/**
 * Eigenvalue `index` in increasing order, with its norming constants.
 *
 * # Safety
 * `data` must be a live handle and `state` a valid pointer.
 */
enum QpjStatus qpj_data_bound_state(const struct QpjScatteringData *data,
                                    size_t index,
                                    struct QpjBoundState *state);

/**
 * Runs the admissibility checks. Returns `Warn` if a condition fails.
 * `config_json` may be null to use default settings for the curve stored in `data`.
 *
 * # Safety
 * `data` must be a live handle; string arguments NUL-terminated or null.
 */
enum QpjStatus qpj_validate(const struct QpjScatteringData *data,
                            const char *config_json,
                            char **report_json);

/**
 * Validates and reconstructs the coefficients on the configured index range.
 * `a` and `b`, if not null, must hold `n_hi - n_lo + 1` values and receive the
 * reconstructed coefficients; they are left untouched when validation fails.
 *
 * # Safety
 * `data` must be a live handle; `a` and `b` null or large enough.
 */
enum QpjStatus qpj_inverse(const struct QpjScatteringData *data,
                           const char *config_json,
                           double *a,
                           double *b,
                           size_t len,
                           char **report_json);

/**
 * Surface diagnostics as JSON.
 *
 * # Safety
 * `config_json` must be NUL-terminated and `report_json` a valid pointer.
 */
enum QpjStatus qpj_surface_report(const char *config_json, uint64_t seed, char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPJACOBI_H */
