#ifndef BINRANK_H
#define BINRANK_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum BinrankStatus {
  BINRANK_STATUS_OK = 0,
  BINRANK_STATUS_NULL_POINTER = 1,
  BINRANK_STATUS_INVALID_INPUT = 2,
  BINRANK_STATUS_DIMENSION_MISMATCH = 3,
  BINRANK_STATUS_NUMERICAL = 4,
  BINRANK_STATUS_DIVERGENCE = 5,
  BINRANK_STATUS_PARSE = 6,
  BINRANK_STATUS_IO = 7,
  BINRANK_STATUS_PANIC = 8,
} BinrankStatus;

typedef enum BinrankLoss {
  BINRANK_LOSS_HINGE = 0,
  BINRANK_LOSS_LOGISTIC = 1,
} BinrankLoss;

typedef enum BinrankAlgorithm {
  BINRANK_ALGORITHM_MALA = 0,
  BINRANK_ALGORITHM_LMC = 1,
} BinrankAlgorithm;

typedef enum BinrankRisk {
  BINRANK_RISK_ZERO_ONE = 0,
  BINRANK_RISK_HINGE = 1,
  BINRANK_RISK_LOGISTIC = 2,
} BinrankRisk;

typedef enum BinrankLambdaRegime {
  /**
   * `2nq/(3C+2)`.
   */
  BINRANK_LAMBDA_REGIME_FULL = 0,
  /**
   * `2m/(3C+2)`.
   */
  BINRANK_LAMBDA_REGIME_MISSING = 1,
  /**
   * `2√(nq/(p+q+2))`.
   */
  BINRANK_LAMBDA_REGIME_SLOW_RATE = 2,
} BinrankLambdaRegime;

/**
 * Opaque `p × q` coefficient matrix.
 */
typedef struct BinrankCoefficients BinrankCoefficients;

/**
 * Opaque `n × p` design matrix.
 */
typedef struct BinrankDesign BinrankDesign;

/**
 * Opaque `n × q` response matrix with its observation mask.
 */
typedef struct BinrankResponse BinrankResponse;

/**
 * Sampler settings; start from [`binrank_sampler_config_default`].
 */
typedef struct BinrankSamplerConfig {
  double lambda;
  double tau;
  double step_size;
  uint64_t iterations;
  uint64_t burn_in;
  uint64_t thinning;
  uint64_t seed;
  enum BinrankLoss loss;
  enum BinrankAlgorithm algorithm;
  /**
   * Nonzero to adapt the step size during burn-in.
   */
  uint8_t adapt_step;
  double target_acceptance;
} BinrankSamplerConfig;

typedef struct BinrankFitDiagnostics {
  double acceptance_rate;
  double final_step_size;
  uint64_t n_kept;
  uint64_t non_finite_rejections;
} BinrankFitDiagnostics;

typedef struct BinrankBoundInputs {
  uint64_t n;
  uint64_t p;
  uint64_t q;
  uint64_t m;
  uint64_t r_star;
  double norm_x;
  double norm_mb;
  double c;
  double r_bar;
  double epsilon;
  double varsigma;
} BinrankBoundInputs;

typedef struct BinrankBoundReport {
  double theorem1;
  double corollary1;
  double proposition1;
  double theorem2;
} BinrankBoundReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *binrank_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *binrank_version(void);

/**
 * Copies a row-major `n × p` buffer into a new design handle.
 */
enum BinrankStatus binrank_design_new(const double *data,
                                      size_t n,
                                      size_t p,
                                      struct BinrankDesign **out);

void binrank_design_free(struct BinrankDesign *x);

/**
 * Copies a row-major `n × q` buffer of `+1`, `-1` or `0` (unobserved).
 */
enum BinrankStatus binrank_response_new(const int8_t *data,
                                        size_t n,
                                        size_t q,
                                        struct BinrankResponse **out);

void binrank_response_free(struct BinrankResponse *y);

/**
 * Number of observed entries.
 */
enum BinrankStatus binrank_response_observed(const struct BinrankResponse *y, size_t *out);

/**
 * Copies a row-major `p × q` buffer into a new coefficients handle.
 */
enum BinrankStatus binrank_coefficients_new(const double *data,
                                            size_t p,
                                            size_t q,
                                            struct BinrankCoefficients **out);

void binrank_coefficients_free(struct BinrankCoefficients *m);

enum BinrankStatus binrank_coefficients_shape(const struct BinrankCoefficients *m,
                                              size_t *p,
                                              size_t *q);

/**
 * Writes the coefficients row-major into `out`, which holds `len ≥ p·q`
 * doubles.
 */
enum BinrankStatus binrank_coefficients_copy(const struct BinrankCoefficients *m,
                                             double *out,
                                             size_t len);

/**
 * Fills `out` with the library defaults.
 */
enum BinrankStatus binrank_sampler_config_default(struct BinrankSamplerConfig *out);

/**
 * Samples the Gibbs posterior and returns its mean in `*out`.
 * `diagnostics` may be null.
 */
enum BinrankStatus binrank_fit(const struct BinrankDesign *x,
                               const struct BinrankResponse *y,
                               const struct BinrankSamplerConfig *config,
                               struct BinrankCoefficients **out,
                               struct BinrankFitDiagnostics *diagnostics);

/**
 * Writes `sign(XM)` row-major into `out` (`len ≥ n·q`), with sign(0) = +1.
 */
enum BinrankStatus binrank_predict(const struct BinrankCoefficients *m,
                                   const struct BinrankDesign *x,
                                   int8_t *out,
                                   size_t len);

/**
 * Mean empirical risk over the observed entries of `y`.
 */
enum BinrankStatus binrank_risk(const struct BinrankCoefficients *m,
                                const struct BinrankDesign *x,
                                const struct BinrankResponse *y,
                                enum BinrankRisk kind,
                                double *out);

/**
 * Unnormalized log-density of the Gibbs posterior at `m`.
 */
enum BinrankStatus binrank_log_target(const struct BinrankCoefficients *m,
                                      const struct BinrankDesign *x,
                                      const struct BinrankResponse *y,
                                      const struct BinrankSamplerConfig *config,
                                      double *out);

/**
 * Evaluates the four risk bounds. With `optimize_varsigma` nonzero each
 * bound is minimized over varsigma in (0.01, 0.99).
 */
enum BinrankStatus binrank_bounds(const struct BinrankBoundInputs *inputs,
                                  uint8_t optimize_varsigma,
                                  struct BinrankBoundReport *out);

/**
 * Theory-driven temperature. `p` is only read for the slow-rate regime.
 */
enum BinrankStatus binrank_default_lambda(size_t n,
                                          size_t p,
                                          size_t q,
                                          size_t m,
                                          double c,
                                          enum BinrankLambdaRegime regime,
                                          double *out);

/**
 * Theory-driven prior scale; `missing` nonzero selects the partially
 * observed formula.
 */
enum BinrankStatus binrank_default_tau(size_t n,
                                       size_t p,
                                       size_t q,
                                       size_t m,
                                       double norm_x_sq,
                                       uint8_t missing,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BINRANK_H */
