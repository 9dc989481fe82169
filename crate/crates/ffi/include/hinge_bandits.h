#ifndef HINGE_BANDITS_H
#define HINGE_BANDITS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; `HB_STATUS_OK` is zero.
 */
typedef enum HbStatus {
  HB_STATUS_OK = 0,
  HB_STATUS_NULL_POINTER = 1,
  HB_STATUS_DIMENSION_MISMATCH = 2,
  HB_STATUS_DOMAIN = 3,
  HB_STATUS_CONFIG = 4,
  HB_STATUS_BUDGET = 5,
  HB_STATUS_IO = 6,
  HB_STATUS_PARSE = 7,
  HB_STATUS_INVALID_UTF8 = 8,
  HB_STATUS_PANIC = 9,
} HbStatus;

/**
 * Which surrogate induces the policy in `hb_induced_policy`.
 */
typedef enum HbSurrogate {
  HB_SURROGATE_HINGE = 0,
  HB_SURROGATE_RAMP = 1,
} HbSurrogate;

/**
 * Opaque learner handle.
 */
typedef struct HbLearner HbLearner;

/**
 * Shape of the linear model: `actions` blocks of `context_dim` weights
 * constrained to the ball of `radius`, contexts bounded by `context_bound`.
 */
typedef struct HbModelSpec {
  size_t context_dim;
  size_t actions;
  double radius;
  double context_bound;
} HbModelSpec;

/**
 * Inputs of the worst-case parameter formulas. `eta <= 0` means "derive
 * from the horizon".
 */
typedef struct HbTheoryInputs {
  double horizon;
  size_t dim;
  size_t actions;
  double radius;
  double lipschitz;
  double score_bound;
  double gamma;
  double loss_bound;
  double eta;
} HbTheoryInputs;

typedef struct HbTheoryParams {
  double eta;
  double mu;
  double resample_cap;
  double smoothing_width;
  double ridge;
  double step_size;
  double steps;
  double smoothing_samples;
  double log_factor;
} HbTheoryParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`) and returns the full message length
 * excluding the terminator. Returns 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t hb_last_error_message(char *buf, size_t len);

/**
 * Forgets the calling thread's last error.
 */
void hb_clear_error(void);

/**
 * Creates a learner that plays uniformly at random.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum HbStatus hb_learner_new_uniform(size_t context_dim,
                                     size_t actions,
                                     uint64_t seed,
                                     struct HbLearner **out);

/**
 * Creates a Hinge-LMC learner with the practical defaults for `horizon`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum HbStatus hb_learner_new_hinge_lmc(struct HbModelSpec spec,
                                       size_t horizon,
                                       double gamma,
                                       uint64_t seed,
                                       struct HbLearner **out);

/**
 * Creates a SmoothFTL learner with the practical defaults for `horizon`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum HbStatus hb_learner_new_smooth_ftl(struct HbModelSpec spec,
                                        size_t horizon,
                                        double gamma,
                                        uint64_t seed,
                                        struct HbLearner **out);

/**
 * Number of actions of `learner`, or 0 for a null handle.
 *
 * # Safety
 * `learner` must be null or a live handle.
 */
size_t hb_learner_actions(const struct HbLearner *learner);

/**
 * Chooses an action for the context `x` (length `context_dim`). Writes the
 * action to `action` and, when `probs` is non-null, the sampling
 * distribution to `probs` (length `probs_len`, which must equal the number
 * of actions).
 *
 * # Safety
 * `learner` must be a live handle and the buffers valid for their lengths.
 */
enum HbStatus hb_learner_act(struct HbLearner *learner,
                             const double *x,
                             size_t x_len,
                             size_t *action,
                             double *probs,
                             size_t probs_len);

/**
 * Reports the loss in `[0, 1]` of the action chosen by the last
 * `hb_learner_act`. When `estimate` is non-null it receives the played
 * coordinate of the loss estimate used in the update.
 *
 * # Safety
 * `learner` must be a live handle; `estimate` null or writable.
 */
enum HbStatus hb_learner_observe(struct HbLearner *learner, double loss, double *estimate);

/**
 * Releases a learner. Null is ignored.
 *
 * # Safety
 * `learner` must be null or a handle not yet freed.
 */
void hb_learner_free(struct HbLearner *learner);

/**
 * Ramp surrogate at score `s`; NaN if `gamma` is not positive.
 */
double hb_ramp(double s, double gamma);

/**
 * Hinge surrogate at score `s`; NaN if `gamma` is not positive.
 */
double hb_hinge(double s, double gamma);

/**
 * Policy induced by the scores (`k` entries, re-centered to sum to zero),
 * written to `out` (`k` entries).
 *
 * # Safety
 * `scores` and `out` must be valid for `k` doubles.
 */
enum HbStatus hb_induced_policy(enum HbSurrogate kind,
                                const double *scores,
                                size_t k,
                                double gamma,
                                double *out);

/**
 * Cost-sensitive surrogate loss `Σ_a ℓ_a φ(s_a)` of centered scores
 * against a loss vector in `[0, 1]^k`.
 *
 * # Safety
 * `scores` and `loss` must be valid for `k` doubles, `out` writable.
 */
enum HbStatus hb_cc_loss(enum HbSurrogate kind,
                         const double *scores,
                         const double *loss,
                         size_t k,
                         double gamma,
                         double *out);

/**
 * Evaluates the worst-case sampler and learner parameters.
 *
 * # Safety
 * `out` must be writable.
 */
enum HbStatus hb_theoretical_params(struct HbTheoryInputs inputs, struct HbTheoryParams *out);

/**
 * Runs the experiment described by the TOML text `config` and writes its
 * CSV, JSON and SVG outputs. `out_dir`, when non-null, overrides the
 * configured output directory. When `summary_json` is non-null it receives
 * the run summary as a string to be released with `hb_string_free`.
 *
 * # Safety
 * `config` and `out_dir` must be null or NUL-terminated; `summary_json`
 * null or writable.
 */
enum HbStatus hb_run_experiment(const char *config, const char *out_dir, char **summary_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void hb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HINGE_BANDITS_H */
