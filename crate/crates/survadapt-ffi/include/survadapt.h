#ifndef SURVADAPT_H
#define SURVADAPT_H

/* Generated by cbindgen from survadapt-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define SA_OK 0

/**
 * A required pointer argument was null.
 */
#define SA_ERR_NULL 1

/**
 * Malformed or invariant-violating input (parse and validation failures).
 */
#define SA_ERR_INVALID 2

/**
 * A solver or special-function failure.
 */
#define SA_ERR_NUMERICAL 3

/**
 * An event-count clock ran past the available events.
 */
#define SA_ERR_INSUFFICIENT_EVENTS 4

/**
 * An internal invariant tripped; the message names it.
 */
#define SA_ERR_INTERNAL 5

/**
 * Opaque survival dataset (rows of entry, survival, arm, stage).
 */
typedef struct SaDataset SaDataset;

/**
 * Opaque parsed scenario: configuration plus the optional adaptive rule.
 */
typedef struct SaScenario SaScenario;

/**
 * Monte Carlo operating characteristics of one scenario/rule combination.
 */
typedef struct SaSummary {
  uint64_t replications;
  /**
   * rejection rate of the weighted inverse-normal combination test
   */
  double combination_rate;
  double combination_se;
  /**
   * rejection rate of the uncorrected statistic at the chosen analysis
   */
  double naive_rate;
  double naive_se;
  /**
   * rejection rate of the naive statistic against the corrected cutoff
   */
  double corrected_rate;
  double corrected_se;
  double mean_d1_scheduled;
  double mean_d1_final;
  double mean_d1_tmax;
  double mean_d12_final;
  double mean_effective_info_deficit;
} SaSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *sa_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *sa_version(void);

/**
 * Worst-case type I error of the naive level-`alpha` test when the first
 * stage may be analyzed anywhere in the information window [`u1`, 1].
 * Pass `knot_count` = 0 for the default boundary grid.
 */
int32_t sa_worst_case_alpha(double w1, double u1, double alpha, size_t knot_count, double *out);

/**
 * Corrected critical value k* that restores level `alpha` against every
 * first-stage stopping rule in [`u1`, 1]. Pass `knot_count` = 0 for the
 * default boundary grid.
 */
int32_t sa_corrected_kstar(double w1, double u1, double alpha, size_t knot_count, double *out);

/**
 * Conditional rejection probability of the planned level-`alpha` pooled
 * test given `d1_t12` first-stage events with p-value `p1` out of the
 * planned `d12`.
 */
int32_t sa_conditional_error(double p1, uint64_t d1_t12, uint64_t d12, double alpha, double *out);

/**
 * Event target for a one-sided level-`alpha` logrank test with power
 * 1 - `beta` at log hazard ratio `theta_r`: the pre-rounding value goes to
 * `out_raw`, the even-rounded target to `out_count`.
 */
int32_t sa_required_events(double alpha,
                           double beta,
                           double theta_r,
                           uint64_t *out_count,
                           double *out_raw);

/**
 * Weighted inverse-normal combination of two stage p-values with weights
 * (`w1`, sqrt(1 - w1^2)).
 */
int32_t sa_combine(double w1, double p1, double p2, double *out_z);

/**
 * Parses a scenario description (the same text format the CLI reads) into
 * an opaque handle. On success the handle is owned by the caller and must
 * be released with `sa_scenario_free`.
 */
int32_t sa_scenario_parse(const char *text, struct SaScenario **out);

/**
 * Releases a scenario handle. Null is a no-op.
 */
void sa_scenario_free(struct SaScenario *scenario);

/**
 * Calendar end of the trial: accrual months plus follow-up months.
 */
int32_t sa_scenario_t_max(const struct SaScenario *scenario, double *out);

/**
 * Expected pooled event count of the scenario at calendar time `t`.
 */
int32_t sa_expected_events(const struct SaScenario *scenario, double t, double *out);

/**
 * Runs `reps` seeded replications of the scenario under its `[rule]`
 * section and writes the operating characteristics to `out`.
 */
int32_t sa_simulate_summary(const struct SaScenario *scenario,
                            uint64_t reps,
                            uint64_t seed,
                            struct SaSummary *out);

/**
 * Parses a dataset CSV (header `entry,surv,arm,stage`, arm C|E, stage 1|2)
 * into an opaque handle owned by the caller; release with `sa_dataset_free`.
 */
int32_t sa_dataset_parse_csv(const char *text, struct SaDataset **out);

/**
 * Releases a dataset handle. Null is a no-op.
 */
void sa_dataset_free(struct SaDataset *dataset);

/**
 * Number of subject rows in the dataset.
 */
int32_t sa_dataset_len(const struct SaDataset *dataset, uint64_t *out);

/**
 * Pooled logrank snapshot at calendar time `t`: event count to
 * `out_events`, score to `out_score`.
 */
int32_t sa_dataset_logrank(const struct SaDataset *dataset,
                           double t,
                           uint64_t *out_events,
                           double *out_score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURVADAPT_H */
