#ifndef DIGIT_FORENSICS_H
#define DIGIT_FORENSICS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call.
typedef enum DfStatus {
  DF_STATUS_OK = 0,
  DF_STATUS_NULL_POINTER = 1,
  DF_STATUS_INVALID_ARGUMENT = 2,
  DF_STATUS_PARSE = 3,
  DF_STATUS_IO = 4,
  DF_STATUS_UNKNOWN_LABEL = 5,
  DF_STATUS_UNDEFINED = 6,
  DF_STATUS_INTERNAL = 7,
} DfStatus;

// Multiple-comparison correction.
typedef enum DfCorrection {
  // `min(m·p, 1)`
  DF_CORRECTION_MULTIPLY = 0,
  // `1 − (1 − p)^m`
  DF_CORRECTION_SIDAK = 1,
} DfCorrection;

// Opaque per-area vote table.
typedef struct DfVoteTable DfVoteTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success. Never null.
const char *df_last_error_message(void);

// Library version as a static string.
const char *df_version(void);

// Parses a table from in-memory sources. `labels` is a comma-separated list or null.
// On success `*out` owns a table to release with [`df_vote_table_free`].
//
// # Safety
// String arguments must be valid NUL-terminated strings; `out` must be writable.
enum DfStatus df_vote_table_parse(const char *totals_text,
                                  const char *cands_text,
                                  const char *labels,
                                  struct DfVoteTable **out);

// Reads a table from two files; see [`df_vote_table_parse`].
//
// # Safety
// As for [`df_vote_table_parse`].
enum DfStatus df_vote_table_load(const char *totals_path,
                                 const char *cands_path,
                                 const char *labels,
                                 struct DfVoteTable **out);

// Releases a table. Null is a no-op.
//
// # Safety
// `table` must come from this library and not be used afterwards.
void df_vote_table_free(struct DfVoteTable *table);

// # Safety
// `table` must be a live handle and `out` writable.
enum DfStatus df_vote_table_n_areas(const struct DfVoteTable *table, size_t *out);

// # Safety
// `table` must be a live handle, `label` a valid string and `out` writable.
enum DfStatus df_vote_table_national_sum(const struct DfVoteTable *table,
                                         const char *label,
                                         uint64_t *out);

// # Safety
// As for [`df_vote_table_national_sum`].
enum DfStatus df_vote_table_global_fraction(const struct DfVoteTable *table,
                                            const char *label,
                                            double *out);

// First-digit counts of a candidate's nonzero counts; `out[d]` is the count for digit `d`, `out[0]` is 0.
//
// # Safety
// `out` must point to 10 writable values.
enum DfStatus df_vote_table_first_digit_counts(const struct DfVoteTable *table,
                                               const char *label,
                                               uint64_t *out);

// Standard first-digit probabilities; `out[0]` is 0.
//
// # Safety
// `out` must point to 10 writable values.
enum DfStatus df_standard_first_digit_pmf(double *out);

// Second-digit probabilities for digits 0 to 9.
//
// # Safety
// `out` must point to 10 writable values.
enum DfStatus df_second_digit_pmf(double *out);

// First-digit probabilities of the totals scaled by the candidate's national share.
//
// # Safety
// `table` must be a live handle and `out` point to 10 writable values.
enum DfStatus df_empirical_first_digit_pmf(const struct DfVoteTable *table,
                                           const char *label,
                                           double *out);

// `P(X > k)` for `X ~ Poisson(lambda)`.
//
// # Safety
// `out` must be writable.
enum DfStatus df_poisson_tail(uint64_t k, double lambda, double *out);

// Upper tail of the chi-square distribution.
//
// # Safety
// `out` must be writable.
enum DfStatus df_chi_square_upper_tail(double statistic, uint32_t dof, double *out);

// Exact two-sample KS test; writes `D` and the two-sided p-value.
//
// # Safety
// `a` and `b` must hold `na` and `nb` values; `statistic` and `p_value` must be writable.
enum DfStatus df_ks_two_sample_exact(const double *a,
                                     size_t na,
                                     const double *b,
                                     size_t nb,
                                     double *statistic,
                                     double *p_value);

// Spearman's ρ with average ranks; `normalized` is ρ over its null standard error.
//
// # Safety
// `x` and `y` must hold `n` values; the out-pointers must be writable.
enum DfStatus df_spearman(const double *x,
                          const double *y,
                          size_t n,
                          double *rho,
                          double *normalized);

// Skewness of `log10` of positive values; `normalized` is γ₁ over `sqrt(6 / n)`.
//
// # Safety
// `values` must hold `n` values; the out-pointers must be writable.
enum DfStatus df_log_skewness(const double *values, size_t n, double *gamma1, double *normalized);

// Corrects `p` for `m` tests.
//
// # Safety
// `out` must be writable.
enum DfStatus df_multi_test_correction(double p, uint32_t m, enum DfCorrection method, double *out);

// Chance that `k` independent second digits are all equal.
//
// # Safety
// `out` must be writable.
enum DfStatus df_identical_second_digit_prob(uint32_t k, double *out);

// Monte Carlo estimate that 20 log-uniform draws on [70, 80) hold each even value exactly once.
//
// # Safety
// `hits` and `p_hat` must be writable.
enum DfStatus df_parity_oracle(uint64_t trials, uint64_t seed, uint64_t *hits, double *p_hat);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIGIT_FORENSICS_H */
