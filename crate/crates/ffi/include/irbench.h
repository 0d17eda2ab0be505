#ifndef IRBENCH_H
#define IRBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define IRB_FLAG_UNPHYSICAL_NEGATIVE 1

#define IRB_FLAG_OUTSIDE_SYSTEMATIC_BOUNDS (1 << 1)

#define IRB_FLAG_SYSTEMATIC_INPUTS_CLIPPED (1 << 2)

#define IRB_FLAG_POOR_FIT (1 << 3)

#define IRB_FLAG_XRB_INCONSISTENT (1 << 4)

/**
 * Result codes.
 */
typedef enum IrbStatus {
  IrbStatus_Ok = 0,
  IrbStatus_NullPointer = 1,
  IrbStatus_InvalidUtf8 = 2,
  /**
   * Configuration or input data rejected.
   */
  IrbStatus_InvalidInput = 3,
  /**
   * Simulation or numerical failure.
   */
  IrbStatus_Runtime = 4,
  IrbStatus_FitFailure = 5,
  IrbStatus_Io = 6,
  IrbStatus_OutOfRange = 7,
  IrbStatus_Panic = 8,
} IrbStatus;

typedef enum IrbGroup {
  IrbGroup_Haar = 0,
  IrbGroup_Clifford = 1,
  IrbGroup_LocalClifford = 2,
  IrbGroup_Pauli = 3,
  /**
   * Infer from the data labels (ingest only).
   */
  IrbGroup_Infer = -1,
} IrbGroup;

/**
 * Experiment configuration handle.
 */
typedef struct IrbExperiment IrbExperiment;

/**
 * Results of one run.
 */
typedef struct IrbRun IrbRun;

/**
 * Flat view of one infidelity estimate. Absent intervals are NaN.
 */
typedef struct IrbEstimate {
  enum IrbGroup group;
  double epsilon;
  double eps_reference;
  double eps_interleaved;
  double stat_low;
  double stat_high;
  double sys_low;
  double sys_high;
  double xrb_low;
  double xrb_high;
  /**
   * Bitwise OR of `IRB_FLAG_*`.
   */
  uint32_t flags;
} IrbEstimate;

/**
 * Analysis options for [`irb_ingest_csv`].
 */
typedef struct IrbIngestOptions {
  enum IrbGroup group;
  /**
   * 0 = ratio, 1 = IRB form.
   */
  uint32_t method;
  /**
   * 0 = fixed asymptote, 1 = free.
   */
  uint32_t asymptote;
  /**
   * Zero disables the bootstrap.
   */
  uint32_t resamples;
  uint64_t seed;
  double level;
  /**
   * NaN when no unitarity is available.
   */
  double unitarity;
} IrbIngestOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *irb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *irb_version(void);

/**
 * Parses a JSON experiment configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrbStatus irb_experiment_from_json(const char *json, struct IrbExperiment **out);

/**
 * Loads an embedded preset by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrbStatus irb_experiment_from_preset(const char *name, struct IrbExperiment **out);

/**
 * # Safety
 * `exp` must come from an `irb_experiment_*` constructor.
 */
enum IrbStatus irb_experiment_set_seed(struct IrbExperiment *exp, uint64_t seed);

/**
 * Switches between sampled shots and exact outcome probabilities.
 *
 * # Safety
 * `exp` must come from an `irb_experiment_*` constructor.
 */
enum IrbStatus irb_experiment_set_exact(struct IrbExperiment *exp, bool exact);

/**
 * Number of bootstrap resamples; zero disables statistical intervals.
 *
 * # Safety
 * `exp` must come from an `irb_experiment_*` constructor.
 */
enum IrbStatus irb_experiment_set_resamples(struct IrbExperiment *exp, uint32_t resamples);

/**
 * # Safety
 * `exp` must come from an `irb_experiment_*` constructor, or be null.
 */
void irb_experiment_free(struct IrbExperiment *exp);

/**
 * Runs every protocol pair of the experiment.
 *
 * # Safety
 * `exp` must be a live experiment handle and `out` a valid pointer.
 */
enum IrbStatus irb_experiment_run(const struct IrbExperiment *exp, struct IrbRun **out);

/**
 * # Safety
 * `run` must be a live run handle.
 */
size_t irb_run_num_estimates(const struct IrbRun *run);

/**
 * # Safety
 * `run` must be a live run handle and `out` a valid pointer.
 */
enum IrbStatus irb_run_estimate(const struct IrbRun *run, size_t index, struct IrbEstimate *out);

/**
 * Process infidelity of the error injected on the interleaved gate; NaN for a null handle.
 *
 * # Safety
 * `run` must be a live run handle.
 */
double irb_run_theoretical_infidelity(const struct IrbRun *run);

/**
 * Report JSON; release with [`irb_string_free`]. Null on failure.
 *
 * # Safety
 * `run` must be a live run handle.
 */
char *irb_run_report_json(const struct IrbRun *run);

/**
 * Writes the report, decay tables and plot data into `dir`.
 *
 * # Safety
 * `run` must be a live run handle and `dir` a NUL-terminated string.
 */
enum IrbStatus irb_run_write(const struct IrbRun *run, const char *dir);

/**
 * # Safety
 * `run` must come from [`irb_experiment_run`], or be null.
 */
void irb_run_free(struct IrbRun *run);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void irb_string_free(char *s);

/**
 * Defaults matching the command-line `ingest`.
 */
struct IrbIngestOptions irb_ingest_options_default(void);

/**
 * Analyses reference and interleaved decay tables given as CSV text
 * (`depth,label,mean,stderr,n`).
 *
 * # Safety
 * CSV arguments must be NUL-terminated strings, `opts` may be null for defaults,
 * and `out` must be a valid pointer.
 */
enum IrbStatus irb_ingest_csv(const char *reference_csv,
                              const char *interleaved_csv,
                              const struct IrbIngestOptions *opts,
                              struct IrbEstimate *out);

/**
 * Interval for the interleaved-gate infidelity from the dressed (`eps_ef`)
 * and reference (`eps_e`) infidelities.
 *
 * # Safety
 * `low` and `high` must be valid pointers.
 */
enum IrbStatus irb_systematic_bounds(double eps_ef, double eps_e, double *low, double *high);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRBENCH_H */
