#ifndef PLANKTON_LK_H
#define PLANKTON_LK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of admissibility conditions reported by [`plk_theorem_check`].
#define PLK_CONDITION_COUNT 5

typedef enum PlkEquilibriumLabel {
  PLK_EQUILIBRIUM_LABEL_EXTINCTION = 0,
  PLK_EQUILIBRIUM_LABEL_PHYTO_ONLY = 1,
  PLK_EQUILIBRIUM_LABEL_PLANKTON_ONLY = 2,
  PLK_EQUILIBRIUM_LABEL_COEXISTENCE = 3,
} PlkEquilibriumLabel;

// Result code of every call.
typedef enum PlkStatus {
  PLK_STATUS_OK = 0,
  PLK_STATUS_NULL_POINTER = 1,
  PLK_STATUS_INVALID_PARAM = 2,
  PLK_STATUS_DOMAIN = 3,
  PLK_STATUS_INAPPLICABLE = 4,
  PLK_STATUS_UNSUPPORTED = 5,
  PLK_STATUS_CONSTRUCTION = 6,
  PLK_STATUS_NUMERICAL = 7,
  PLK_STATUS_INTEGRATION = 8,
  PLK_STATUS_DIMENSION = 9,
  PLK_STATUS_CONFIG = 10,
  PLK_STATUS_IO = 11,
  PLK_STATUS_INVALID_STRING = 12,
  PLK_STATUS_OUT_OF_RANGE = 13,
  PLK_STATUS_PANIC = 255,
} PlkStatus;

typedef enum PlkVerdict {
  PLK_VERDICT_ASYMPTOTICALLY_STABLE = 0,
  PLK_VERDICT_UNSTABLE = 1,
  PLK_VERDICT_DELAY_DEPENDENT = 2,
} PlkVerdict;

typedef struct PlkCertificate PlkCertificate;

typedef struct PlkHistory PlkHistory;

typedef struct PlkModel PlkModel;

typedef struct PlkTrajectory PlkTrajectory;

// Raw model inputs.
typedef struct PlkParams {
  double r;
  double k;
  double c1;
  double c2;
  double d1;
  double d2;
  double b1;
  double b2;
  double tau1;
  double tau2;
} PlkParams;

typedef struct PlkEquilibrium {
  enum PlkEquilibriumLabel label;
  double state[3];
} PlkEquilibrium;

// Free parameters of the certificate construction.
typedef struct PlkCertificateOptions {
  double alpha;
  double mu_fraction;
  double m_fraction;
  double h33_factor;
} PlkCertificateOptions;

// Scalar constants of a certificate.
typedef struct PlkCertificateScalars {
  double x0;
  double y0;
  double alpha;
  double beta;
  double m1;
  double m2;
  double mu1;
  double mu2;
  double h11;
  double h12;
  double h22;
  double h33;
  double h33_lower_bound;
  double sigma;
  double epsilon;
  double q;
} PlkCertificateScalars;

typedef struct PlkTheoremSummary {
  double v0;
  // All conditions hold, so the envelopes apply.
  bool admissible;
  double lhs[PLK_CONDITION_COUNT];
  double rhs[PLK_CONDITION_COUNT];
  double margin[PLK_CONDITION_COUNT];
  bool passed[PLK_CONDITION_COUNT];
} PlkTheoremSummary;

typedef struct PlkEnvelopeSummary {
  size_t samples;
  double tolerance;
  double solver_error;
  double worst_margin[3];
  size_t violations;
  size_t strict_violations;
  double worst_gronwall_margin;
  size_t gronwall_violations;
  size_t diff_ineq_checked;
  size_t diff_ineq_violations;
  double diff_ineq_worst_slack;
  bool passed;
} PlkEnvelopeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *plk_last_error(void);

// Library version as a static NUL-terminated string.
const char *plk_version(void);

// Release a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void plk_string_free(char *s);

// Validate parameters and create a model.
//
// # Safety
// `params` must point to a `PlkParams`; `out` to writable storage.
enum PlkStatus plk_model_new(const struct PlkParams *params, struct PlkModel **out);

// # Safety
// `model` must be NULL or a handle from [`plk_model_new`] not yet freed.
void plk_model_free(struct PlkModel *model);

// Non-negative equilibria. Writes at most `capacity` entries to `points`
// (4 always suffice), the total into `count` and the case (1, 2 or 3)
// into `case_id`. `points` may be NULL when `capacity` is 0.
//
// # Safety
// Pointers must be valid for the stated sizes.
enum PlkStatus plk_model_equilibria(const struct PlkModel *model,
                                    struct PlkEquilibrium *points,
                                    size_t capacity,
                                    size_t *count,
                                    uint8_t *case_id);

// Delay-independent stability verdict for the plankton-only point.
//
// # Safety
// `model` must be a live handle; `verdict` writable.
enum PlkStatus plk_model_verdict(const struct PlkModel *model, enum PlkVerdict *verdict);

// Default certificate options.
struct PlkCertificateOptions plk_certificate_options_default(void);

// Build the stability certificate. `options` may be NULL for defaults.
//
// # Safety
// `model` must be a live handle; `options` NULL or valid; `out` writable.
enum PlkStatus plk_certificate_build(const struct PlkModel *model,
                                     const struct PlkCertificateOptions *options,
                                     struct PlkCertificate **out);

// # Safety
// `cert` must be NULL or a live certificate handle.
void plk_certificate_free(struct PlkCertificate *cert);

// # Safety
// `cert` must be a live handle; `out` writable.
enum PlkStatus plk_certificate_scalars(const struct PlkCertificate *cert,
                                       struct PlkCertificateScalars *out);

// Copy one 3x3 matrix, row-major, into `out[9]`. `which` is a
// `PlkMatrix` value.
//
// # Safety
// `cert` must be a live handle; `out` must hold 9 doubles.
enum PlkStatus plk_certificate_matrix(const struct PlkCertificate *cert,
                                      uint32_t which,
                                      double *out);

// Copy the assembled 9x9 matrix `C`, row-major, into `out[81]`, and its
// smallest eigenvalue on the structural support into `min_eigenvalue`
// (may be NULL).
//
// # Safety
// `cert` must be a live handle; `out` must hold 81 doubles.
enum PlkStatus plk_certificate_c_matrix(const struct PlkCertificate *cert,
                                        double *out,
                                        double *min_eigenvalue);

// Human-readable certificate report; release with [`plk_string_free`].
//
// # Safety
// `cert` must be a live handle; `out` writable.
enum PlkStatus plk_certificate_report(const struct PlkCertificate *cert, char **out);

// Check user-supplied matrices against the sufficient conditions of the
// two-delay linear test. `a`, `b1`, `b2`, `h` are `n x n` row-major;
// `k1` holds `n1` samples of `K1` on a uniform grid over `[0, tau1]`
// (each `n x n`), likewise `k2`. `failure` may be NULL; when not, it
// receives NULL on success or a message to release with
// [`plk_string_free`].
//
// # Safety
// Arrays must hold the stated number of doubles.
enum PlkStatus plk_check_generic_certificate(size_t n,
                                             const double *a,
                                             const double *b1,
                                             const double *b2,
                                             const double *h,
                                             const double *k1,
                                             size_t n1,
                                             const double *k2,
                                             size_t n2,
                                             bool *passed,
                                             double *c_min_eigenvalue,
                                             char **failure);

// Constant initial history.
//
// # Safety
// `model` must be live; `value` must hold 3 doubles; `out` writable.
enum PlkStatus plk_history_constant(const struct PlkModel *model,
                                    const double *value,
                                    struct PlkHistory **out);

// `base + offset` on the whole delay window.
//
// # Safety
// `base` and `offset` must hold 3 doubles each.
enum PlkStatus plk_history_offset(const struct PlkModel *model,
                                  const double *base,
                                  const double *offset,
                                  struct PlkHistory **out);

// `base + amplitude * sin(frequency * theta + phase)`, componentwise.
//
// # Safety
// `base` and `amplitude` must hold 3 doubles each.
enum PlkStatus plk_history_sine(const struct PlkModel *model,
                                const double *base,
                                const double *amplitude,
                                double frequency,
                                double phase,
                                struct PlkHistory **out);

// Tabulated history joined by a natural cubic spline. `theta` must be
// strictly increasing and cover `[-tau_max, 0]`.
//
// # Safety
// Each array must hold `n` doubles.
enum PlkStatus plk_history_table(const struct PlkModel *model,
                                 const double *theta,
                                 const double *x,
                                 const double *y,
                                 const double *z,
                                 size_t n,
                                 struct PlkHistory **out);

// # Safety
// `history` must be NULL or a live history handle.
void plk_history_free(struct PlkHistory *history);

// Evaluate the history at `theta` in `[-tau_max, 0]`.
//
// # Safety
// `history` must be live; `out` must hold 3 doubles.
enum PlkStatus plk_history_eval(const struct PlkHistory *history, double theta, double *out);

// Integrate on `[0, t_end]`. `step <= 0` selects the default step.
//
// # Safety
// `model` and `history` must be live; `out` writable.
enum PlkStatus plk_integrate(const struct PlkModel *model,
                             const struct PlkHistory *history,
                             double t_end,
                             double step,
                             struct PlkTrajectory **out);

// # Safety
// `traj` must be NULL or a live trajectory handle.
void plk_trajectory_free(struct PlkTrajectory *traj);

// Number of nodes, including `t = 0`. Returns 0 for NULL.
//
// # Safety
// `traj` must be NULL or live.
size_t plk_trajectory_len(const struct PlkTrajectory *traj);

// Time and state of node `index`.
//
// # Safety
// `traj` must be live; `t` writable; `state` must hold 3 doubles.
enum PlkStatus plk_trajectory_node(const struct PlkTrajectory *traj,
                                   size_t index,
                                   double *t,
                                   double *state);

// Dense-output state at any `t` in `[-tau_max, t_end]`.
//
// # Safety
// `traj` must be live; `state` must hold 3 doubles.
enum PlkStatus plk_trajectory_sample(const struct PlkTrajectory *traj, double t, double *state);

// Write every `stride`-th node as CSV `t,x,y,z`.
//
// # Safety
// `traj` must be live; `path` a NUL-terminated UTF-8 string.
enum PlkStatus plk_trajectory_write_csv(const struct PlkTrajectory *traj,
                                        const char *path,
                                        size_t stride);

// Name of admissibility condition `index` (static string), or NULL when
// `index >= PLK_CONDITION_COUNT`.
const char *plk_condition_name(size_t index);

// Evaluate the functional at the initial history and every admissibility
// condition.
//
// # Safety
// Handles must be live; `out` writable.
enum PlkStatus plk_theorem_check(const struct PlkModel *model,
                                 const struct PlkCertificate *cert,
                                 const struct PlkHistory *history,
                                 struct PlkTheoremSummary *out);

// Check the decay envelopes, the Gronwall bound and the differential
// inequality at every `stride`-th node. The trajectory must start from an
// admissible history. `solver_error < 0` estimates the solver error by a
// half-step rerun.
//
// # Safety
// Handles must be live; `out` writable.
enum PlkStatus plk_envelope_check(const struct PlkTrajectory *traj,
                                  const struct PlkCertificate *cert,
                                  size_t stride,
                                  double solver_error,
                                  struct PlkEnvelopeSummary *out);

// Run a scenario file end to end. `out_dir` may be NULL to use the
// directory named in the file. `exit_code` receives the command-line exit
// code (0, 2 or 3); input errors are returned as a failing status.
//
// # Safety
// Strings must be NUL-terminated UTF-8; `exit_code` writable.
enum PlkStatus plk_run_scenario(const char *config, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLANKTON_LK_H */
