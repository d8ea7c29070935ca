#ifndef TAILFIT_H
#define TAILFIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum TailfitStatus {
  TailfitStatus_Ok = 0,
  TailfitStatus_NullPointer = 1,
  TailfitStatus_InvalidArgument = 2,
  TailfitStatus_Domain = 3,
  TailfitStatus_Divergent = 4,
  TailfitStatus_EmptyTail = 5,
  TailfitStatus_InsufficientTail = 6,
  TailfitStatus_Degenerate = 7,
  TailfitStatus_NoFit = 8,
  TailfitStatus_Infeasible = 9,
  TailfitStatus_NoConvergence = 10,
  TailfitStatus_Format = 11,
  TailfitStatus_Io = 12,
  TailfitStatus_Panic = 99,
} TailfitStatus;

/**
 * Model families, in report order.
 */
typedef enum TailfitFamily {
  TailfitFamily_PowerLaw = 0,
  TailfitFamily_LogNormal = 1,
  TailfitFamily_Exponential = 2,
} TailfitFamily;

/**
 * Binned file-size counts.
 */
typedef struct TailfitHistogram TailfitHistogram;

/**
 * A normalized discrete tail model.
 */
typedef struct TailfitModel TailfitModel;

/**
 * Per-family best fits ranked by rss.
 */
typedef struct TailfitReport TailfitReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *tailfit_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 */
void tailfit_string_free(char *s);

struct TailfitHistogram *tailfit_histogram_new(void);

void tailfit_histogram_free(struct TailfitHistogram *h);

/**
 * Adds `count` files to bin `k` (`k >= 1`).
 */
enum TailfitStatus tailfit_histogram_add(struct TailfitHistogram *h, uint64_t k, uint64_t count);

/**
 * Adds one file of `bytes` bytes to bin `floor(bytes / 1024) + 1`.
 */
enum TailfitStatus tailfit_histogram_add_size_bytes(struct TailfitHistogram *h, uint64_t bytes);

enum TailfitStatus tailfit_histogram_total(const struct TailfitHistogram *h, uint64_t *out);

enum TailfitStatus tailfit_histogram_count(const struct TailfitHistogram *h,
                                           uint64_t k,
                                           uint64_t *out);

/**
 * Reads a line-delimited JSON manifest (plain or gzip) and returns the
 * histogram of one MIME category (`"image"`, `"video"`, ...).
 */
enum TailfitStatus tailfit_histogram_from_manifest(const char *path,
                                                   const char *category,
                                                   struct TailfitHistogram **out);

enum TailfitStatus tailfit_model_powerlaw(double alpha, uint64_t k_min, struct TailfitModel **out);

enum TailfitStatus tailfit_model_lognormal(double mu,
                                           double sigma,
                                           uint64_t k_min,
                                           struct TailfitModel **out);

enum TailfitStatus tailfit_model_exponential(double lambda,
                                             uint64_t k_min,
                                             struct TailfitModel **out);

/**
 * `p(k) ∝ exp(−λ_s·k − λ₁·ln k − λ₂·ln² k)` on `[k_min, k_max]`; `k_max = 0`
 * means unbounded.
 */
enum TailfitStatus tailfit_model_maxent(double lambda_s,
                                        double lambda_1,
                                        double lambda_2,
                                        uint64_t k_min,
                                        uint64_t k_max,
                                        struct TailfitModel **out);

void tailfit_model_free(struct TailfitModel *m);

enum TailfitStatus tailfit_model_pmf(const struct TailfitModel *m, uint64_t k, double *out);

/**
 * `Pr(K ≥ k)`.
 */
enum TailfitStatus tailfit_model_ccdf(const struct TailfitModel *m, uint64_t k, double *out);

enum TailfitStatus tailfit_model_log_likelihood(const struct TailfitModel *m,
                                                const struct TailfitHistogram *h,
                                                double *out);

/**
 * Draws `n` values with a fixed seed into a new histogram.
 */
enum TailfitStatus tailfit_model_sample(const struct TailfitModel *m,
                                        uint64_t n,
                                        uint64_t seed,
                                        struct TailfitHistogram **out);

/**
 * Fits every family over `points` log-spaced `k_min` candidates in
 * `[kmin_lo, kmin_hi]` and ranks them by rss.
 */
enum TailfitStatus tailfit_compare(const struct TailfitHistogram *h,
                                   uint64_t kmin_lo,
                                   uint64_t kmin_hi,
                                   uint32_t points,
                                   struct TailfitReport **out);

void tailfit_report_free(struct TailfitReport *r);

/**
 * Family with the smallest rss. Fails with `NoFit` if no family fitted.
 */
enum TailfitStatus tailfit_report_selected(const struct TailfitReport *r, enum TailfitFamily *out);

/**
 * Best rss over second-best rss; fails with `NoFit` with fewer than two fits.
 */
enum TailfitStatus tailfit_report_rss_ratio(const struct TailfitReport *r, double *out);

enum TailfitStatus tailfit_report_rss(const struct TailfitReport *r,
                                      enum TailfitFamily family,
                                      double *out);

enum TailfitStatus tailfit_report_kmin(const struct TailfitReport *r,
                                       enum TailfitFamily family,
                                       uint64_t *out);

/**
 * A fitted parameter by name: `"alpha"`, `"mu"`, `"sigma"` or `"lambda"`.
 */
enum TailfitStatus tailfit_report_param(const struct TailfitReport *r,
                                        enum TailfitFamily family,
                                        const char *name,
                                        double *out);

/**
 * The report as a JSON document; release with [`tailfit_string_free`].
 */
enum TailfitStatus tailfit_report_to_json(const struct TailfitReport *r, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAILFIT_H */
