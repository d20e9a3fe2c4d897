#ifndef LEDSNA_H
#define LEDSNA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define LEDSNA_SURROGATE_SVR 0

#define LEDSNA_SURROGATE_RIDGE 1

#define LEDSNA_KERNEL_GAUSSIAN 0

#define LEDSNA_KERNEL_LINEAR 1

#define LEDSNA_METRIC_DEFAULT -1

#define LEDSNA_METRIC_COSINE 0

#define LEDSNA_METRIC_L2 1

typedef enum LedsnaStatus {
  LEDSNA_STATUS_OK = 0,
  LEDSNA_STATUS_NULL_ARGUMENT = 1,
  LEDSNA_STATUS_INVALID_ARGUMENT = 2,
  LEDSNA_STATUS_INVALID_GROUPS = 3,
  LEDSNA_STATUS_PARSE = 4,
  LEDSNA_STATUS_BLACK_BOX = 5,
  LEDSNA_STATUS_NOT_CONVERGED = 6,
  LEDSNA_STATUS_SINGULAR = 7,
  LEDSNA_STATUS_IO = 8,
  LEDSNA_STATUS_PANIC = 9,
} LedsnaStatus;

typedef struct LedsnaBlackBox LedsnaBlackBox;

typedef struct LedsnaExplanation LedsnaExplanation;

typedef struct LedsnaImage LedsnaImage;

typedef struct LedsnaSegmentation LedsnaSegmentation;

/**
 * One input handed to a callback black box. Image probes carry `rgb`
 * (`width * height * 3` bytes); text probes carry `tokens`. `mask` is the
 * interpretable mask the probe was recovered from, or null.
 */
typedef struct LedsnaProbe {
  const uint8_t *mask;
  size_t mask_len;
  const uint8_t *rgb;
  size_t width;
  size_t height;
  const char *const *tokens;
  size_t n_tokens;
} LedsnaProbe;

/**
 * Writes one probability per probe into `out` and returns 0, or returns
 * non-zero on failure. Calls are never concurrent.
 */
typedef int (*LedsnaPredictFn)(void *user_data,
                               const struct LedsnaProbe *probes,
                               size_t n,
                               double *out);

/**
 * Explanation settings. `gamma <= 0` and `sigma <= 0` select the
 * defaults that depend on the interpretable dimension.
 */
typedef struct LedsnaConfig {
  int surrogate;
  int kernel;
  double gamma;
  double c;
  double epsilon;
  double lambda;
  size_t n_samples;
  double sigma;
  int metric;
  size_t k;
  uint64_t seed;
  double tol;
  size_t batch_size;
  size_t parallelism;
} LedsnaConfig;

/**
 * Message of the most recent failure on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *ledsna_last_error(void);

/**
 * Releases a string returned by this library.
 */
void ledsna_string_free(char *s);

/**
 * Decodes a binary PPM (P6, maxval 255).
 */
enum LedsnaStatus ledsna_image_from_ppm(const uint8_t *data, size_t len, struct LedsnaImage **out);

/**
 * Copies `width * height * 3` interleaved RGB bytes.
 */
enum LedsnaStatus ledsna_image_from_rgb(size_t width,
                                        size_t height,
                                        const uint8_t *rgb,
                                        struct LedsnaImage **out);

void ledsna_image_free(struct LedsnaImage *image);

enum LedsnaStatus ledsna_segment_grid(const struct LedsnaImage *image,
                                      size_t rows,
                                      size_t cols,
                                      struct LedsnaSegmentation **out);

enum LedsnaStatus ledsna_segment_slic(const struct LedsnaImage *image,
                                      size_t k,
                                      double compactness,
                                      size_t iterations,
                                      struct LedsnaSegmentation **out);

/**
 * Number of segments, or 0 for a null handle.
 */
size_t ledsna_segmentation_count(const struct LedsnaSegmentation *seg);

/**
 * Copies the per-pixel segment labels (row-major) into `out`, which must
 * hold `width * height` entries. Returns the number of pixels, or 0 if
 * `cap` is too small.
 */
size_t ledsna_segmentation_labels(const struct LedsnaSegmentation *seg, uint32_t *out, size_t cap);

void ledsna_segmentation_free(struct LedsnaSegmentation *seg);

/**
 * Black box from a spec string (`builtin:...`, `subprocess:...`,
 * `http:...`). Built-ins sized by the interpretable dimension are
 * instantiated per explanation.
 */
enum LedsnaStatus ledsna_blackbox_from_spec(const char *spec,
                                            size_t retries,
                                            struct LedsnaBlackBox **out);

/**
 * Black box backed by a C function.
 */
enum LedsnaStatus ledsna_blackbox_from_callback(LedsnaPredictFn predict,
                                                void *user_data,
                                                struct LedsnaBlackBox **out);

void ledsna_blackbox_free(struct LedsnaBlackBox *bb);

struct LedsnaConfig ledsna_config_default(void);

enum LedsnaStatus ledsna_explain_image(const struct LedsnaImage *image,
                                       const struct LedsnaSegmentation *segmentation,
                                       const struct LedsnaBlackBox *blackbox,
                                       const struct LedsnaConfig *config,
                                       struct LedsnaExplanation **out);

/**
 * Explains a whitespace-tokenized UTF-8 text, grouping consecutive runs
 * of `window` tokens (1 for single tokens).
 */
enum LedsnaStatus ledsna_explain_text(const char *text,
                                      size_t window,
                                      const struct LedsnaBlackBox *blackbox,
                                      const struct LedsnaConfig *config,
                                      struct LedsnaExplanation **out);

size_t ledsna_explanation_n_features(const struct LedsnaExplanation *e);

/**
 * Copies up to `cap` attributions; returns the number copied.
 */
size_t ledsna_explanation_attributions(const struct LedsnaExplanation *e, double *out, size_t cap);

/**
 * Copies up to `cap` top-K feature indices; returns the number copied.
 */
size_t ledsna_explanation_top_k(const struct LedsnaExplanation *e, size_t *out, size_t cap);

double ledsna_explanation_err(const struct LedsnaExplanation *e);

/**
 * NaN when undefined (constant labels, inexact fit).
 */
double ledsna_explanation_r_squared(const struct LedsnaExplanation *e);

double ledsna_explanation_g_at_x(const struct LedsnaExplanation *e);

double ledsna_explanation_f_at_x(const struct LedsnaExplanation *e);

/**
 * The explanation as JSON; free with [`ledsna_string_free`].
 */
char *ledsna_explanation_to_json(const struct LedsnaExplanation *e);

void ledsna_explanation_free(struct LedsnaExplanation *e);

double ledsna_approx_error(double f_x0, double g_x0);

/**
 * R² of `n` predictions against labels. Writes NaN when undefined.
 */
enum LedsnaStatus ledsna_r_squared(const double *labels,
                                   const double *predictions,
                                   size_t n,
                                   double *out);

#endif  /* LEDSNA_H */
