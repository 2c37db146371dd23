#ifndef TUMOR_SALIENCY_H
#define TUMOR_SALIENCY_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_ARGUMENT = 1,
  /**
   * Bad key, value, size or UTF-8 text.
   */
  TS_STATUS_INVALID_ARGUMENT = 2,
  TS_STATUS_IO = 3,
  TS_STATUS_FORMAT = 4,
  /**
   * A pipeline stage (layering, assembly, solver) failed.
   */
  TS_STATUS_PIPELINE = 5,
  TS_STATUS_PANIC = 6,
} TsStatus;

/**
 * Result of one pipeline run.
 */
typedef struct TsAnalysis TsAnalysis;

/**
 * Pipeline parameters.
 */
typedef struct TsConfig TsConfig;

/**
 * Grayscale image in `[0, 1]`.
 */
typedef struct TsImage TsImage;

typedef struct TsDiagnostics {
  size_t regions;
  size_t layer_count;
  double sigma2_sq;
  size_t adaptation_steps;
  /**
   * Non-zero when layering failed and one layer was used.
   */
  int32_t layer_fallback;
  size_t solver_iterations;
  int32_t converged;
  double residual;
  double objective;
  double seconds;
} TsDiagnostics;

typedef struct TsScore {
  double precision;
  double recall;
  double f_measure;
  double mae;
} TsScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ts_last_error_message(void);

/**
 * Loads a PNG or PGM image; colour input is averaged to gray.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TsStatus ts_image_load(const char *path, struct TsImage **out);

/**
 * Copies a row-major `width * height` buffer of intensities in `[0, 1]`.
 *
 * # Safety
 * `data` must point to `width * height` doubles; `out` must be writable.
 */
enum TsStatus ts_image_from_buffer(size_t width,
                                   size_t height,
                                   const double *data,
                                   struct TsImage **out);

/**
 * # Safety
 * `img` must be NULL or a handle from this library, freed at most once.
 */
void ts_image_free(struct TsImage *img);

/**
 * # Safety
 * `img` must be a valid handle.
 */
size_t ts_image_width(const struct TsImage *img);

/**
 * # Safety
 * `img` must be a valid handle.
 */
size_t ts_image_height(const struct TsImage *img);

/**
 * Default configuration.
 */
struct TsConfig *ts_config_new(void);

/**
 * Reads a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TsStatus ts_config_from_file(const char *path, struct TsConfig **out);

/**
 * Sets one configuration key, validating the result.
 *
 * # Safety
 * `cfg` must be a valid handle; `key` and `value` NUL-terminated strings.
 */
enum TsStatus ts_config_set(struct TsConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must be NULL or a handle from this library, freed at most once.
 */
void ts_config_free(struct TsConfig *cfg);

/**
 * Runs the full pipeline on `img`. A NULL `cfg` means defaults.
 *
 * # Safety
 * `img` must be a valid handle, `cfg` NULL or valid, `out` writable.
 */
enum TsStatus ts_analyze(const struct TsImage *img,
                         const struct TsConfig *cfg,
                         struct TsAnalysis **out);

/**
 * Copies the per-pixel saliency map (row-major) into `buf`.
 *
 * # Safety
 * `a` must be a valid handle; `buf` must hold `len` doubles.
 */
enum TsStatus ts_analysis_saliency(const struct TsAnalysis *a, double *buf, size_t len);

/**
 * # Safety
 * `a` must be a valid handle.
 */
size_t ts_analysis_width(const struct TsAnalysis *a);

/**
 * # Safety
 * `a` must be a valid handle.
 */
size_t ts_analysis_height(const struct TsAnalysis *a);

/**
 * # Safety
 * `a` must be a valid handle; `out` writable.
 */
enum TsStatus ts_analysis_diagnostics(const struct TsAnalysis *a, struct TsDiagnostics *out);

/**
 * Scores the saliency map against a ground-truth mask given as one byte
 * per pixel (non-zero = tumor).
 *
 * # Safety
 * `a` must be a valid handle; `mask` must hold `len` bytes; `out` writable.
 */
enum TsStatus ts_analysis_score(const struct TsAnalysis *a,
                                const uint8_t *mask,
                                size_t len,
                                struct TsScore *out);

/**
 * # Safety
 * `a` must be NULL or a handle from this library, freed at most once.
 */
void ts_analysis_free(struct TsAnalysis *a);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ts_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TUMOR_SALIENCY_H */
