#ifndef FIRST_PHOTON_H
#define FIRST_PHOTON_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_ARGUMENT = 2,
  FP_STATUS_IO = 3,
  FP_STATUS_DATA = 4,
  FP_STATUS_NO_DETECTION = 5,
  FP_STATUS_PANIC = 6,
} FpStatus;

// Opaque set of labelled binary patterns.
typedef struct FpDataset FpDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fp_version(void);

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`). Returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t fp_last_error_message(char *buf, size_t len);

// Loads IDX image/label files (gzip detected) and keeps the first
// `per_label` patterns of each digit, binarized at `threshold`.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum FpStatus fp_dataset_load_idx(const char *images,
                                  const char *labels,
                                  uint32_t per_label,
                                  uint8_t threshold,
                                  struct FpDataset **out);

// Loads a dataset manifest written by the `ingest` command.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FpStatus fp_dataset_load_json(const char *path, struct FpDataset **out);

// # Safety
// `dataset` must be null or a handle from this library, freed once.
void fp_dataset_free(struct FpDataset *dataset);

// # Safety
// `dataset` must be a live handle; `out` must be writable.
enum FpStatus fp_dataset_len(const struct FpDataset *dataset, size_t *out);

// Label and on-pixel count of pattern `index`.
//
// # Safety
// `dataset` must be a live handle; outputs must be writable.
enum FpStatus fp_dataset_pattern(const struct FpDataset *dataset,
                                 size_t index,
                                 uint8_t *out_label,
                                 uint32_t *out_on_pixels);

// Analytic mode-classifier confusion matrix.
//
// `orders` holds 20 values `m0, n0, m1, n1, …` for labels 0–9. The grid is
// padded automatically to hold every mode. `out_rows` receives 100 values,
// row-major by true label.
//
// # Safety
// `orders` must hold 20 values, `out_rows` 100; `out_fidelity` writable.
enum FpStatus fp_qc_confusion(const struct FpDataset *dataset,
                              const uint32_t *orders,
                              double beam_waist,
                              double mode_waist,
                              uint32_t supersample,
                              double *out_rows,
                              double *out_fidelity);

// Index-pixel classifier confusion matrix. `pixels` holds 20 values
// `row0, col0, row1, col1, …` (zero-based, row 0 at the top).
//
// # Safety
// `pixels` must hold 20 values, `out_rows` 100; `out_fidelity` writable.
enum FpStatus fp_cc_confusion(const struct FpDataset *dataset,
                              const uint32_t *pixels,
                              double *out_rows,
                              double *out_fidelity);

// Per-pixel MAP classifier fidelity under uniform illumination.
//
// # Safety
// `dataset` must be a live handle; `out` must be writable.
enum FpStatus fp_map_threshold(const struct FpDataset *dataset, double *out);

// Exact first-detection label distribution for cyclic display of ten
// masks. `detect` holds per-display detection probabilities, `order` the
// display order (a permutation of 0–9, or null for 0, 1, …, 9).
//
// # Safety
// `detect` and `out` must hold 10 values; `order` null or 10 values.
enum FpStatus fp_first_photon_distribution(const double *detect,
                                           const uint32_t *order,
                                           double *out);

// Physicists' Hermite polynomial `H_n(x)`.
//
// # Safety
// `out` must be writable.
enum FpStatus fp_hermite(uint32_t n, double x, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIRST_PHOTON_H */
