#ifndef FORGEBENCH_H
#define FORGEBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FbStatus {
  FB_STATUS_OK = 0,
  FB_STATUS_NULL_POINTER = 1,
  FB_STATUS_INVALID_ARGUMENT = 2,
  FB_STATUS_IO = 3,
  FB_STATUS_DECODE = 4,
  FB_STATUS_DEGENERATE = 5,
  FB_STATUS_UNSUPPORTED = 6,
  FB_STATUS_PANIC = 7,
} FbStatus;

/**
 * Opaque RGB8 frame.
 */
typedef struct FbFrame FbFrame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Free with
 * `fb_string_free`.
 */
char *fb_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void fb_string_free(char *s);

/**
 * Static NUL-terminated version string.
 */
const char *fb_version(void);

/**
 * Copies `len` = width*height*3 bytes of row-major RGB into a new frame.
 *
 * # Safety
 * `rgb` must point to `len` readable bytes; `out` must be writable.
 */
enum FbStatus fb_frame_new(uint32_t width,
                           uint32_t height,
                           const uint8_t *rgb,
                           size_t len,
                           struct FbFrame **out);

/**
 * Reads an 8-bit RGB PNG.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FbStatus fb_frame_read(const char *path, struct FbFrame **out);

/**
 * # Safety
 * `frame` must be a live handle; `path` a NUL-terminated string.
 */
enum FbStatus fb_frame_write(const struct FbFrame *frame, const char *path);

/**
 * # Safety
 * `frame` must be NULL or a live handle.
 */
uint32_t fb_frame_width(const struct FbFrame *frame);

/**
 * # Safety
 * `frame` must be NULL or a live handle.
 */
uint32_t fb_frame_height(const struct FbFrame *frame);

/**
 * Borrowed pointer to the RGB bytes, valid until the frame is freed.
 * Stores the byte count in `len`.
 *
 * # Safety
 * `frame` must be NULL or a live handle; `len` NULL or writable.
 */
const uint8_t *fb_frame_pixels(const struct FbFrame *frame, size_t *len);

/**
 * # Safety
 * `frame` must be NULL or a handle not yet freed.
 */
void fb_frame_free(struct FbFrame *frame);

/**
 * Applies a frame-level op with its canonical parameters. `seed` is only
 * used by `noise`. Compression ops are video-level and return
 * `FB_STATUS_UNSUPPORTED`.
 *
 * # Safety
 * `frame` must be a live handle, `op_id` a NUL-terminated string and
 * `out` writable.
 */
enum FbStatus fb_perturb(const struct FbFrame *frame,
                         const char *op_id,
                         uint64_t seed,
                         struct FbFrame **out);

/**
 * Per-frame noise seed.
 *
 * # Safety
 * `video_id` and `op_id` must be NUL-terminated strings; `out` writable.
 */
enum FbStatus fb_derive_frame_seed(uint64_t global_seed,
                                   const char *video_id,
                                   const char *op_id,
                                   uint64_t frame_index,
                                   uint64_t *out);

/**
 * Built-in reference scorer in [0, 1].
 *
 * # Safety
 * `frame` must be a live handle; `out` writable.
 */
enum FbStatus fb_baseline_score(const struct FbFrame *frame, double *out);

/**
 * ROC AUC in [0, 1] with fake as the positive class. `labels[i]` is 1 for
 * fake and 0 for real.
 *
 * # Safety
 * `scores` and `labels` must point to `n` readable elements; `out` writable.
 */
enum FbStatus fb_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Arithmetic mean of `n` >= 1 percentages.
 *
 * # Safety
 * `values` must point to `n` readable elements; `out` writable.
 */
enum FbStatus fb_row_average(const double *values, size_t n, double *out);

/**
 * Evenly spaced sample of `min(n_frames, k)` indices. Writes at most `cap`
 * entries to `buf` and the full count to `out_len`; if `cap` is too small
 * nothing is written and `FB_STATUS_INVALID_ARGUMENT` is returned.
 *
 * # Safety
 * `buf` must have room for `cap` elements; `out_len` writable.
 */
enum FbStatus fb_sample_frame_indices(size_t n_frames,
                                      size_t k,
                                      size_t *buf,
                                      size_t cap,
                                      size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORGEBENCH_H */
