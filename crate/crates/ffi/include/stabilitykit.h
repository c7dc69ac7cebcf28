#ifndef STABILITYKIT_H
#define STABILITYKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call.
 */
typedef enum SkStatus {
  SK_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SK_STATUS_NULL_ARGUMENT = 1,
  /**
   * File missing or unreadable.
   */
  SK_STATUS_IO = 2,
  /**
   * Malformed file contents or non-UTF-8 path.
   */
  SK_STATUS_PARSE = 3,
  /**
   * Argument out of range or inconsistent sizes.
   */
  SK_STATUS_INVALID_ARGUMENT = 4,
  /**
   * Nothing to measure: flat frames or untrackable motion.
   */
  SK_STATUS_DEGENERATE_CONTENT = 5,
  /**
   * Too few frames or samples for the request.
   */
  SK_STATUS_INSUFFICIENT_DATA = 6,
  /**
   * Output buffer too small; the required length was still written.
   */
  SK_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * Internal panic, caught at the boundary.
   */
  SK_STATUS_PANIC = 8,
} SkStatus;

/**
 * Trained regressor loaded from a checkpoint.
 */
typedef struct SkModel SkModel;

/**
 * Decoded video.
 */
typedef struct SkSequence SkSequence;

/**
 * Stability Score and its per-axis components, all in [0, 1].
 */
typedef struct SkStability {
  double score;
  double x;
  double y;
  double theta;
} SkStability;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sk_version(void);

/**
 * Load a Y4M file or a directory of PPM/PGM frames.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SkStatus sk_sequence_load(const char *path, struct SkSequence **out);

/**
 * Build a sequence from `frames` packed RGB8 images of `width` x `height`.
 *
 * # Safety
 * `rgb` must point to `len` readable bytes; `out` must be writable.
 */
enum SkStatus sk_sequence_from_rgb(size_t width,
                                   size_t height,
                                   size_t frames,
                                   double fps,
                                   const uint8_t *rgb,
                                   size_t len,
                                   struct SkSequence **out);

/**
 * Release a sequence. Null is ignored.
 *
 * # Safety
 * `seq` must come from this library and not be used afterwards.
 */
void sk_sequence_free(struct SkSequence *seq);

/**
 * Frame count, width and height; any output pointer may be null.
 *
 * # Safety
 * `seq` must be a live handle; non-null outputs must be writable.
 */
enum SkStatus sk_sequence_info(const struct SkSequence *seq,
                               size_t *frames,
                               size_t *width,
                               size_t *height);

/**
 * Inter-frame transformation fidelity in dB.
 *
 * # Safety
 * `seq` must be a live handle; `out_db` must be writable.
 */
enum SkStatus sk_itf(const struct SkSequence *seq, double *out_db);

/**
 * Low-frequency energy Stability Score of the estimated camera path.
 *
 * # Safety
 * `seq` must be a live handle; `out` must be writable.
 */
enum SkStatus sk_stability_score(const struct SkSequence *seq, struct SkStability *out);

/**
 * Estimated camera trajectory, one sample per frame. `capacity` is the
 * length of each of `x`, `y` and `theta`; `out_len` always receives the
 * frame count. Fails with `SK_STATUS_BUFFER_TOO_SMALL` when capacity is
 * short, in which case the buffers are left untouched.
 *
 * # Safety
 * `seq` must be a live handle; each buffer must hold `capacity` doubles.
 */
enum SkStatus sk_trajectory(const struct SkSequence *seq,
                            double *x,
                            double *y,
                            double *theta,
                            size_t capacity,
                            size_t *out_len);

/**
 * Load a checkpoint written by `stabilitykit train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SkStatus sk_model_load(const char *path, struct SkModel **out);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void sk_model_free(struct SkModel *model);

/**
 * Fused feature dimension the model expects.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum SkStatus sk_model_input_dim(const struct SkModel *model, size_t *out);

/**
 * Learned stability prediction averaged over `n_clips` seeded clips.
 *
 * # Safety
 * `model` and `seq` must be live handles; `out` must be writable.
 */
enum SkStatus sk_predict(const struct SkModel *model,
                         const struct SkSequence *seq,
                         size_t n_clips,
                         uint64_t seed,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STABILITYKIT_H */
