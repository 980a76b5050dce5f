#ifndef WMLAB_H
#define WMLAB_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum WmStatus {
  WM_STATUS_OK = 0,
  WM_STATUS_NULL_POINTER = 1,
  WM_STATUS_INVALID_ARGUMENT = 2,
  WM_STATUS_DIMENSION_MISMATCH = 3,
  WM_STATUS_TOO_SMALL = 4,
  WM_STATUS_CAPACITY_EXCEEDED = 5,
  WM_STATUS_WRONG_FAMILY = 6,
  WM_STATUS_IO = 7,
  WM_STATUS_FORMAT = 8,
  WM_STATUS_PANIC = 9,
  WM_STATUS_INTERNAL = 10,
} WmStatus;

/**
 * Watermark family selector for [`wm_key_new`].
 */
typedef enum WmFamily {
  WM_FAMILY_SPREAD_SPECTRUM = 0,
  WM_FAMILY_FOURIER_RING = 1,
  WM_FAMILY_BOUNDARY_FRAME = 2,
  WM_FAMILY_FOURIER_SQUARE = 3,
} WmFamily;

/**
 * Opaque RGB image.
 */
typedef struct WmImage WmImage;

/**
 * Opaque watermark key.
 */
typedef struct WmKey WmKey;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *wm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wm_version(void);

/**
 * Creates an image from `width * height * 3` interleaved RGB values.
 *
 * # Safety
 * `rgb` must point to `len` readable doubles and `out` must be writable.
 */
enum WmStatus wm_image_new(size_t width,
                           size_t height,
                           const double *rgb,
                           size_t len,
                           struct WmImage **out);

/**
 * Loads an 8- or 16-bit RGB or grayscale PNG.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum WmStatus wm_image_load_png(const char *path, struct WmImage **out);

/**
 * Writes an 8-bit RGB PNG.
 *
 * # Safety
 * `img` must be a live handle and `path` a NUL-terminated string.
 */
enum WmStatus wm_image_save_png(const struct WmImage *img, const char *path);

/**
 * Width in pixels, or 0 for a null handle.
 *
 * # Safety
 * `img` must be null or a live handle.
 */
size_t wm_image_width(const struct WmImage *img);

/**
 * Height in pixels, or 0 for a null handle.
 *
 * # Safety
 * `img` must be null or a live handle.
 */
size_t wm_image_height(const struct WmImage *img);

/**
 * Copies the pixel values into `buf`, which must hold `width * height * 3` doubles.
 *
 * # Safety
 * `img` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum WmStatus wm_image_copy_data(const struct WmImage *img, double *buf, size_t len);

/**
 * Releases an image handle. Null is ignored.
 *
 * # Safety
 * `img` must be null or a handle not yet freed.
 */
void wm_image_free(struct WmImage *img);

/**
 * Creates a key with the family's default amplitude.
 *
 * # Safety
 * `out` must be writable.
 */
enum WmStatus wm_key_new(enum WmFamily family, uint64_t seed, struct WmKey **out);

/**
 * Parses a key from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` must be writable.
 */
enum WmStatus wm_key_from_json(const char *json, struct WmKey **out);

/**
 * Overrides the embedding amplitude.
 *
 * # Safety
 * `key` must be a live handle.
 */
enum WmStatus wm_key_set_amplitude(struct WmKey *key, double amplitude);

/**
 * Releases a key handle. Null is ignored.
 *
 * # Safety
 * `key` must be null or a handle not yet freed.
 */
void wm_key_free(struct WmKey *key);

/**
 * Embeds the key's watermark. `message_hex` is required for spread-spectrum
 * keys and ignored otherwise.
 *
 * # Safety
 * Handles must be live, `message_hex` null or NUL-terminated, `out` writable.
 */
enum WmStatus wm_embed(const struct WmImage *cover,
                       const struct WmKey *key,
                       const char *message_hex,
                       struct WmImage **out);

/**
 * Decodes a spread-spectrum payload and writes the normalized bit distance to
 * `message_hex`.
 *
 * # Safety
 * Handles must be live, `message_hex` NUL-terminated, `out` writable.
 */
enum WmStatus wm_ss_distance(const struct WmImage *img,
                             const struct WmKey *key,
                             const char *message_hex,
                             double *out);

/**
 * Detector statistic of a pattern key: correlation for the Fourier families,
 * frame correlation for the boundary family.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum WmStatus wm_pattern_score(const struct WmImage *img, const struct WmKey *key, double *out);

/**
 * Shifts right by `dx` and restores the uncovered columns from the input.
 *
 * # Safety
 * `img` must be a live handle and `out` writable.
 */
enum WmStatus wm_attack_translate(const struct WmImage *img, size_t dx, struct WmImage **out);

/**
 * Noise-injection regeneration.
 *
 * # Safety
 * `img` must be a live handle and `out` writable.
 */
enum WmStatus wm_attack_regenerate(const struct WmImage *img,
                                   double strength,
                                   size_t passes,
                                   uint64_t seed,
                                   struct WmImage **out);

/**
 * Test-time refinement of `attacked` toward the watermarked reference.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum WmStatus wm_attack_refine(const struct WmImage *attacked,
                               const struct WmImage *watermarked,
                               size_t steps,
                               struct WmImage **out);

/**
 * Matches luminance statistics and chroma of `optimized` to `watermarked`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum WmStatus wm_attack_color_transfer(const struct WmImage *optimized,
                                       const struct WmImage *watermarked,
                                       struct WmImage **out);

/**
 * PSNR in dB, capped at 100 for identical images.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum WmStatus wm_psnr(const struct WmImage *a, const struct WmImage *b, double *out);

/**
 * Mean SSIM on luminance.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum WmStatus wm_ssim(const struct WmImage *a, const struct WmImage *b, double *out);

/**
 * Normalized mutual information of 8-bit luminance.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum WmStatus wm_nmi(const struct WmImage *a, const struct WmImage *b, double *out);

/**
 * Euclidean combination of a detection score and a quality aggregate.
 */
double wm_total_score(double detection, double quality);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WMLAB_H */
