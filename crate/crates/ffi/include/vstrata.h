#ifndef VSTRATA_H
#define VSTRATA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

// Result code of every fallible call.
typedef enum VstStatus {
  VST_STATUS_OK = 0,
  VST_STATUS_NULL_POINTER = 1,
  VST_STATUS_INVALID_ARGUMENT = 2,
  VST_STATUS_DIMENSION_MISMATCH = 3,
  VST_STATUS_IO = 4,
  VST_STATUS_DECODE = 5,
  VST_STATUS_UNSUPPORTED = 6,
  VST_STATUS_DATASET = 7,
  VST_STATUS_PANIC = 8,
} VstStatus;

// 8-bit grayscale image handle.
typedef struct VstGray VstGray;

// Binary mask handle.
typedef struct VstMask VstMask;

// Ordered strata produced by `vst_stratify`.
typedef struct VstStrata VstStrata;

// Pixel confusion counts.
typedef struct VstConfusion {
  uint64_t tp;
  uint64_t tn;
  uint64_t fp;
  uint64_t fn_;
} VstConfusion;

// Pixel position on a curve.
typedef struct VstPoint {
  size_t row;
  size_t col;
} VstPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next `vst_` call on the same thread.
const char *vst_last_error(void);

// Static NUL-terminated version string.
const char *vst_version(void);

// Static NUL-terminated name of a status code.
const char *vst_status_name(enum VstStatus status);

// Creates a mask from `width * height` bytes of 0/1, or an all-zero mask
// when `data` is NULL.
enum VstStatus vst_mask_new(size_t width, size_t height, const uint8_t *data, struct VstMask **out);

// Loads a PNG/PNM image; every nonzero pixel is foreground.
enum VstStatus vst_mask_load(const char *path, struct VstMask **out);

// Writes an 8-bit grayscale PNG with foreground as 255.
enum VstStatus vst_mask_save(const struct VstMask *mask, const char *path);

void vst_mask_free(struct VstMask *mask);

// 0 for NULL.
size_t vst_mask_width(const struct VstMask *mask);

// 0 for NULL.
size_t vst_mask_height(const struct VstMask *mask);

// Number of foreground pixels; 0 for NULL.
size_t vst_mask_count(const struct VstMask *mask);

// Copies the pixels into `buf`, which must hold at least `width * height`
// bytes.
enum VstStatus vst_mask_copy_data(const struct VstMask *mask, uint8_t *buf, size_t len);

// Opening with a `kernel` × `kernel` square; `naive` selects the reference
// implementation.
enum VstStatus vst_open(const struct VstMask *mask,
                        size_t kernel,
                        bool naive,
                        struct VstMask **out);

// Thin, stem and raw channels for threshold `d1`.
enum VstStatus vst_stack3(const struct VstMask *mask,
                          size_t d1,
                          struct VstMask **thin,
                          struct VstMask **stem,
                          struct VstMask **raw);

// Partitions `mask` by the strictly increasing thresholds in `ladder`.
enum VstStatus vst_stratify(const struct VstMask *mask,
                            const size_t *ladder,
                            size_t ladder_len,
                            struct VstStrata **out);

// 0 for NULL.
size_t vst_strata_count(const struct VstStrata *strata);

// Copies stratum `index` (thinnest first) into a new mask handle.
enum VstStatus vst_strata_get(const struct VstStrata *strata, size_t index, struct VstMask **out);

void vst_strata_free(struct VstStrata *strata);

// Creates an image from `width * height` bytes, or all zeros when `data` is
// NULL.
enum VstStatus vst_gray_new(size_t width, size_t height, const uint8_t *data, struct VstGray **out);

enum VstStatus vst_gray_load(const char *path, struct VstGray **out);

enum VstStatus vst_gray_save(const struct VstGray *img, const char *path);

void vst_gray_free(struct VstGray *img);

size_t vst_gray_width(const struct VstGray *img);

size_t vst_gray_height(const struct VstGray *img);

enum VstStatus vst_gray_copy_data(const struct VstGray *img, uint8_t *buf, size_t len);

// Binarizes each map with `value > threshold` and ORs the results.
enum VstStatus vst_fuse(const struct VstGray *const *maps,
                        size_t count,
                        uint8_t threshold,
                        struct VstMask **out);

// Pixel-wise maximum of the maps.
enum VstStatus vst_fuse_soft(const struct VstGray *const *maps, size_t count, struct VstGray **out);

// Confusion counts of `pred` against `truth`, restricted to `fov` when it
// is not NULL.
enum VstStatus vst_confusion(const struct VstMask *pred,
                             const struct VstMask *truth,
                             const struct VstMask *fov,
                             struct VstConfusion *out);

// Area under the ROC curve of a soft map; `fov` may be NULL.
enum VstStatus vst_roc_auc(const struct VstGray *pred,
                           const struct VstMask *truth,
                           const struct VstMask *fov,
                           double *out);

// Discrete Fréchet distance under the Chebyshev metric; both curves must be
// nonempty.
enum VstStatus vst_discrete_frechet(const struct VstPoint *a,
                                    size_t a_len,
                                    const struct VstPoint *b,
                                    size_t b_len,
                                    size_t *out);

// Weighted sum of per-channel Frobenius residual norms. `pred` holds
// `channels` row-major planes of `width * height` values; `targets` and
// `weights` hold `channels` entries each.
enum VstStatus vst_loss_gen(const double *pred,
                            size_t channels,
                            size_t width,
                            size_t height,
                            const struct VstMask *const *targets,
                            const double *weights,
                            double *out);

// Mean log real score plus mean log of one minus fake score, with scores
// clamped away from 0 and 1.
enum VstStatus vst_cgan_loss(const double *d_real,
                             size_t real_len,
                             const double *d_fake,
                             size_t fake_len,
                             double *out);

// `cgan + lambda * l1`; `lambda` must be finite and non-negative.
enum VstStatus vst_composite_objective(double cgan, double l1, double lambda, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VSTRATA_H */
