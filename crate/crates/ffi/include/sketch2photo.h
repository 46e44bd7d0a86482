#ifndef SKETCH2PHOTO_H
#define SKETCH2PHOTO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum S2pStatus {
  S2P_STATUS_OK = 0,
  S2P_STATUS_NULL_ARGUMENT = 1,
  S2P_STATUS_INVALID_INPUT = 2,
  S2P_STATUS_CONFIG = 3,
  S2P_STATUS_INTEGRITY = 4,
  S2P_STATUS_UNSUPPORTED_VERSION = 5,
  S2P_STATUS_IO = 6,
  S2P_STATUS_INTERNAL = 7,
  S2P_STATUS_PANIC = 8,
} S2pStatus;

// Opaque loaded model.
typedef struct S2pModel S2pModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, valid until the next
// failure on the same thread.
const char *s2p_last_error(void);

// Library version, static storage.
const char *s2p_library_version(void);

// Load checkpoints. `shape_path` is required; `content_path` may be null,
// in which case only [`s2p_photo_to_sketch`] is available.
//
// # Safety
// Paths must be null or NUL-terminated strings; `out` must be writable.
enum S2pStatus s2p_model_load(const char *shape_path,
                              const char *content_path,
                              struct S2pModel **out);

// Release a model from [`s2p_model_load`]; null is ignored.
//
// # Safety
// `model` must come from `s2p_model_load` and not be used afterwards.
void s2p_model_free(struct S2pModel *model);

// Digest identifying the loaded checkpoints; owned by the model.
//
// # Safety
// `model` must be a live handle or null.
const char *s2p_model_version(const struct S2pModel *model);

// Sketch → grayscale (`H×W`) and colour (`3×H×W`) photos. `reference` is
// an optional `3×H×W` style photo. Sides must be multiples of 4.
//
// # Safety
// Buffers must hold the stated number of floats; `reference` may be null.
enum S2pStatus s2p_synthesize(const struct S2pModel *model,
                              const float *sketch,
                              size_t width,
                              size_t height,
                              const float *reference,
                              float *out_gray,
                              float *out_color);

// Photo (`3×H×W`) → sketch (`H×W`).
//
// # Safety
// Buffers must hold the stated number of floats.
enum S2pStatus s2p_photo_to_sketch(const struct S2pModel *model,
                                   const float *photo,
                                   size_t width,
                                   size_t height,
                                   float *out_sketch);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKETCH2PHOTO_H */
