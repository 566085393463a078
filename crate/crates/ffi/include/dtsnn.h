#ifndef DTSNN_H
#define DTSNN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DtsStatus {
  DTS_STATUS_OK = 0,
  DTS_STATUS_NULL_POINTER = 1,
  DTS_STATUS_INVALID_ARGUMENT = 2,
  DTS_STATUS_IO = 3,
  DTS_STATUS_PARSE = 4,
  DTS_STATUS_SIMULATION = 5,
  DTS_STATUS_BUFFER_TOO_SMALL = 6,
  DTS_STATUS_PANIC = 7,
} DtsStatus;

/**
 * Opaque network handle.
 */
typedef struct DtsNetwork DtsNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dts_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *dts_last_error(void);

/**
 * Loads a netspec JSON file. `bits` selects the quantization width for
 * float-only files; pass 0 for integer files.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DtsStatus dts_network_load(const char *path, uint32_t bits, struct DtsNetwork **out);

/**
 * Same as [`dts_network_load`] but from an in-memory JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DtsStatus dts_network_from_json(const char *json, uint32_t bits, struct DtsNetwork **out);

/**
 * # Safety
 * `net` must come from a load function and not be freed twice. NULL is a no-op.
 */
void dts_network_free(struct DtsNetwork *net);

/**
 * # Safety
 * `net` must be a valid handle or NULL (returns 0).
 */
size_t dts_network_n_inputs(const struct DtsNetwork *net);

/**
 * # Safety
 * `net` must be a valid handle or NULL (returns 0).
 */
size_t dts_network_n_outputs(const struct DtsNetwork *net);

/**
 * Presents line amplitudes for the network's repetition count and
 * classifies. `counts` receives one positive spike count per output neuron
 * and must hold `n_outputs` entries. `label` and `cycles` may be NULL.
 *
 * # Safety
 * Buffers must be valid for the given lengths.
 */
enum DtsStatus dts_network_infer(const struct DtsNetwork *net,
                                 const int64_t *amplitudes,
                                 size_t n_amplitudes,
                                 uint64_t *counts,
                                 size_t n_counts,
                                 size_t *label,
                                 uint64_t *cycles);

/**
 * Level-crossing encodes `n_pixels` values in `[0, 1]` at `theta`.
 * `amplitudes` receives `n_pixels` signed event amplitudes.
 *
 * # Safety
 * Both buffers must hold `n_pixels` entries.
 */
enum DtsStatus dts_encode_image(const double *pixels,
                                size_t n_pixels,
                                double theta,
                                int64_t *amplitudes);

/**
 * Encodes a spike train (ascending times, nonzero amplitudes) into raw delta
 * words of `width_bits`. `written` always receives the required word count;
 * `DTS_STATUS_BUFFER_TOO_SMALL` is returned when `capacity` is short.
 *
 * # Safety
 * `times` and `amplitudes` must hold `n_events` entries, `words` `capacity`.
 */
enum DtsStatus dts_delta_encode(const uint64_t *times,
                                const int64_t *amplitudes,
                                size_t n_events,
                                uint32_t width_bits,
                                uint32_t *words,
                                size_t capacity,
                                size_t *written);

/**
 * Decodes raw delta words into `(time, amplitude)` events. `written` always
 * receives the event count.
 *
 * # Safety
 * `words` must hold `n_words` entries, `times` and `amplitudes` `capacity`.
 */
enum DtsStatus dts_delta_decode(const uint32_t *words,
                                size_t n_words,
                                uint32_t width_bits,
                                uint64_t *times,
                                int64_t *amplitudes,
                                size_t capacity,
                                size_t *written);

/**
 * Runs `trials` random networks through both the event engine and the
 * dense reference and stores the number of diverging trials in `failures`.
 *
 * # Safety
 * `failures` must be a valid pointer.
 */
enum DtsStatus dts_verify(uint64_t seed, uint64_t trials, uint64_t *failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DTSNN_H */
