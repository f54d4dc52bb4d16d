#ifndef MTJ_SNN_H
#define MTJ_SNN_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MtjStatus {
  MTJ_STATUS_OK = 0,
  MTJ_STATUS_NULL_POINTER = 1,
  MTJ_STATUS_INVALID_ARGUMENT = 2,
  MTJ_STATUS_CONFIG = 3,
  MTJ_STATUS_PARSE = 4,
  MTJ_STATUS_IO = 5,
  MTJ_STATUS_PANIC = 6,
} MtjStatus;

// Opaque network handle.
typedef struct MtjNetwork MtjNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mtj_version(void);

// Message for the last failed call on this thread. Valid until the next
// failing call on the same thread.
const char *mtj_last_error_message(void);

// Network with default parameters and every synapse randomly P or AP.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum MtjStatus mtj_network_new_random(size_t n_out,
                                      size_t n_in,
                                      size_t replicas,
                                      uint64_t seed,
                                      struct MtjNetwork **out);

// Randomly initialized network from `key = value` config text applied
// over the defaults (`n_out`, `replicas`, `seed` and all model
// parameters; `theta0 = auto` means 1.0). `config_text` may be null.
//
// # Safety
// `config_text` must be null or a NUL-terminated string; `out` as above.
enum MtjStatus mtj_network_new_from_config(const char *config_text,
                                           size_t n_in,
                                           struct MtjNetwork **out);

// Release a handle. Null is ignored.
//
// # Safety
// `net` must be null or a handle not yet freed.
void mtj_network_free(struct MtjNetwork *net);

// # Safety
// `net` must be a live handle; output pointers must be valid or null.
enum MtjStatus mtj_network_dims(const struct MtjNetwork *net,
                                size_t *n_out,
                                size_t *n_in,
                                size_t *replicas);

// Program every replica of `row` to `pattern` (P where active).
//
// # Safety
// `pattern` must point to `len` readable bytes.
enum MtjStatus mtj_network_program_row(struct MtjNetwork *net,
                                       size_t row,
                                       const uint8_t *pattern,
                                       size_t len);

// Noise-free post-subtraction dendrite outputs, `n_out` values.
//
// # Safety
// `image` must point to `len` bytes and `outputs` to `outputs_len` doubles.
enum MtjStatus mtj_network_outputs(const struct MtjNetwork *net,
                                   const uint8_t *image,
                                   size_t len,
                                   double *outputs,
                                   size_t outputs_len);

// Present one image for up to `max_cycles` cycles. `winner` receives the
// firing neuron or -1 on timeout; `switched` the number of synapses that
// changed state. Output pointers may be null.
//
// # Safety
// `image` must point to `len` bytes; output pointers valid or null.
enum MtjStatus mtj_network_present(struct MtjNetwork *net,
                                   const uint8_t *image,
                                   size_t len,
                                   bool learn,
                                   size_t max_cycles,
                                   int64_t *winner,
                                   size_t *cycles,
                                   size_t *switched);

// Serialize to the snapshot format. Release the buffer with
// `mtj_bytes_free`.
//
// # Safety
// `bytes` and `len` must be valid for writes.
enum MtjStatus mtj_network_snapshot_save(const struct MtjNetwork *net,
                                         uint8_t **bytes,
                                         size_t *len);

// Restore a snapshot. Model parameters come from `config_text` (may be
// null for defaults); dimensions and state come from the snapshot.
//
// # Safety
// `bytes` must point to `len` readable bytes; see `mtj_network_new_from_config`.
enum MtjStatus mtj_network_snapshot_load(const uint8_t *bytes,
                                         size_t len,
                                         const char *config_text,
                                         struct MtjNetwork **out);

// Free a buffer from `mtj_network_snapshot_save`. Null is ignored.
//
// # Safety
// `bytes`/`len` must be exactly as returned and not yet freed.
void mtj_bytes_free(uint8_t *bytes, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTJ_SNN_H */
