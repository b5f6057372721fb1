#ifndef DEEPSITH_H
#define DEEPSITH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  DS_STATUS_SHAPE_MISMATCH = 3,
  DS_STATUS_KERNEL_TOO_LONG = 4,
  DS_STATUS_UNSUPPORTED = 5,
  DS_STATUS_DIVERGED = 6,
  DS_STATUS_IO = 7,
  DS_STATUS_CONFIG = 8,
  DS_STATUS_CHECKPOINT = 9,
  DS_STATUS_DATA = 10,
  DS_STATUS_PANIC = 11,
} DsStatus;

// A fixed SITH filter bank.
typedef struct DsFilterBank DsFilterBank;

// A DeepSITH network.
typedef struct DsNet DsNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call into the library from this thread.
const char *ds_last_error(void);

// Library version, static storage.
const char *ds_version(void);

// Fills `out[0..count]` with the geometric grid from `tau_min` to `tau_max`.
//
// # Safety
// `out` must point to `out_len` writable doubles.
enum DsStatus ds_geometric_taus(double tau_min,
                                double tau_max,
                                uintptr_t count,
                                double *out,
                                uintptr_t out_len);

// Sharpness chosen by the k scan for the given grid.
//
// # Safety
// `k_out` must be writable.
enum DsStatus ds_select_k(double tau_min,
                          double tau_max,
                          uintptr_t n_taus,
                          uint32_t k_max,
                          uint32_t *k_out);

// Builds a filter bank with unit time step and default truncation.
//
// # Safety
// `bank_out` must be writable; the handle is released with
// [`ds_filterbank_free`].
enum DsStatus ds_filterbank_new(double tau_min,
                                double tau_max,
                                uintptr_t n_taus,
                                uint32_t k,
                                struct DsFilterBank **bank_out);

// # Safety
// `bank` must come from [`ds_filterbank_new`] and not be used afterwards.
// Null is accepted.
void ds_filterbank_free(struct DsFilterBank *bank);

// Number of filters; 0 for a null handle.
//
// # Safety
// `bank` must be a live handle or null.
uintptr_t ds_filterbank_num_taus(const struct DsFilterBank *bank);

// Taps in filter `index`.
//
// # Safety
// `bank` must be live and `len_out` writable.
enum DsStatus ds_filterbank_kernel_len(const struct DsFilterBank *bank,
                                       uintptr_t index,
                                       uintptr_t *len_out);

// Copies the taps of filter `index`.
//
// # Safety
// `bank` must be live; `out` must hold `out_len` doubles.
enum DsStatus ds_filterbank_kernel(const struct DsFilterBank *bank,
                                   uintptr_t index,
                                   double *out,
                                   uintptr_t out_len);

// Convolves a `steps x features` series with the bank. `out` receives
// `steps x features x n_taus` values.
//
// # Safety
// `input` must hold `steps * features` doubles and `out` `out_len`.
enum DsStatus ds_sith_forward(const struct DsFilterBank *bank,
                              const double *input,
                              uintptr_t steps,
                              uintptr_t features,
                              double *out,
                              uintptr_t out_len);

// Freshly initialized network from a built-in preset (`adding`,
// `mackey-glass`, `hateful8`, `smnist`, `psmnist`).
//
// # Safety
// `name` must be a NUL-terminated string and `net_out` writable.
enum DsStatus ds_net_from_preset(const char *name, uint64_t seed, struct DsNet **net_out);

// Freshly initialized network from a JSON network configuration (the
// `config` object of a checkpoint).
//
// # Safety
// `json` must be a NUL-terminated string and `net_out` writable.
enum DsStatus ds_net_from_json(const char *json, uint64_t seed, struct DsNet **net_out);

// # Safety
// `path` must be a NUL-terminated string and `net_out` writable.
enum DsStatus ds_net_load(const char *path, struct DsNet **net_out);

// # Safety
// `net` must be live and `path` a NUL-terminated string.
enum DsStatus ds_net_save(const struct DsNet *net, const char *path);

// # Safety
// `net` must come from a `ds_net_*` constructor and not be used afterwards.
// Null is accepted.
void ds_net_free(struct DsNet *net);

// Learnable scalars; 0 for a null handle.
//
// # Safety
// `net` must be live or null.
uintptr_t ds_net_parameter_count(const struct DsNet *net);

// Outputs per row; 0 for a null handle.
//
// # Safety
// `net` must be live or null.
uintptr_t ds_net_output_dim(const struct DsNet *net);

// Rows that [`ds_net_forward`] produces for a batch: `batch` for a
// final-step readout, `batch * steps` for every-step.
//
// # Safety
// `net` must be live or null.
uintptr_t ds_net_output_rows(const struct DsNet *net, uintptr_t batch, uintptr_t steps);

// Inference on a `batch x steps x features` input; `out` receives
// `rows x output_dim` values (see [`ds_net_output_rows`]).
//
// # Safety
// `input` must hold `batch * steps * features` doubles and `out` `out_len`.
enum DsStatus ds_net_forward(const struct DsNet *net,
                             const double *input,
                             uintptr_t batch,
                             uintptr_t steps,
                             uintptr_t features,
                             double *out,
                             uintptr_t out_len);

// One adding-problem sample: `input_out` gets `length x 2` values.
//
// # Safety
// `input_out` must hold `input_len` doubles; `target_out` must be writable.
enum DsStatus ds_gen_adding(uintptr_t length,
                            uint64_t seed,
                            double *input_out,
                            uintptr_t input_len,
                            double *target_out);

// One Hateful-8 series of `17 + noise_len` steps.
//
// # Safety
// `out` must hold `out_len` doubles.
enum DsStatus ds_gen_hateful8(uintptr_t noise_len,
                              uintptr_t class_,
                              uint64_t seed,
                              double *out,
                              uintptr_t out_len);

// A Mackey-Glass series with the default parameters.
//
// # Safety
// `out` must hold `length` doubles.
enum DsStatus ds_gen_mackey_glass(uintptr_t tau,
                                  uintptr_t length,
                                  uint64_t seed,
                                  double *out,
                                  uintptr_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEPSITH_H */
