#ifndef SER_FFI_H
#define SER_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SerStatus {
  SER_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SER_STATUS_NULL = 1,
  SER_STATUS_INVALID = 2,
  SER_STATUS_IO = 3,
  /**
   * Malformed JSON, TOML or CSV input.
   */
  SER_STATUS_PARSE = 4,
  SER_STATUS_INSUFFICIENT = 5,
  /**
   * Input outside the function's domain (non-finite, return <= -1, ...).
   */
  SER_STATUS_DOMAIN = 6,
  /**
   * Numerical failure: singular design or diverged training.
   */
  SER_STATUS_NUMERIC = 7,
  SER_STATUS_TRANSPORT = 8,
  SER_STATUS_PANIC = 9,
} SerStatus;

/**
 * Loaded model checkpoint. Opaque to C.
 */
typedef struct SerCheckpoint SerCheckpoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string. Do not free.
 */
const char *ser_version(void);

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * Valid until the next call into this library from the same thread.
 */
const char *ser_last_error(void);

/**
 * # Safety
 * `s` is NULL or a string returned by this library that has not been freed.
 */
void ser_string_free(char *s);

/**
 * Runs one `ser` CLI invocation. `argv[0]` is the program name, as in `main`.
 * On success `*summary_path` receives the path of the summary JSON.
 *
 * # Safety
 * `argv` points at `argc` valid NUL-terminated strings; `summary_path` is writable.
 */
enum SerStatus ser_run(size_t argc, const char *const *argv, char **summary_path);

/**
 * Loads and validates a checkpoint file.
 *
 * # Safety
 * `path` is a valid NUL-terminated string; `out` is writable.
 */
enum SerStatus ser_checkpoint_load(const char *path, struct SerCheckpoint **out);

/**
 * # Safety
 * `ckpt` is NULL or a handle from [`ser_checkpoint_load`] that has not been freed.
 */
void ser_checkpoint_free(struct SerCheckpoint *ckpt);

/**
 * Mode, table sizes, model config and training span as a JSON object.
 *
 * # Safety
 * `ckpt` is a live handle; `out_json` is writable.
 */
enum SerStatus ser_checkpoint_info(const struct SerCheckpoint *ckpt, char **out_json);

/**
 * Predicts a JSON array of panel records (the objects of a panel file).
 * Tokens the checkpoint has not seen map to UNK. The result is a JSON array
 * of `{date, stock_id, prediction, realized}` in (date, stock) order.
 *
 * # Safety
 * `ckpt` is a live handle; `records_json` a valid NUL-terminated string;
 * `out_json` is writable.
 */
enum SerStatus ser_checkpoint_predict(const struct SerCheckpoint *ckpt,
                                      const char *records_json,
                                      char **out_json);

/**
 * Newey-West standard error of the mean of `x` with Bartlett weights.
 *
 * # Safety
 * `x` points at `len` doubles; `out` is writable.
 */
enum SerStatus ser_newey_west_se(const double *x, size_t len, size_t lags, double *out);

/**
 * Compounds 1 to 5 daily returns into one weekly return.
 *
 * # Safety
 * `daily` points at `len` doubles; `out` is writable.
 */
enum SerStatus ser_compound_weekly(const double *daily, size_t len, double *out);

/**
 * Top-minus-bottom quintile return for one cross-section. Ties in
 * `prediction` break on `stock_id`.
 *
 * # Safety
 * `stock_id`, `prediction` and `realized` each point at `n` elements; `out` is writable.
 */
enum SerStatus ser_quintile_long_short(const int64_t *stock_id,
                                       const double *prediction,
                                       const double *realized,
                                       size_t n,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SER_FFI_H */
