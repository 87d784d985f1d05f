#ifndef GEOBENCH_H
#define GEOBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum GbStatus {
  GB_STATUS_OK = 0,
  /*
   A stream has no more transactions.
   */
  GB_STATUS_DONE = 1,
  /*
   Invalid configuration or argument values.
   */
  GB_STATUS_CONFIG_ERROR = 2,
  /*
   The simulator detected an internal inconsistency.
   */
  GB_STATUS_ENGINE_ERROR = 3,
  /*
   A required pointer was null.
   */
  GB_STATUS_NULL_POINTER = 4,
  /*
   A string argument was not valid UTF-8.
   */
  GB_STATUS_INVALID_UTF8 = 5,
  /*
   The handle is not in a state that allows the call.
   */
  GB_STATUS_INVALID_STATE = 6,
  /*
   A file could not be read or written.
   */
  GB_STATUS_IO_ERROR = 7,
  /*
   A Rust panic was caught at the boundary.
   */
  GB_STATUS_PANIC = 8,
} GbStatus;

/*
 A configured single run and, once executed, its report.
 */
typedef struct GbRun GbRun;

/*
 A lazily generated transaction stream.
 */
typedef struct GbStream GbStream;

/*
 Inputs to the per-transaction cost model; rates are per hour and
 `throughput` is committed transactions per second.
 */
typedef struct GbCostInputs {
  double servers;
  double server_price_per_hour;
  double transfer_gb_per_hour;
  double transfer_price_per_gb;
  double stored_gb;
  double storage_price_per_gb_hour;
  double throughput;
} GbCostInputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *gb_last_error_message(void);

/*
 Library version as a static string.
 */
const char *gb_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed already.
 */
void gb_string_free(char *s);

/*
 Newline-separated names of the registered protocols.

 # Safety
 `out` must be a valid pointer to write to.
 */
enum GbStatus gb_protocols(char **out);

/*
 Dollar cost per committed transaction. Zero throughput yields infinity.

 # Safety
 `inputs` and `out` must be valid pointers.
 */
enum GbStatus gb_cost_per_txn(const struct GbCostInputs *inputs, double *out);

/*
 Creates a run from a JSON run config.

 # Safety
 `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GbStatus gb_run_new(const char *config_json, struct GbRun **out);

/*
 Executes the run to completion. A run executes at most once.

 # Safety
 `run` must be a live handle from [`gb_run_new`].
 */
enum GbStatus gb_run_execute(struct GbRun *run);

/*
 Committed transactions per second over the measurement window.

 # Safety
 `run` must be a live handle and `out` a valid pointer.
 */
enum GbStatus gb_run_committed_tps(const struct GbRun *run, double *out);

/*
 The full report as JSON; free with [`gb_string_free`].

 # Safety
 `run` must be a live handle and `out` a valid pointer.
 */
enum GbStatus gb_run_report_json(const struct GbRun *run, char **out);

/*
 # Safety
 `run` must be null or a handle from [`gb_run_new`] not yet freed.
 */
void gb_run_free(struct GbRun *run);

/*
 Creates the stream a run config would submit.

 # Safety
 `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GbStatus gb_stream_new(const char *config_json, struct GbStream **out);

/*
 Next transaction as one JSON stream record, or [`GbStatus::Done`].

 # Safety
 `stream` must be a live handle and `out` a valid pointer.
 */
enum GbStatus gb_stream_next(struct GbStream *stream, char **out);

/*
 # Safety
 `stream` must be null or a handle from [`gb_stream_new`] not yet freed.
 */
void gb_stream_free(struct GbStream *stream);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOBENCH_H */
