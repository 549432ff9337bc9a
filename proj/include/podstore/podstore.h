/* C interface to the pod store. Every call returns a ps_status; on failure
 * ps_last_error() describes it (thread-local, valid until the next call on
 * the same thread). Strings handed back through char** are owned by the
 * caller and released with ps_free. */
#ifndef PODSTORE_PODSTORE_H
#define PODSTORE_PODSTORE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PS_API __declspec(dllexport)
#else
#define PS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
  PS_OK = 0,
  PS_INVALID_ARGUMENT = 1,
  PS_UNKNOWN_VARIABLE = 2,
  PS_UNKNOWN_TIME_ID = 3,
  PS_UNKNOWN_POD_ID = 4,
  PS_PARSE_ERROR = 5,
  PS_PAGE_NOT_ALLOCATED = 6,
  PS_TOO_MANY_LOCAL_MEMBERS = 7,
  PS_MISSING_POD = 8,
  PS_MALFORMED_BYTES = 9,
  PS_UNRESOLVED_GLOBAL_ID = 10,
  PS_OVERLAPPING_PODS = 11,
  PS_TOO_LARGE = 12,
  PS_CAPACITY_TOO_SMALL = 13,
  PS_DUPLICATE_POD_ID = 14,
  PS_NOT_FOUND = 15,
  PS_MALFORMED_MANIFEST = 16,
  PS_IO_FAILURE = 17,
  PS_TYPE_MISMATCH = 18,
  PS_LOCALITY_VIOLATION = 19,
  PS_INTERNAL = 100
} ps_status;

typedef enum ps_format { PS_FORMAT_CSV = 0, PS_FORMAT_JSON = 1 } ps_format;

typedef struct ps_config {
  const char* backend;   /* "mem" or "dir" */
  const char* dir;       /* store root for "dir" */
  const char* optimizer; /* bundle-all, split-all, random, tbh, lga-0, lga-1, lga, exhaustive */
  double c_pod;
  int32_t max_pod_depth;
  uint32_t page_size;
  uint64_t thesaurus_bytes;
  int32_t async_save; /* nonzero: saves run on a worker thread */
  uint64_t seed;
  uint32_t pod_delay_us; /* injected per-pod delay, for testing */
} ps_config;

/* Opaque session: a namespace, a store and (optionally) an async engine. */
typedef struct ps_session ps_session;

PS_API const char* ps_last_error(void);
PS_API const char* ps_status_name(ps_status status);
PS_API void ps_free(void* p);

/* Fills defaults: mem backend, lga, c_pod 1200, depth 3, page size 1024,
 * 64 MiB thesaurus, sync, seed 0. */
PS_API void ps_config_default(ps_config* config);

PS_API ps_status ps_session_open(const ps_config* config, ps_session** out);
PS_API void ps_session_close(ps_session* session);

/* Runs one or more workload statements (script text, one per line). A
 * checkpoint statement saves; its time id is reported by ps_session_last_time. */
PS_API ps_status ps_session_exec(ps_session* session, const char* script);
PS_API ps_status ps_session_last_time(ps_session* session, uint64_t* time_id);
/* Waits for an in-flight async save. */
PS_API ps_status ps_session_join(ps_session* session);

/* Canonical serialization of the live namespace, or of load(names, t).
 * names is comma separated; empty means every variable. */
PS_API ps_status ps_session_serialize(ps_session* session, const char* names, uint8_t** bytes,
                                      size_t* len);
PS_API ps_status ps_session_load(ps_session* session, const char* names, uint64_t time_id,
                                 uint8_t** bytes, size_t* len);

/* Per-checkpoint metrics so far. */
PS_API ps_status ps_session_metrics(ps_session* session, ps_format format, char** out);

/* Replays a script in a fresh session and reports its metrics. */
PS_API ps_status ps_run_script(const ps_config* config, const char* script, ps_format format,
                               char** out);

/* Generated workloads as script text, entries separated by "# label\n" lines. */
PS_API ps_status ps_gen_mutation_sweep(double scale, uint64_t seed, char** out);
PS_API ps_status ps_gen_scale_sweep(int32_t include_large, char** out);

/* Sweeps replay every generated script under config. */
PS_API ps_status ps_sweep_mutation(const ps_config* config, double scale, ps_format format,
                                   char** out);
PS_API ps_status ps_sweep_scale(const ps_config* config, int32_t include_large, ps_format format,
                                char** out);

/* strategies: comma separated, empty for all; workload: "mutation" or "scale". */
PS_API ps_status ps_compare(const ps_config* config, const char* strategies, const char* workload,
                            double scale, char** out);

/* Oracle and property suites; one "PASS|FAIL name: detail" line per check. */
PS_API ps_status ps_verify(const ps_config* config, int32_t* all_passed, char** out);

#ifdef __cplusplus
}
#endif

#endif
