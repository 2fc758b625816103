/* C interface to the clip-parallel denoising runtime.
 *
 * Every function returns a status code; on anything but VINF_OK the message is
 * available from vinf_last_error() (thread-local, valid until the next failing
 * call on the same thread). Out-parameters may be NULL when the caller does
 * not want that value.
 */
#ifndef VINF_H
#define VINF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    VINF_OK = 0,
    VINF_ERR = 1,           /* unclassified failure */
    VINF_ERR_CONFIG = 2,    /* bad or inconsistent run configuration */
    VINF_ERR_TRANSPORT = 3, /* connection, handshake, or protocol failure */
    VINF_ERR_IO = 4,        /* file read/write failure */
    VINF_ERR_INVALID = 5,   /* bad argument, shape, or range */
};

const char* vinf_version(void);
const char* vinf_last_error(void);

/* ---- run configuration ------------------------------------------------- */

typedef struct vinf_config vinf_config;

int vinf_config_create(vinf_config** out);
void vinf_config_destroy(vinf_config* cfg);

/* key=value file; '#' comments; unknown keys are VINF_ERR_CONFIG. */
int vinf_config_load_file(vinf_config* cfg, const char* path);
int vinf_config_set(vinf_config* cfg, const char* key, const char* value);
int vinf_config_validate(const vinf_config* cfg);

/* FNV-1a over the canonical rendering; what TCP peers compare on connect. */
int vinf_config_digest(const vinf_config* cfg, uint64_t* digest_out);
/* Canonical key-sorted text. Writes up to cap bytes (NUL-terminated when
 * cap > 0); *needed gets the full length excluding the terminator. */
int vinf_config_canonical(const vinf_config* cfg, char* buf, size_t cap, size_t* needed);

/* ---- execution ---------------------------------------------------------- */

/* Runs the configured denoising job. out_path (optional) gets the result
 * tensor dump; metrics_path (optional) gets appended metrics records. */
int vinf_run(const vinf_config* cfg, const char* out_path, const char* metrics_path,
             double* wall_seconds_out);

/* Compares two tensor dumps. VINF_OK when every element is within tolerance,
 * VINF_ERR when not (max diff and the count of exceeding elements are still
 * written), VINF_ERR_INVALID when the shapes differ. */
int vinf_verify(const char* dump_a, const char* dump_b, double tolerance, double* max_diff_out,
                uint64_t* mismatch_count_out);

/* Worker-count sweep against the sequential baseline, plus per-kind
 * sync-ablation rows. The formatted table goes to table_buf like
 * vinf_config_canonical; rows are also appended to metrics_path if given. */
int vinf_bench(const vinf_config* cfg, const uint32_t* sweep, size_t sweep_len,
               const char* metrics_path, char* table_buf, size_t table_cap,
               size_t* table_needed);

/* Simulates the per-layer synchronization schedule for the given worker count
 * under rendezvous semantics. literal_order != 0 checks the naive receive-
 * first pair ordering instead of the shipped one. A deadlock is a result,
 * not an error: *completed_out = 0 and cycle_buf gets the blocked cycle
 * ("0 -> 1 -> 0"). */
int vinf_validate_schedule(uint32_t workers, int literal_order, int* completed_out,
                           uint32_t* rounds_out, uint64_t* transfers_out, char* cycle_buf,
                           size_t cycle_cap);

#ifdef __cplusplus
}
#endif

#endif /* VINF_H */
