/* C interface to the netsp library. Every function returns a status code;
 * on failure netsp_last_error() describes the problem (thread-local, valid
 * until the next call on the same thread). Strings handed out through
 * `char**` parameters are owned by the caller and released with
 * netsp_free_string(). */
#ifndef NETSP_NETSP_H
#define NETSP_NETSP_H

#include <stddef.h>
#include <stdint.h>

#if defined(NETSP_BUILDING_LIBRARY)
#define NETSP_API __attribute__((visibility("default")))
#else
#define NETSP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum netsp_status {
  NETSP_OK = 0,
  NETSP_ERR_INPUT = 1,
  NETSP_ERR_VALIDITY = 2,
  NETSP_ERR_PARSE = 3,
  NETSP_ERR_SIZE = 4,
  NETSP_ERR_CONFIG = 5,
  NETSP_ERR_STATE = 6,
  NETSP_ERR_SHAPE = 7,
  NETSP_ERR_LOAD = 8,
  NETSP_ERR_DEGENERATE_AREA = 9,
  NETSP_ERR_IO = 10,
  NETSP_ERR_ARGUMENT = 11, /* null pointer or buffer too small */
  NETSP_ERR_INTERNAL = 12
} netsp_status;

NETSP_API const char* netsp_last_error(void);
/* Lower-case description such as "shape error"; never NULL. */
NETSP_API const char* netsp_status_name(netsp_status status);
NETSP_API void netsp_free_string(char* s);

/* ---- instances ---------------------------------------------------------- */

typedef struct netsp_instance netsp_instance;

/* `xy` holds n (x, y) pairs. `metric` is one of EUC2D_CONT, EUC2D_TSPLIB,
 * ATT_CONT, ATT_TSPLIB, HAVERSINE, GEO_TSPLIB. `id` may be NULL. */
NETSP_API netsp_status netsp_instance_create(const double* xy, size_t n, const char* metric,
                                             const char* id, netsp_instance** out);
NETSP_API netsp_status netsp_instance_load_tsplib(const char* path, netsp_instance** out);
NETSP_API void netsp_instance_free(netsp_instance* instance);
NETSP_API size_t netsp_instance_size(const netsp_instance* instance);
/* Copies the instance id into a new string. */
NETSP_API netsp_status netsp_instance_id(const netsp_instance* instance, char** out);

/* Reads a TSPLIB tour file into `order` (0-based, capacity `cap`). `*n` is set
 * to the tour size even when the buffer is too small (NETSP_ERR_ARGUMENT). */
NETSP_API netsp_status netsp_load_tour(const char* path, int* order, size_t cap, size_t* n);

NETSP_API netsp_status netsp_tour_length(const netsp_instance* instance, const int* order,
                                         size_t n, double* length);

/* Runs a named method (nn, nearest-insertion, ..., held-karp, brute-force).
 * `order` must hold netsp_instance_size() entries. */
NETSP_API netsp_status netsp_solve(const netsp_instance* instance, const char* method,
                                   int* order, double* length);

/* NETSP_OK when `method` is a known method or model:<path>. */
NETSP_API netsp_status netsp_validate_method(const char* method);
/* NETSP_OK when `oracle` is held-karp, fixture or none. */
NETSP_API netsp_status netsp_validate_oracle(const char* oracle);

/* form: "A" or "B"; area: "bbox" or "hull". */
NETSP_API netsp_status netsp_hardness(const netsp_instance* instance, double tour_len,
                                      const char* form, const char* area, double* indicator,
                                      double* rank);

/* ---- datasets ----------------------------------------------------------- */

NETSP_API netsp_status netsp_generate(size_t n, size_t count, uint64_t seed,
                                      const char* out_path);

/* oracle: BRUTE, HELD_KARP, HEURISTIC_BEST or EXTERNAL (case-insensitive,
 * '-' accepted for '_'). `sidecar` is required for EXTERNAL, else NULL. */
NETSP_API netsp_status netsp_label(const char* in_path, const char* oracle, unsigned restarts,
                                   uint64_t seed, const char* sidecar, const char* out_path);

/* ---- model -------------------------------------------------------------- */

typedef void (*netsp_progress_fn)(long step, double lr, double loss, void* user);

/* Trains on a labeled dataset. `config_path` may be NULL for defaults.
 * Non-negative `max_steps` / positive `epochs` override the config. */
NETSP_API netsp_status netsp_train(const char* data_path, const char* config_path,
                                   long max_steps, int epochs, const char* checkpoint_out,
                                   const char* log_out, netsp_progress_fn progress, void* user);

typedef struct netsp_model netsp_model;

NETSP_API netsp_status netsp_model_load(const char* path, netsp_model** out);
NETSP_API void netsp_model_free(netsp_model* model);
NETSP_API netsp_status netsp_model_decode(const netsp_model* model,
                                          const netsp_instance* instance, int* order);

/* Writes a JSON report {trials, entries, max_rel_error, worst_tensor,
 * per_tensor}. */
NETSP_API netsp_status netsp_grad_check(int trials, size_t n, int hidden_dim, int glimpses,
                                        int kernel_width, uint64_t seed, char** report_json);

/* ---- evaluation --------------------------------------------------------- */

/* Exactly one of `data_path` (JSONL instances) and `tsplib_dir` is set.
 * `methods` is comma separated. Any output pointer may be NULL. */
NETSP_API netsp_status netsp_evaluate(const char* data_path, const char* tsplib_dir,
                                      const char* methods, const char* oracle,
                                      int measure_time, char** records_csv, char** table_csv,
                                      char** table_text);

/* One line per fixture ("name length OK" or "name length FAIL: detail").
 * `all_ok` is set to 1 when every fixture passed. */
NETSP_API netsp_status netsp_tsplib_check(const char* dir, char** report, int* all_ok);

#ifdef __cplusplus
}
#endif

#endif /* NETSP_NETSP_H */
