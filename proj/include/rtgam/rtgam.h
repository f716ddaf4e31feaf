/*
 * rtgam C API.
 *
 * Every function returns an rtgam_status. On failure the thread-local message
 * returned by rtgam_last_error() describes the problem on a single line.
 * Handles are opaque and owned by the caller; release them with the matching
 * *_destroy function (passing NULL is a no-op).
 */
#ifndef RTGAM_RTGAM_H
#define RTGAM_RTGAM_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(RTGAM_BUILDING)
#    define RTGAM_API __declspec(dllexport)
#  else
#    define RTGAM_API __declspec(dllimport)
#  endif
#else
#  define RTGAM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rtgam_status {
  RTGAM_OK = 0,
  RTGAM_ERR_INVALID_ARGUMENT = 1,
  RTGAM_ERR_IO = 2,
  RTGAM_ERR_PARSE = 3,
  RTGAM_ERR_DATA = 4,
  RTGAM_ERR_NUMERIC = 5,
  RTGAM_ERR_INTERNAL = 6
} rtgam_status;

typedef struct rtgam_config rtgam_config;
typedef struct rtgam_panel rtgam_panel;
typedef struct rtgam_rt rtgam_rt;
typedef struct rtgam_model rtgam_model;

RTGAM_API const char* rtgam_version(void);
RTGAM_API const char* rtgam_last_error(void);
RTGAM_API const char* rtgam_status_name(rtgam_status status);

/* Configuration: `section.key = value` text. */
RTGAM_API rtgam_status rtgam_config_create(rtgam_config** out);
RTGAM_API rtgam_status rtgam_config_load(rtgam_config* config, const char* path);
RTGAM_API rtgam_status rtgam_config_set(rtgam_config* config, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated, truncated to size). Writes the
 * full length to *length when length is non-NULL. RTGAM_ERR_INVALID_ARGUMENT
 * when the key is absent. */
RTGAM_API rtgam_status rtgam_config_get(const rtgam_config* config, const char* key, char* buf,
                                        size_t size, size_t* length);
/* All entries as `key = value` lines in key order. Same buffer contract. */
RTGAM_API rtgam_status rtgam_config_dump(const rtgam_config* config, char* buf, size_t size,
                                         size_t* length);
RTGAM_API void rtgam_config_destroy(rtgam_config* config);

/* Panel: ingestion of the three source files, or a previously written panel. */
RTGAM_API rtgam_status rtgam_panel_ingest(const rtgam_config* config, const char* cases_path,
                                          const char* environment_path,
                                          const char* mobility_path,
                                          const char* diagnostics_path, const char* manifest,
                                          rtgam_panel** out);
RTGAM_API rtgam_status rtgam_panel_read(const char* path, rtgam_panel** out);
RTGAM_API rtgam_status rtgam_panel_write(const rtgam_panel* panel, const char* path,
                                         const char* manifest);
RTGAM_API size_t rtgam_panel_rows(const rtgam_panel* panel);
RTGAM_API size_t rtgam_panel_province_count(const rtgam_panel* panel);
RTGAM_API const char* rtgam_panel_province(const rtgam_panel* panel, size_t index);
RTGAM_API rtgam_status rtgam_panel_summary_write(const rtgam_panel* panel, const rtgam_rt* rt,
                                                 const char* path, const char* manifest);
RTGAM_API void rtgam_panel_destroy(rtgam_panel* panel);

/* Effective reproductive number. */
RTGAM_API rtgam_status rtgam_rt_estimate(const rtgam_panel* panel, const rtgam_config* config,
                                         rtgam_rt** out);
RTGAM_API rtgam_status rtgam_rt_read(const char* path, rtgam_rt** out);
RTGAM_API rtgam_status rtgam_rt_write(const rtgam_rt* rt, const char* path, const char* manifest);
RTGAM_API size_t rtgam_rt_series_count(const rtgam_rt* rt);
RTGAM_API void rtgam_rt_destroy(rtgam_rt* rt);

/* Additive model on log R_t. */
RTGAM_API rtgam_status rtgam_model_fit(const rtgam_panel* panel, const rtgam_rt* rt,
                                       const rtgam_config* config, rtgam_model** out);
RTGAM_API rtgam_status rtgam_model_read(const char* path, rtgam_model** out);
RTGAM_API rtgam_status rtgam_model_write(const rtgam_model* model, const char* path,
                                         const char* manifest);
RTGAM_API rtgam_status rtgam_model_summary_write(const rtgam_model* model, const char* path,
                                                 const char* manifest);
RTGAM_API size_t rtgam_model_term_count(const rtgam_model* model);
RTGAM_API const char* rtgam_model_term_name(const rtgam_model* model, size_t index);
RTGAM_API rtgam_status rtgam_model_adjusted_r2(const rtgam_model* model, double* out);
RTGAM_API rtgam_status rtgam_model_term_stats(const rtgam_model* model, size_t index,
                                              double* edf, double* lambda, double* p_value);
/* grid,effect,se,lo,hi for one term over `grid_size` evenly spaced points. */
RTGAM_API rtgam_status rtgam_model_effects_write(const rtgam_model* model, const char* term,
                                                 int grid_size, const char* path,
                                                 const char* manifest);
RTGAM_API void rtgam_model_destroy(rtgam_model* model);

/* Validation. */
RTGAM_API rtgam_status rtgam_cv_write(const rtgam_panel* panel, const rtgam_rt* rt,
                                      const rtgam_config* config, const char* path,
                                      const char* manifest);
/* Writes <out_dir>/<province>.csv (term,grid,effect,se,lo,hi) per fitted
 * province and, when diagnostics_path is non-NULL, the skipped provinces. The
 * number of files written is stored in *written when non-NULL. */
RTGAM_API rtgam_status rtgam_per_province_write(const rtgam_panel* panel, const rtgam_rt* rt,
                                                const rtgam_config* config, const char* out_dir,
                                                const char* diagnostics_path,
                                                const char* manifest, size_t* written);

/* Synthetic scenario: writes cases.csv, environment.csv, mobility.csv and
 * truth.csv into out_dir. */
RTGAM_API rtgam_status rtgam_simulate_write(const rtgam_config* config, const char* out_dir,
                                            const char* manifest);

#ifdef __cplusplus
}
#endif

#endif /* RTGAM_RTGAM_H */
