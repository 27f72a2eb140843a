/* C interface to the chorovessel library.
 *
 * Every function returns CHV_OK or an error code; chv_last_error() then holds a
 * message for the calling thread. Strings handed out through char** belong to
 * the caller and are released with chv_free(). Handles are opaque. */
#ifndef CHOROVESSEL_H
#define CHOROVESSEL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CHV_API __declspec(dllexport)
#else
#define CHV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define CHV_OK 0
#define CHV_ERR_INPUT 1
#define CHV_ERR_NOT_FOUND 2
#define CHV_ERR_CONFLICT 3
#define CHV_ERR_BACKEND 4
#define CHV_ERR_INTERNAL 5

CHV_API const char* chv_version(void);
CHV_API const char* chv_last_error(void);
CHV_API void chv_free(void* p);

/* Pipeline settings; json holds overrides (NULL or "" for defaults). */
typedef struct chv_config chv_config;
CHV_API int chv_config_create(const char* json, chv_config** out);
CHV_API int chv_config_set_seed(chv_config* cfg, uint64_t seed);
CHV_API int chv_config_set_threads(chv_config* cfg, int threads);
/* Replaces the segmenter with an external HTTP endpoint. */
CHV_API int chv_config_set_endpoint(chv_config* cfg, const char* url);
CHV_API int chv_config_to_json(const chv_config* cfg, char** out);
CHV_API void chv_config_destroy(chv_config* cfg);

/* image PNG -> probability file (VPRB1, optional) and mask PNG */
CHV_API int chv_preseg(const chv_config* cfg, const char* image_path, const char* prob_out, const char* mask_out);
/* mask PNG -> "vgraph/1" JSON */
CHV_API int chv_graph(const chv_config* cfg, const char* mask_path, const char* json_out);
/* one CSV row per mask, in the order given */
CHV_API int chv_metrics(const chv_config* cfg, const char* const* ids, const char* const* mask_paths, size_t n,
                        const char* csv_out);
/* prob_paths may be NULL; otherwise n probability files */
CHV_API int chv_eval(const chv_config* cfg, const char* const* ids, const char* const* pred_paths,
                     const char* const* truth_paths, const char* const* prob_paths, size_t n, const char* json_out,
                     const char* svg_out);
CHV_API int chv_assoc(const chv_config* cfg, const char* analysis_csv, const char* title, const char* csv_out,
                      const char* svg_out);
/* seed_override may be NULL to keep the spec's seed */
CHV_API int chv_synth(const char* spec_json, const uint64_t* seed_override, const char* out_dir);
CHV_API int chv_loop_sim(const chv_config* cfg, const char* project_dir, const char* json_out);

typedef struct chv_project chv_project;
CHV_API int chv_project_create(const char* dir, const char* id, const chv_config* cfg, chv_project** out);
CHV_API int chv_project_open(const char* dir, chv_project** out);
CHV_API int chv_project_add_image(chv_project* p, const char* id, const char* image_path, const char* cohort,
                                  const char* view, const char* truth_path);
CHV_API int chv_project_start_round(chv_project* p, const char* const* ids, size_t n);
CHV_API int chv_project_simulate(chv_project* p, double fidelity, uint64_t seed);
CHV_API int chv_project_finalize(chv_project* p, int round, char** report_json);
CHV_API int chv_project_state_json(chv_project* p, char** out);
CHV_API void chv_project_close(chv_project* p);

/* HTTP API over a project. port 0 picks a free port, reported in *bound_port. */
typedef struct chv_server chv_server;
CHV_API int chv_server_create(chv_project* p, const char* host, int port, chv_server** out, int* bound_port);
CHV_API int chv_server_run(chv_server* s); /* blocks until chv_server_stop */
CHV_API void chv_server_stop(chv_server* s);
CHV_API void chv_server_destroy(chv_server* s);

#ifdef __cplusplus
}
#endif

#endif
