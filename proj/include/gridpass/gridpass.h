#ifndef GRIDPASS_H
#define GRIDPASS_H

/* C interface to the gridpass simulator and certification toolkit.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every call that can fail returns a gp_status; the message of the most recent
 * failure on the calling thread is available from gp_last_error(). Strings
 * returned through char** are owned by the caller and released with
 * gp_string_free(). Handles may be used from several threads as long as a
 * single handle is not mutated concurrently. */

#include <stddef.h>

#if defined(_WIN32)
#  if defined(GRIDPASS_BUILDING)
#    define GP_API __declspec(dllexport)
#  else
#    define GP_API __declspec(dllimport)
#  endif
#else
#  define GP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gp_status {
  GP_OK = 0,
  GP_ERR_INVALID_ARGUMENT = 1,
  GP_ERR_PARSE = 2,
  GP_ERR_INVALID_SCENARIO = 3,
  GP_ERR_TOPOLOGY = 4,
  GP_ERR_NOT_HURWITZ = 5,
  GP_ERR_NO_CONVERGENCE = 6,
  GP_ERR_NUMERIC = 7,
  GP_ERR_INFEASIBLE = 8,
  GP_ERR_NOT_SETTLED = 9,
  GP_ERR_IO = 10,
  GP_ERR_INTERNAL = 11
} gp_status;

typedef enum gp_format { GP_FORMAT_CSV = 0, GP_FORMAT_BINARY = 1 } gp_format;
typedef enum gp_report_style { GP_REPORT_TEXT = 0, GP_REPORT_JSON = 1 } gp_report_style;

typedef struct gp_scenario gp_scenario;
typedef struct gp_trajectory gp_trajectory;
typedef struct gp_report gp_report;

GP_API const char* gp_version(void);
GP_API const char* gp_status_name(gp_status status);
GP_API const char* gp_last_error(void);
GP_API void gp_string_free(char* s);

/* Scenarios */
GP_API size_t gp_builtin_count(void);
GP_API const char* gp_builtin_id(size_t index); /* NULL when out of range */
GP_API gp_status gp_scenario_builtin(const char* id, gp_scenario** out);
GP_API gp_status gp_scenario_parse(const char* text, const char* source_name, gp_scenario** out);
GP_API gp_status gp_scenario_load(const char* path_or_id, gp_scenario** out);
GP_API gp_status gp_scenario_emit(const gp_scenario* s, char** out);
/* Non-positive values keep the current setting. */
GP_API gp_status gp_scenario_set_timing(gp_scenario* s, double dt, double t_end);
GP_API gp_status gp_scenario_id(const gp_scenario* s, const char** out);
GP_API size_t gp_scenario_ibr_count(const gp_scenario* s);
GP_API const char* gp_scenario_ibr_name(const gp_scenario* s, size_t index);
GP_API void gp_scenario_free(gp_scenario* s);

/* L2 gain of an inverter's linearized fast subsystem at the scenario's pre-event
 * equilibrium, or of explicit row-major matrices A (n x n), B (n x m), C (p x n). */
GP_API gp_status gp_l2gain_ibr(const gp_scenario* s, const char* ibr, double* gamma, double* omega_peak);
GP_API gp_status gp_l2gain_matrices(int n, int m, int p, const double* A, const double* B, const double* C,
                                    double* gamma, double* omega_peak);

/* Interface design: beta = kappa*gamma*(1+margin), alpha = kappa/(beta*(1+margin)). */
GP_API gp_status gp_design_pei(double gamma, double kappa, double margin, double* alpha, double* beta,
                               double* sigma);
GP_API gp_status gp_verify_pei(double gamma, double alpha, double beta, double kappa, int* valid, double* sigma);

/* Simulation; divergence is recorded in the trajectory, not returned as an error. */
GP_API gp_status gp_simulate(const gp_scenario* s, gp_trajectory** out);
GP_API gp_status gp_trajectory_read(const char* path, gp_trajectory** out);
GP_API gp_status gp_trajectory_write(const gp_trajectory* t, const char* path, gp_format format);
GP_API size_t gp_trajectory_samples(const gp_trajectory* t);
GP_API size_t gp_trajectory_channel_count(const gp_trajectory* t);
GP_API const char* gp_trajectory_channel_name(const gp_trajectory* t, size_t index);
/* Pointers stay valid until the trajectory is freed. */
GP_API const double* gp_trajectory_time(const gp_trajectory* t);
GP_API gp_status gp_trajectory_channel(const gp_trajectory* t, const char* name, const double** data);
GP_API int gp_trajectory_diverged(const gp_trajectory* t, double* when);
GP_API void gp_trajectory_free(gp_trajectory* t);

/* Certification and run metrics */
GP_API gp_status gp_report_create(const gp_scenario* s, gp_report** out); /* empty, no verdicts */
GP_API gp_status gp_certify(const gp_scenario* s, gp_report** out);
/* Attaches growth, settling, energy and power-sharing metrics of a run. */
GP_API gp_status gp_report_analyze(gp_report* r, const gp_scenario* s, const gp_trajectory* t);
GP_API gp_status gp_report_add_artifact(gp_report* r, const char* path);
GP_API int gp_report_certified(const gp_report* r);
GP_API int gp_report_growth(const gp_report* r);
GP_API int gp_report_settled(const gp_report* r, double* settling_time);
GP_API gp_status gp_report_render(const gp_report* r, gp_report_style style, char** out);
GP_API void gp_report_free(gp_report* r);

#ifdef __cplusplus
}
#endif

#endif
