#ifndef MIM_MIM_H
#define MIM_MIM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define MIM_API __declspec(dllexport)
#else
#define MIM_API __attribute__((visibility("default")))
#endif

typedef enum mim_status {
  MIM_OK = 0,
  MIM_ERR_INTERNAL = 1,
  MIM_ERR_VALIDATION = 2,
  MIM_ERR_NUMERICAL = 3,
  MIM_ERR_IO = 4
} mim_status;

/* Message of the last failure on the calling thread; never NULL. */
MIM_API const char* mim_last_error(void);
MIM_API const char* mim_version(void);

/* ---- scenarios ---- */

typedef struct mim_scenario mim_scenario;

MIM_API mim_status mim_scenario_load(const char* path, mim_scenario** out);
MIM_API mim_status mim_scenario_parse(const char* text, mim_scenario** out);
/* key is "section.key", e.g. "sweep.speed". */
MIM_API mim_status mim_scenario_set(mim_scenario* s, const char* key, const char* value);
MIM_API void mim_scenario_free(mim_scenario* s);

typedef struct mim_run_options {
  const char* out_dir; /* NULL -> current directory */
  int jobs;            /* <= 0 -> 1 */
  int seed_check;      /* nonzero: also run the step-halving check */
} mim_run_options;

/* Each runner reports the written files through mim_outputs. */
typedef struct mim_outputs mim_outputs;
MIM_API size_t mim_outputs_count(const mim_outputs* o);
MIM_API const char* mim_outputs_path(const mim_outputs* o, size_t i);
MIM_API void mim_outputs_free(mim_outputs* o);

MIM_API mim_status mim_run_sweep(const mim_scenario* s, const mim_run_options* opts,
                                 mim_outputs** out);
MIM_API mim_status mim_scan(const mim_scenario* s, const mim_run_options* opts,
                            mim_outputs** out);
MIM_API mim_status mim_solve_spectrum(const mim_scenario* s, const mim_run_options* opts,
                                      mim_outputs** out);
MIM_API mim_status mim_quantum_coeffs(const mim_scenario* s, const mim_run_options* opts,
                                      mim_outputs** out);

typedef struct mim_compare_metrics {
  size_t rows;
  double max_dE;
  double rms_dE;
  double max_adiabatic[2];
  double max_diabatic[2];
} mim_compare_metrics;

/* json_path may be NULL. */
MIM_API mim_status mim_compare_csv(const char* csv_a, const char* csv_b,
                                   const char* json_path, mim_compare_metrics* out);

/* ---- cavity and spectrum ---- */

typedef struct mim_spectrum mim_spectrum;

MIM_API mim_status mim_solve_window(double length, double alpha, double displacement,
                                    double k_min, double k_max, mim_spectrum** out);
MIM_API size_t mim_spectrum_count(const mim_spectrum* s);
MIM_API mim_status mim_spectrum_mode(const mim_spectrum* s, size_t i, double* k,
                                     double* left_amp, double* right_amp);
MIM_API mim_status mim_spectrum_value(const mim_spectrum* s, size_t i, double x,
                                      double* value);
MIM_API size_t mim_spectrum_warning_count(const mim_spectrum* s);
MIM_API const char* mim_spectrum_warning(const mim_spectrum* s, size_t i);
MIM_API void mim_spectrum_free(mim_spectrum* s);

typedef struct mim_crossing {
  double omega_av;
  double delta;
  double gamma;
  double delta_closed_form;
  double gamma_closed_form;
  double gap_fit_residual;
  double frequency_residual;
  int two_level;
} mim_crossing;

MIM_API mim_status mim_fit_crossing(double length, double alpha, int pair, double q_range,
                                    mim_crossing* out);

MIM_API mim_status mim_reflectivity(double alpha, double wavelength, double* out);
MIM_API mim_status mim_alpha_for_reflectivity(double reflectivity, double wavelength,
                                              double* out);
MIM_API mim_status mim_landau_zener(double delta, double gamma, double speed, double* out);
MIM_API mim_status mim_validity_ratio(double delta, double gamma, double omega_av, double q,
                                      double speed, double* out);

#ifdef __cplusplus
}
#endif

#endif
