#include "mim/mim.h"

#include <cmath>
#include <fstream>
#include <new>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mim/couplings.hpp"
#include "mim/observables.hpp"
#include "mim/scenario.hpp"

struct mim_scenario {
  std::string text;
  mim::ScenarioSpec spec;
};

struct mim_outputs {
  std::vector<std::string> paths;
};

struct mim_spectrum {
  mim::SpectrumWindow window;
};

namespace {

thread_local std::string g_last_error;

mim_status fail(mim_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class F>
mim_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return MIM_OK;
  } catch (const mim::ValidationError& e) {
    return fail(MIM_ERR_VALIDATION, e.what());
  } catch (const mim::NumericalError& e) {
    return fail(MIM_ERR_NUMERICAL, e.what());
  } catch (const mim::IoError& e) {
    return fail(MIM_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MIM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MIM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MIM_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw mim::ValidationError(std::string(what) + " must not be NULL");
}

mim::RunOptions to_options(const mim_run_options* o) {
  mim::RunOptions r;
  if (!o) return r;
  if (o->out_dir) r.out_dir = o->out_dir;
  r.jobs = o->jobs > 0 ? o->jobs : 1;
  r.seed_check = o->seed_check != 0;
  return r;
}

template <class Runner>
mim_status run_with(const mim_scenario* s, const mim_run_options* opts, mim_outputs** out,
                    Runner runner) {
  return guarded([&] {
    require(s, "scenario");
    auto files = runner(s->spec, to_options(opts));
    if (out) *out = new mim_outputs{std::move(files)};
  });
}

}  // namespace

extern "C" {

const char* mim_last_error(void) { return g_last_error.c_str(); }

const char* mim_version(void) { return "0.1.0"; }

mim_status mim_scenario_parse(const char* text, mim_scenario** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    auto* s = new mim_scenario{text, {}};
    try {
      s->spec = mim::parse_scenario(s->text);
    } catch (...) {
      delete s;
      throw;
    }
    *out = s;
  });
}

mim_status mim_scenario_load(const char* path, mim_scenario** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mim::IoError(std::string("cannot read config '") + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    auto* s = new mim_scenario{buf.str(), {}};
    try {
      s->spec = mim::parse_scenario(s->text);
    } catch (...) {
      delete s;
      throw;
    }
    *out = s;
  });
}

mim_status mim_scenario_set(mim_scenario* s, const char* key, const char* value) {
  return guarded([&] {
    require(s, "scenario");
    require(key, "key");
    require(value, "value");
    std::string text = mim::scenario_with(s->text, key, value);
    mim::ScenarioSpec spec = mim::parse_scenario(text);
    s->text = std::move(text);
    s->spec = std::move(spec);
  });
}

void mim_scenario_free(mim_scenario* s) { delete s; }

size_t mim_outputs_count(const mim_outputs* o) { return o ? o->paths.size() : 0; }

const char* mim_outputs_path(const mim_outputs* o, size_t i) {
  if (!o || i >= o->paths.size()) return nullptr;
  return o->paths[i].c_str();
}

void mim_outputs_free(mim_outputs* o) { delete o; }

mim_status mim_run_sweep(const mim_scenario* s, const mim_run_options* opts, mim_outputs** out) {
  return run_with(s, opts, out, mim::run_scenario);
}

mim_status mim_scan(const mim_scenario* s, const mim_run_options* opts, mim_outputs** out) {
  return run_with(s, opts, out, mim::run_scan);
}

mim_status mim_solve_spectrum(const mim_scenario* s, const mim_run_options* opts,
                              mim_outputs** out) {
  return run_with(s, opts, out, mim::run_spectrum);
}

mim_status mim_quantum_coeffs(const mim_scenario* s, const mim_run_options* opts,
                              mim_outputs** out) {
  return run_with(s, opts, out, mim::run_quantum);
}

mim_status mim_compare_csv(const char* csv_a, const char* csv_b, const char* json_path,
                           mim_compare_metrics* out) {
  return guarded([&] {
    require(csv_a, "csv_a");
    require(csv_b, "csv_b");
    mim::CompareMetrics m = mim::compare_runs(csv_a, csv_b);
    if (json_path) {
      std::ofstream f(json_path, std::ios::binary | std::ios::trunc);
      if (!f) throw mim::IoError(std::string("cannot write '") + json_path + "'");
      f << mim::compare_json(m) << '\n';
      if (!f) throw mim::IoError(std::string("write failed for '") + json_path + "'");
    }
    if (out) {
      out->rows = m.rows;
      out->max_dE = m.max_dE;
      out->rms_dE = m.rms_dE;
      for (int i = 0; i < 2; ++i) {
        out->max_adiabatic[i] = m.max_adiabatic[i];
        out->max_diabatic[i] = m.max_diabatic[i];
      }
    }
  });
}

mim_status mim_solve_window(double length, double alpha, double displacement, double k_min,
                            double k_max, mim_spectrum** out) {
  return guarded([&] {
    require(out, "out");
    mim::CavityConfig c{length, alpha, displacement};
    *out = new mim_spectrum{mim::solve_spectrum(c, k_min, k_max)};
  });
}

size_t mim_spectrum_count(const mim_spectrum* s) { return s ? s->window.modes.size() : 0; }

mim_status mim_spectrum_mode(const mim_spectrum* s, size_t i, double* k, double* left_amp,
                             double* right_amp) {
  return guarded([&] {
    require(s, "spectrum");
    if (i >= s->window.modes.size()) throw mim::ValidationError("mode index out of range");
    const auto& m = s->window.modes[i];
    if (k) *k = m.k;
    if (left_amp) *left_amp = m.left_amp;
    if (right_amp) *right_amp = m.right_amp;
  });
}

mim_status mim_spectrum_value(const mim_spectrum* s, size_t i, double x, double* value) {
  return guarded([&] {
    require(s, "spectrum");
    require(value, "value");
    if (i >= s->window.modes.size()) throw mim::ValidationError("mode index out of range");
    *value = s->window.modes[i].value(x);
  });
}

size_t mim_spectrum_warning_count(const mim_spectrum* s) {
  return s ? s->window.warnings.size() : 0;
}

const char* mim_spectrum_warning(const mim_spectrum* s, size_t i) {
  if (!s || i >= s->window.warnings.size()) return nullptr;
  return s->window.warnings[i].c_str();
}

void mim_spectrum_free(mim_spectrum* s) { delete s; }

mim_status mim_fit_crossing(double length, double alpha, int pair, double q_range,
                            mim_crossing* out) {
  return guarded([&] {
    require(out, "out");
    mim::FitOptions fo;
    if (q_range > 0.0) fo.q_range = q_range;
    auto p = mim::fit_crossing_params(length, alpha, pair, fo);
    *out = {p.omega_av,       p.delta,           p.gamma,
            p.delta_analytic, p.gamma_analytic,  p.gap_fit_residual,
            p.frequency_residual, p.two_level ? 1 : 0};
  });
}

mim_status mim_reflectivity(double alpha, double wavelength, double* out) {
  return guarded([&] {
    require(out, "out");
    if (!(alpha >= 0.0) || !(wavelength > 0.0))
      throw mim::ValidationError("alpha must be >= 0 and wavelength positive");
    *out = mim::delta_membrane_reflectivity(2.0 * std::numbers::pi / wavelength, alpha);
  });
}

mim_status mim_alpha_for_reflectivity(double reflectivity, double wavelength, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = mim::alpha_for_reflectivity(reflectivity, wavelength);
  });
}

mim_status mim_landau_zener(double delta, double gamma, double speed, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = mim::landau_zener_probability(delta, gamma, speed);
  });
}

mim_status mim_validity_ratio(double delta, double gamma, double omega_av, double q,
                              double speed, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = mim::validity_ratio(delta, gamma, omega_av, q, speed);
  });
}

}  // extern "C"
