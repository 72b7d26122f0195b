#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mim/dynamics.hpp"
#include "mim/quantum_coeffs.hpp"

namespace mim {

struct ScenarioSpec {
  std::string name = "sweep";

  double length = 100e-6;
  std::optional<double> alpha;
  std::optional<double> reflectivity;
  double wavelength = 785e-9;
  int pair = 128;

  std::optional<double> speed;
  std::optional<double> half_duration;
  double half_range = 1e-7;

  std::vector<Scheme> schemes{Scheme::ASOE};
  StateBasis initial_basis = StateBasis::Adiabatic;
  std::array<cplx, 2> initial_amplitudes{cplx{1.0, 0.0}, cplx{0.0, 0.0}};

  int asoe_steps_per_period = 40;
  int dsoe_steps_per_period = 40;
  int dfoe_steps_per_period = 400;
  int samples_per_beat = 50;
  bool diagonal_dsoe_start = false;
  CouplingTable::Options table;

  std::vector<double> scan_speeds;
  std::vector<double> scan_alphas;
  bool scan_sweeps = true;

  int spectrum_points = 201;
  double spectrum_half_range = 0.0;  // 0 -> a quarter wavelength of the pair
  int spectrum_pairs = 1;            // neighbouring pairs on each side

  int quantum_points = 101;
  double quantum_speed = 0.0;  // 0 -> sweep speed
  Basis quantum_basis = Basis::Adiabatic;  // basis of the speed-weighted columns

  void validate() const;
  double resolved_alpha() const;
  SweepTrajectory trajectory() const;
  IntegratorConfig integrator(Scheme s) const;
};

ScenarioSpec parse_scenario(const std::string& text);
ScenarioSpec load_scenario(const std::string& path);
// Sets one "section.key" entry on top of an already parsed text.
std::string scenario_with(const std::string& text, const std::string& key,
                          const std::string& value);

struct SweepRecord {
  double tau = 0.0;
  double q = 0.0;
  std::array<cplx, 2> adiabatic{};  // c_m with phases stripped (slow amplitudes)
  std::array<cplx, 2> diabatic{};   // a_L, a_R in the frame rotating at omega_av
  std::array<double, 2> mode_sq{};  // native-basis populations
  double energy = 0.0;
  double dE_over_E0 = 0.0;
  double pressure = 0.0;
  double pressure_mode_sum = 0.0;
  double work = 0.0;
  double work_mode_sum = 0.0;
};

struct SweepResult {
  Scheme scheme = Scheme::ASOE;
  double speed = 0.0;
  double alpha = 0.0;
  double initial_energy = 0.0;
  std::vector<SweepRecord> rows;
  double landau_zener = 0.0;
  double validity_center = 0.0;
  double validity_edge = 0.0;
  double work_residual = 0.0;           // max |dE - W| / E0, interference pressure
  double work_residual_mode_sum = 0.0;  // same with summed single-mode pressures
  double max_abs_dE = 0.0;              // max |dE| / E0
  std::vector<std::string> warnings;

  std::array<double, 2> final_adiabatic() const;
  std::array<double, 2> final_diabatic() const;
};

SweepResult run_sweep(const ScenarioSpec& spec, Scheme scheme, const SweepModel& model,
                      int steps_override = 0);
SweepModel model_for(const ScenarioSpec& spec, double alpha);

void write_sweep_csv(const std::string& path, const SweepResult& r);
std::string summary_json(const ScenarioSpec& spec, const SweepModel& model,
                         const SweepResult& r);

struct RunOptions {
  std::string out_dir = ".";
  int jobs = 1;
  bool seed_check = false;
};

// Each returns the files written. Failures remove what was written.
std::vector<std::string> run_scenario(const ScenarioSpec& spec, const RunOptions& opts);
std::vector<std::string> run_scan(const ScenarioSpec& spec, const RunOptions& opts);
std::vector<std::string> run_spectrum(const ScenarioSpec& spec, const RunOptions& opts);
std::vector<std::string> run_quantum(const ScenarioSpec& spec, const RunOptions& opts);

struct CompareMetrics {
  size_t rows = 0;
  double max_dE = 0.0;
  double rms_dE = 0.0;
  std::array<double, 2> max_adiabatic{};
  std::array<double, 2> max_diabatic{};
};

CompareMetrics compare_runs(const std::string& csv_a, const std::string& csv_b);
std::string compare_json(const CompareMetrics& m);

struct SeedCheck {
  Scheme scheme = Scheme::ASOE;
  double max_change = 0.0;  // over dE/E0, populations and work, relative to their scale
  double richardson_error = 0.0;
  bool pass = false;
};

SeedCheck seed_check(const ScenarioSpec& spec, Scheme scheme, const SweepModel& model,
                     double tolerance = 1e-6);

}  // namespace mim
