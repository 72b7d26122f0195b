#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mim/couplings.hpp"

namespace mim {

enum class Scheme { ASOE, DSOE, DFOE };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

// Constant-velocity sweep from q = -L0 at t = -T0 to q = +L0 at t = +T0.
struct SweepTrajectory {
  double speed = 0.0;          // v, m/s
  double half_range = 0.0;     // L0, m
  double half_duration = 0.0;  // T0, s

  static SweepTrajectory from_speed(double speed, double half_range);
  static SweepTrajectory from_duration(double half_duration, double half_range);
  double position(double t) const { return speed * t; }
};

enum class StateBasis { Adiabatic, Diabatic };

struct FieldState {
  StateBasis basis = StateBasis::Adiabatic;
  double t = 0.0;
  std::array<cplx, 2> amp{};    // c_m (slow) or a_L, a_R (full)
  std::array<cplx, 2> deriv{};  // time derivative; unused for DFOE
  std::array<double, 2> phase{};  // accumulated int omega_m dt (adiabatic only)
};

struct IntegratorConfig {
  Scheme scheme = Scheme::ASOE;
  int steps_per_period = 40;
  int mode_window = 2;
  int samples_per_beat = 50;
  // Diabatic second-order start: ȧ = -i H a (matrix) or -i beta a (diagonal).
  bool diagonal_dsoe_start = false;

  void validate() const;
};

// Everything an integrator needs about the crossing, built once per
// (cavity, crossing, sweep range).
struct SweepModel {
  CrossingParams crossing;
  std::shared_ptr<const CouplingTable> table;  // required for ASOE and pressures
  bool fitted_frequencies = true;  // use the two-level hyperbola for omega_m(q)

  double omega(int m, double q) const;       // m = 0 lower, 1 upper
  double domega_dq(int m, double q) const;
};

SweepModel build_sweep_model(double length, double alpha, int pair,
                             double half_range,
                             const CouplingTable::Options& table_opts = {},
                             bool need_table = true);

// Uniform output grid shared by all schemes for one sweep.
struct OutputGrid {
  double t0 = 0.0;
  double t1 = 0.0;
  long intervals = 0;
  double dt() const { return (t1 - t0) / static_cast<double>(intervals); }
  double time(long i) const;
};

OutputGrid make_output_grid(const CrossingParams& crossing,
                            const SweepTrajectory& traj, int samples_per_beat);

// RK4 substeps per output interval for a scheme.
long substeps_per_output(const SweepModel& model, const SweepTrajectory& traj,
                         const OutputGrid& grid, const IntegratorConfig& cfg);

// Adiabatic start: derivatives from the stationary-prehistory condition.
FieldState initial_conditions(const std::array<cplx, 2>& c0,
                              const SweepModel& model,
                              const SweepTrajectory& traj);

// Diabatic start for the second-order diabatic scheme.
FieldState diabatic_initial_state(const std::array<cplx, 2>& a0,
                                  const SweepModel& model,
                                  const SweepTrajectory& traj,
                                  bool diagonal);

std::vector<FieldState> integrate_asoe(const FieldState& state0,
                                       const SweepModel& model,
                                       const SweepTrajectory& traj,
                                       const IntegratorConfig& cfg);

std::vector<FieldState> integrate_dsoe(const FieldState& state0,
                                       const SweepModel& model,
                                       const SweepTrajectory& traj,
                                       const IntegratorConfig& cfg);

std::vector<FieldState> integrate_dfoe(const std::array<cplx, 2>& a0,
                                       const SweepModel& model,
                                       const SweepTrajectory& traj,
                                       const IntegratorConfig& cfg);

// Full (phase-attached) coefficients of a state in the requested basis.
std::array<cplx, 2> full_amplitudes(const FieldState& s, const SweepModel& model,
                                    const SweepTrajectory& traj, StateBasis basis);

// Re-expresses a series in the other basis. Adiabatic output carries the
// accumulated phases of `model`'s frequencies starting from zero at the
// first sample; the round trip recovers the input.
std::vector<FieldState> convert_series(const std::vector<FieldState>& series,
                                       const SweepModel& model,
                                       const SweepTrajectory& traj,
                                       StateBasis target);

}  // namespace mim
