#pragma once

#include <array>
#include <vector>

#include "mim/modes.hpp"

namespace mim {

// Magnetic-field mode values at the two membrane faces.
struct MagneticModeProfile {
  double k = 0.0;
  double face_left = 0.0;   // A cos(k L1), at x = 0-
  double face_right = 0.0;  // B cos(k L2), at x = 0+
};

MagneticModeProfile magnetic_profile(const ModeSolution& mode);

// Energy per unit area (area fixed to 1 m^2).
double field_energy(const std::array<cplx, 2>& amplitudes);

// Force per area on the membrane; positive pushes toward +x.
double pressure_single_mode(const MagneticModeProfile& mode, cplx amplitude);
double pressure_single_mode(const ModeSolution& mode, cplx amplitude);

// Two-mode pressure including the interference term. `phase12` is
// theta_1 - theta_2; pass 0 when the amplitudes already carry their phases.
double pressure_two_mode(const std::array<MagneticModeProfile, 2>& modes,
                         const std::array<cplx, 2>& amplitudes, double phase12);
double pressure_two_mode(const std::array<ModeSolution, 2>& modes,
                         const std::array<cplx, 2>& amplitudes, double phase12);

// W(tau) = -v T0 int_{-1}^{tau} p dtau' on a uniform tau grid (trapezoid).
std::vector<double> work_done(const std::vector<double>& tau,
                              const std::vector<double>& pressure, double speed,
                              double half_duration);

double landau_zener_probability(double delta, double gamma, double speed);

// First-order validity ratio; q is the displacement (length difference 2q).
double validity_ratio(double delta, double gamma, double omega_av, double q,
                      double speed);

// Relative size of the moving-medium correction, (v/c)(n^2 - 1).
double relativistic_correction_ratio(double speed, double index);

}  // namespace mim
