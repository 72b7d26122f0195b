#pragma once

#include <string>
#include <vector>

#include "mim/couplings.hpp"

namespace mim {

struct GCoefficients {
  double g11 = 0.0, g22 = 0.0, g12 = 0.0, g21 = 0.0;  // 1/m
};

// Closed forms from the perfectly-localized-mode expansion, as published.
GCoefficients analytic_g(const CrossingParams& crossing, double q);

// Exact q-derivative of the mixing-angle expansion the closed forms start
// from: g12 = -g21 = -(dG/dq) Delta / (2 (Delta^2 + G^2)).
GCoefficients mixing_angle_g(const CrossingParams& crossing, double q);

enum class Basis { Adiabatic, Diabatic };

struct QuantumCoefficients {
  GCoefficients g;
  double dlnw1_dq = 0.0;  // expansion form, positive for q > 0
  double dlnw2_dq = 0.0;
  double dlnw1_dq_exact = 0.0;  // from the two-level frequencies directly
  double sqrt_w2_over_w1 = 1.0;
  double sqrt_w1_over_w2 = 1.0;
  double expansion_parameter = 0.0;  // sqrt(D^2 + G^2) / omega_av

  // Adiabatic basis: single-mode squeezing, transfer, two-mode squeezing.
  double adiabatic_squeezing = 0.0;
  double adiabatic_transfer = 0.0;
  double adiabatic_two_mode = 0.0;
  // Diabatic basis: transfer, two-mode squeezing, single-mode squeezing.
  double diabatic_transfer = 0.0;
  double diabatic_two_mode = 0.0;
  double diabatic_single_mode = 0.0;

  Basis basis = Basis::Adiabatic;
  double speed = 0.0;  // every operator term is multiplied by dq/dt
  std::vector<std::string> warnings;

  // The three prefactors of the chosen basis, each times the speed.
  std::array<double, 3> weighted() const;
};

QuantumCoefficients hamiltonian_coefficients(const CrossingParams& crossing,
                                             double q, double speed,
                                             Basis basis);

// Largest residual of the trigonometric identities linking the two
// coefficient sets, each scaled by its natural size.
double mixing_identity_residual(double detuning, double delta, double omega_av);

}  // namespace mim
