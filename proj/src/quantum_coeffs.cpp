#include "mim/quantum_coeffs.hpp"

#include <algorithm>
#include <cmath>

namespace mim {

GCoefficients analytic_g(const CrossingParams& p, double q) {
  const double G = p.detuning(q), D = p.delta;
  const double r2 = D * D + G * G;
  GCoefficients g;
  g.g12 = -p.detuning_slope() * G * D / (2.0 * r2 * std::sqrt(r2));
  g.g21 = -g.g12;
  return g;
}

GCoefficients mixing_angle_g(const CrossingParams& p, double q) {
  const double G = p.detuning(q), D = p.delta;
  GCoefficients g;
  g.g12 = -p.detuning_slope() * D / (2.0 * (D * D + G * G));
  g.g21 = -g.g12;
  return g;
}

std::array<double, 3> QuantumCoefficients::weighted() const {
  if (basis == Basis::Adiabatic)
    return {speed * adiabatic_squeezing, speed * adiabatic_transfer,
            speed * adiabatic_two_mode};
  return {speed * diabatic_transfer, speed * diabatic_two_mode,
          speed * diabatic_single_mode};
}

QuantumCoefficients hamiltonian_coefficients(const CrossingParams& p, double q,
                                             double speed, Basis basis) {
  if (!(p.delta > 0.0) || !(p.gamma > 0.0) || !(p.omega_av > 0.0) || !(p.length > 0.0))
    throw ValidationError("crossing parameters must be positive");
  QuantumCoefficients out;
  out.basis = basis;
  out.speed = speed;
  out.g = analytic_g(p, q);
  const double G = p.detuning(q), D = p.delta, w = p.omega_av, L = p.length;
  const double R = std::hypot(D, G);
  out.expansion_parameter = R / w;
  if (out.expansion_parameter > 0.01)
    out.warnings.push_back("splitting exceeds 1% of the mean frequency; expansions unreliable");

  out.dlnw1_dq = 4.0 * w * q / (L * L * R);
  out.dlnw2_dq = -out.dlnw1_dq;
  out.dlnw1_dq_exact = -G * p.detuning_slope() / (R * p.omega_lower(q));
  out.sqrt_w2_over_w1 = 1.0 + R / w;
  out.sqrt_w1_over_w2 = 1.0 - R / w;

  const double half_dlnw1 = 0.5 * out.dlnw1_dq;
  const double g21 = out.g.g21;
  out.adiabatic_squeezing = half_dlnw1;
  out.adiabatic_transfer = 2.0 * g21;
  out.adiabatic_two_mode = 2.0 * g21 * R / w;
  out.diabatic_transfer = 2.0 * g21;
  out.diabatic_two_mode = half_dlnw1 * 2.0 * D / R - 2.0 * g21 * G / w;
  out.diabatic_single_mode = half_dlnw1 * G / R + g21 * D / w;
  return out;
}

double mixing_identity_residual(double detuning, double delta, double omega_av) {
  MixingAngle a = mixing_angle(detuning, delta);
  const double R = std::hypot(delta, detuning);
  const double w1 = omega_av - R, w2 = omega_av + R;
  const double s = a.sin, c = a.cos;
  double res = 0.0;
  res = std::max(res, std::abs((c * c - s * s) - detuning / R));
  res = std::max(res, std::abs(c * s + delta / (2.0 * R)));
  res = std::max(res, std::abs(c * s * (w1 - w2) - delta) / delta);
  res = std::max(res, std::abs(w2 * c * c + w1 * s * s - (omega_av + detuning)) / R);
  res = std::max(res, std::abs(s * s + c * c - 1.0));
  return res;
}

}  // namespace mim
