#include "mim/observables.hpp"

#include <cmath>
#include <numbers>

namespace mim {

MagneticModeProfile magnetic_profile(const ModeSolution& m) {
  return {m.k, m.left_amp * std::cos(m.k * m.cavity.left_length()),
          m.right_amp * std::cos(m.k * m.cavity.right_length())};
}

double field_energy(const std::array<cplx, 2>& a) {
  return kVacuumPermittivity * (std::norm(a[0]) + std::norm(a[1]));
}

double pressure_single_mode(const MagneticModeProfile& m, cplx amp) {
  return -0.5 * kVacuumPermittivity * std::norm(amp) *
         (m.face_right * m.face_right - m.face_left * m.face_left);
}

double pressure_single_mode(const ModeSolution& mode, cplx amp) {
  return pressure_single_mode(magnetic_profile(mode), amp);
}

double pressure_two_mode(const std::array<MagneticModeProfile, 2>& m,
                         const std::array<cplx, 2>& c, double phase12) {
  double diag = 0.0;
  for (int i = 0; i < 2; ++i)
    diag += std::norm(c[i]) *
            (m[i].face_right * m[i].face_right - m[i].face_left * m[i].face_left);
  double cross = 2.0 * std::real(std::conj(c[0]) * c[1] * std::polar(1.0, phase12)) *
                 (m[0].face_right * m[1].face_right - m[0].face_left * m[1].face_left);
  return -0.5 * kVacuumPermittivity * (diag + cross);
}

double pressure_two_mode(const std::array<ModeSolution, 2>& modes,
                         const std::array<cplx, 2>& c, double phase12) {
  return pressure_two_mode({magnetic_profile(modes[0]), magnetic_profile(modes[1])}, c,
                           phase12);
}

std::vector<double> work_done(const std::vector<double>& tau,
                              const std::vector<double>& p, double speed,
                              double half_duration) {
  if (tau.size() != p.size()) throw ValidationError("work needs matching series lengths");
  std::vector<double> w(tau.size(), 0.0);
  if (tau.size() < 2) return w;
  const double h = tau[1] - tau[0];
  if (!(h > 0.0)) throw ValidationError("work needs an increasing tau grid");
  const double span = tau.back() - tau.front();
  for (size_t i = 1; i < tau.size(); ++i) {
    double expect = tau.front() + span * static_cast<double>(i) / (tau.size() - 1);
    if (std::abs(tau[i] - expect) > 1e-9 * std::max(1.0, std::abs(span)))
      throw ValidationError("work needs a uniform tau grid");
  }
  const double scale = -speed * half_duration;
  double acc = 0.0;
  for (size_t i = 1; i < tau.size(); ++i) {
    acc += 0.5 * (p[i - 1] + p[i]) * (tau[i] - tau[i - 1]);
    w[i] = scale * acc;
  }
  return w;
}

double landau_zener_probability(double delta, double gamma, double speed) {
  if (!(delta >= 0.0) || !(gamma > 0.0) || !(speed > 0.0))
    throw ValidationError("Landau-Zener probability needs positive arguments");
  return std::exp(-std::numbers::pi * delta * delta / (2.0 * speed * std::sqrt(gamma)));
}

double validity_ratio(double delta, double gamma, double omega_av, double q,
                      double speed) {
  if (speed == 0.0 || !std::isfinite(speed))
    throw ValidationError("validity ratio needs a nonzero speed");
  const double dl = 2.0 * q;
  const double dl2 = dl * dl;
  const double d2 = delta * delta, w2 = omega_av * omega_av;
  double num = (gamma * gamma * dl2 * dl2 + d2 * d2 + w2 * w2) +
               6.0 * w2 * (d2 + gamma * dl2) + 2.0 * gamma * d2 * dl2;
  double rate = 2.0 * speed;
  return num / (gamma * rate * rate);
}

double relativistic_correction_ratio(double speed, double index) {
  if (!std::isfinite(speed) || speed < 0.0 || speed >= kSpeedOfLight)
    throw ValidationError("speed must lie in [0, c)");
  if (!std::isfinite(index) || index < 1.0)
    throw ValidationError("refractive index must be >= 1");
  return speed / kSpeedOfLight * (index * index - 1.0);
}

}  // namespace mim
