#include "mim/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mim {

namespace {

std::string num(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

void match_sign(ModeSolution& m, const ModeSolution& ref) {
  if (sl_overlap(m, ref) < 0.0) {
    m.left_amp = -m.left_amp;
    m.right_amp = -m.right_amp;
  }
}

// Local cubic (4-point Lagrange) weights and their t-derivatives.
void cubic_weights(double t, double w[4], double dw[4]) {
  const double a = t, b = t - 1.0, c = t - 2.0, d = t - 3.0;
  w[0] = -b * c * d / 6.0;
  w[1] = a * c * d / 2.0;
  w[2] = -a * b * d / 2.0;
  w[3] = a * b * c / 6.0;
  dw[0] = -(c * d + b * d + b * c) / 6.0;
  dw[1] = (c * d + a * d + a * c) / 2.0;
  dw[2] = -(b * d + a * d + a * b) / 2.0;
  dw[3] = (b * c + a * c + a * b) / 6.0;
}

}  // namespace

double CrossingParams::detuning(double q) const { return 2.0 * std::sqrt(gamma) * q; }

double CrossingParams::detuning_slope() const { return 2.0 * std::sqrt(gamma); }

double CrossingParams::half_splitting(double q) const {
  return std::hypot(delta, detuning(q));
}

std::array<double, 2> pair_window(double length, double alpha, int pair) {
  if (pair < 1) throw ValidationError("crossing index must be >= 1");
  CavityConfig{length, alpha, 0.0}.validate();
  const double fsr = std::numbers::pi / length;
  const double k0 = 2.0 * fsr * pair;
  return {k0 - fsr, k0 + fsr};
}

std::array<ModeSolution, 2> solve_pair(double length, double alpha, int pair,
                                       double q) {
  auto win = pair_window(length, alpha, pair);
  CavityConfig cav{length, alpha, q};
  SpectrumWindow s = solve_spectrum(cav, win[0], win[1]);
  auto& modes = s.modes;
  if (modes.size() < 2)
    throw NumericalError("crossing " + std::to_string(pair) + " not resolved at q=" +
                         num(q));
  if (modes.size() > 2) {
    const double k0 = 2.0 * std::numbers::pi * pair / length;
    const double center = k0 + std::atan(2.0 / (alpha * k0)) / length;
    std::sort(modes.begin(), modes.end(), [&](const auto& a, const auto& b) {
      return std::abs(a.k - center) < std::abs(b.k - center);
    });
    modes.resize(2);
    std::sort(modes.begin(), modes.end(),
              [](const auto& a, const auto& b) { return a.k < b.k; });
  }
  modes[0].index = 1;
  modes[1].index = 2;
  return {modes[0], modes[1]};
}

CrossingParams fit_crossing_params(double length, double alpha, int pair,
                                   const FitOptions& opts) {
  if (opts.points < 5) throw ValidationError("crossing fit needs >= 5 displacements");
  if (!(opts.q_range > 0.0) || 2.0 * opts.q_range >= length)
    throw ValidationError("fit range must be positive and inside the cavity");
  const double c = kSpeedOfLight;
  CrossingParams p;
  p.pair = pair;
  p.length = length;
  p.alpha = alpha;
  auto centre = solve_pair(length, alpha, pair, 0.0);
  const double w1 = centre[0].omega(), w2 = centre[1].omega();
  p.omega_av = 0.5 * (w1 + w2);
  p.delta = 0.5 * (w2 - w1);
  p.omega0 = 2.0 * c * pair * std::numbers::pi / length;
  p.delta_analytic = 2.0 * c * c / (p.omega0 * length * alpha);
  p.gamma_analytic = p.omega0 * p.omega0 / (length * length);

  std::vector<double> qs, lo, hi;
  const int half = (opts.points + 1) / 2;
  for (int j = 1; j <= half; ++j) {
    double q = opts.q_range * j / half;
    for (double s : {-1.0, 1.0}) {
      auto m = solve_pair(length, alpha, pair, s * q);
      qs.push_back(s * q);
      lo.push_back(m[0].omega());
      hi.push_back(m[1].omega());
    }
  }
  double num_sum = 0.0, den = 0.0;
  for (size_t i = 0; i < qs.size(); ++i) {
    double gap = hi[i] - lo[i];
    double q2 = qs[i] * qs[i];
    num_sum += q2 * (gap * gap - 4.0 * p.delta * p.delta);
    den += 16.0 * q2 * q2;
  }
  p.gamma = num_sum / den;
  if (!(p.gamma > 0.0)) throw NumericalError("crossing fit produced non-positive slope");

  double rss = 0.0, wres = 0.0;
  for (size_t i = 0; i < qs.size(); ++i) {
    double gap = hi[i] - lo[i];
    double model = 4.0 * p.delta * p.delta + 16.0 * p.gamma * qs[i] * qs[i];
    double r = (model - gap * gap) / (gap * gap);
    rss += r * r;
    wres = std::max(wres, std::abs(p.omega_lower(qs[i]) - lo[i]) / lo[i]);
    wres = std::max(wres, std::abs(p.omega_upper(qs[i]) - hi[i]) / hi[i]);
  }
  p.gap_fit_residual = std::sqrt(rss / static_cast<double>(qs.size()));
  p.frequency_residual = wres;
  p.two_level = p.gap_fit_residual < opts.two_level_threshold;
  return p;
}

MixingAngle mixing_angle(double detuning, double delta) {
  if (!std::isfinite(detuning) || !std::isfinite(delta) || delta <= 0.0)
    throw ValidationError("mixing angle needs finite detuning and positive gap");
  const double r = std::hypot(delta, detuning);
  double s2, c2;
  // Cancellation-free forms of 1/2 -/+ G/(2R).
  if (detuning >= 0.0) {
    s2 = delta * delta / (2.0 * r * (r + detuning));
    c2 = (r + detuning) / (2.0 * r);
  } else {
    s2 = (r - detuning) / (2.0 * r);
    c2 = delta * delta / (2.0 * r * (r - detuning));
  }
  return {-std::sqrt(s2), std::sqrt(c2)};
}

std::array<cplx, 2> adiabatic_to_diabatic(const std::array<cplx, 2>& c,
                                          const MixingAngle& a) {
  return {a.cos * c[0] - a.sin * c[1], a.sin * c[0] + a.cos * c[1]};
}

std::array<cplx, 2> diabatic_to_adiabatic(const std::array<cplx, 2>& d,
                                          const MixingAngle& a) {
  return {a.cos * d[0] + a.sin * d[1], -a.sin * d[0] + a.cos * d[1]};
}

CouplingSample coupling_sample(const std::array<ModeSolution, 2>& center,
                               int pair, double fd_step) {
  if (!(fd_step > 0.0)) throw ValidationError("finite-difference step must be positive");
  const CavityConfig& cav = center[0].cavity;
  CouplingSample s;
  s.q = cav.displacement;
  std::array<std::array<ModeSolution, 2>, 2> shifted;
  for (int side = 0; side < 2; ++side) {
    double q = cav.displacement + (side == 0 ? fd_step : -fd_step);
    shifted[side] = solve_pair(cav.length, cav.alpha, pair, q);
    for (int m = 0; m < 2; ++m) match_sign(shifted[side][m], center[m]);
  }
  const double h = fd_step;
  for (int m = 0; m < 2; ++m) {
    for (int n = 0; n < 2; ++n) {
      double plus = sl_overlap(center[m], shifted[0][n]);
      double minus = sl_overlap(center[m], shifted[1][n]);
      double mid = sl_overlap(center[m], center[n]);
      s.g[m][n] = (plus - minus) / (2.0 * h);
      s.h[m][n] = (plus - 2.0 * mid + minus) / (h * h);
    }
  }
  const double L1 = cav.left_length(), L2 = cav.right_length();
  for (int m = 0; m < 2; ++m) {
    const auto& u = center[m];
    s.k[m] = u.k;
    s.left_amp[m] = u.left_amp;
    s.right_amp[m] = u.right_amp;
    s.face_left[m] = u.left_amp * std::cos(u.k * L1);
    s.face_right[m] = u.right_amp * std::cos(u.k * L2);
  }
  double scale = std::abs(s.g[0][1]);
  s.antisymmetry = scale > 0.0 ? std::abs(s.g[0][1] + s.g[1][0]) / scale : 0.0;
  return s;
}

CouplingTable::CouplingTable(const CrossingParams& crossing, double half_range,
                             const Options& opts) {
  if (opts.grid_points < 4) throw ValidationError("coupling grid needs >= 4 points");
  if (!(half_range > 0.0)) throw ValidationError("coupling grid range must be positive");
  n_ = opts.grid_points;
  q0_ = -half_range;
  step_ = 2.0 * half_range / static_cast<double>(n_ - 1);
  const double L = crossing.length, alpha = crossing.alpha;
  const int pair = crossing.pair;

  std::vector<std::array<ModeSolution, 2>> modes(n_);
  const int mid = (n_ - 1) / 2;
  auto q_at = [&](int i) { return q0_ + step_ * static_cast<double>(i); };
  modes[mid] = solve_pair(L, alpha, pair, q_at(mid));
  for (int i = mid + 1; i < n_; ++i) {
    modes[i] = solve_pair(L, alpha, pair, q_at(i));
    for (int m = 0; m < 2; ++m) match_sign(modes[i][m], modes[i - 1][m]);
  }
  for (int i = mid - 1; i >= 0; --i) {
    modes[i] = solve_pair(L, alpha, pair, q_at(i));
    for (int m = 0; m < 2; ++m) match_sign(modes[i][m], modes[i + 1][m]);
  }

  rows_.resize(n_);
  samples_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    CouplingSample s = coupling_sample(modes[i], pair, opts.fd_step);
    samples_[i] = s;
    max_antisym_ = std::max(max_antisym_, s.antisymmetry);
    auto& r = rows_[i];
    r[kG11] = s.g[0][0];
    r[kG12] = s.g[0][1];
    r[kG21] = s.g[1][0];
    r[kG22] = s.g[1][1];
    r[kH11] = s.h[0][0];
    r[kH12] = s.h[0][1];
    r[kH21] = s.h[1][0];
    r[kH22] = s.h[1][1];
    r[kW1] = kSpeedOfLight * s.k[0] - crossing.omega_av;
    r[kW2] = kSpeedOfLight * s.k[1] - crossing.omega_av;
    r[kFaceL1] = s.face_left[0];
    r[kFaceL2] = s.face_left[1];
    r[kFaceR1] = s.face_right[0];
    r[kFaceR2] = s.face_right[1];
  }
  if (max_antisym_ > 1e-6)
    warnings_.push_back("coupling antisymmetry violated (" + num(max_antisym_) +
                        "); finite-difference step too large");
  const double kmax = samples_[mid].k[1];
  if (kmax * opts.fd_step < 1e-7)
    warnings_.push_back("finite-difference step small enough to lose precision to cancellation");
}

CouplingTable::Values CouplingTable::at(double q) const {
  double u = (q - q0_) / step_;
  int j = static_cast<int>(std::floor(u)) - 1;
  j = std::clamp(j, 0, n_ - 4);
  double w[4], dw[4];
  cubic_weights(u - j, w, dw);
  Values v{};
  for (int f = 0; f < kFieldCount; ++f) {
    v.f[f] = w[0] * rows_[j][f] + w[1] * rows_[j + 1][f] + w[2] * rows_[j + 2][f] +
             w[3] * rows_[j + 3][f];
  }
  auto deriv = [&](int f) {
    return (dw[0] * rows_[j][f] + dw[1] * rows_[j + 1][f] + dw[2] * rows_[j + 2][f] +
            dw[3] * rows_[j + 3][f]) / step_;
  };
  v.dw1_dq = deriv(kW1);
  v.dw2_dq = deriv(kW2);
  return v;
}

}  // namespace mim
