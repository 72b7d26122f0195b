#include "mim/modes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mim {

namespace {

bool finite(double x) { return std::isfinite(x); }

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

// int_a^b cos(d x + phi) dx
double cos_integral(double d, double phi, double a, double b) {
  double w = b - a;
  return w * std::cos(d * 0.5 * (a + b) + phi) * sinc(0.5 * d * w);
}

double bisect(const CavityConfig& cav, double a, double b, double fa) {
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    double fm = eigen_residual(cav, m);
    if (fm == 0.0) return m;
    if (sign_of(fm) == sign_of(fa)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  double fb = eigen_residual(cav, b);
  return std::abs(fa) <= std::abs(fb) ? a : b;
}

// Golden-section minimum of s*f on [a, b].
double golden_min(const CavityConfig& cav, int s, double a, double b) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = s * eigen_residual(cav, x1), f2 = s * eigen_residual(cav, x2);
  for (int it = 0; it < 200 && (b - a) > 4.0 * std::numeric_limits<double>::epsilon() * b; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = s * eigen_residual(cav, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = s * eigen_residual(cav, x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

std::string fmt_k(double k) {
  std::ostringstream os;
  os.precision(12);
  os << k;
  return os.str();
}

}  // namespace

void CavityConfig::validate() const {
  if (!finite(length) || length <= 0.0)
    throw ValidationError("cavity length must be positive and finite");
  if (!finite(alpha) || alpha <= 0.0 || alpha > 1.0)
    throw ValidationError("membrane strength must lie in (0, 1] m");
  if (!finite(displacement) || std::abs(2.0 * displacement) >= length)
    throw ValidationError("membrane must sit strictly between the end mirrors");
}

double ModeSolution::formula_value(double x) const {
  if (x <= 0.0) return left_amp * std::sin(k * (x + cavity.left_length()));
  return right_amp * std::sin(k * (x - cavity.right_length()));
}

double ModeSolution::value(double x) const {
  if (!(x >= -cavity.left_length() && x <= cavity.right_length()))
    throw ValidationError("position outside the cavity");
  return formula_value(x);
}

double ModeSolution::membrane_value() const {
  return left_amp * std::sin(k * cavity.left_length());
}

double delta_membrane_reflectivity(double k, double alpha) {
  if (!finite(k) || !finite(alpha) || k < 0.0 || alpha < 0.0)
    throw ValidationError("reflectivity needs finite, non-negative k and alpha");
  double ka2 = k * k * alpha * alpha;
  return ka2 / (4.0 + ka2);
}

double alpha_for_reflectivity(double reflectivity, double wavelength) {
  if (!finite(reflectivity) || reflectivity <= 0.0 || reflectivity >= 1.0)
    throw ValidationError("reflectivity must lie in (0, 1)");
  if (!finite(wavelength) || wavelength <= 0.0)
    throw ValidationError("wavelength must be positive");
  double k = 2.0 * std::numbers::pi / wavelength;
  return 2.0 / k * std::sqrt(reflectivity / (1.0 - reflectivity));
}

double eigen_residual(const CavityConfig& cav, double k) {
  double diff = cav.left_length() - cav.right_length();
  return cav.alpha * k * (std::cos(k * diff) - std::cos(k * cav.length)) -
         2.0 * std::sin(k * cav.length);
}

double residual_tolerance(double alpha, double k) {
  return 1e-12 * (alpha * k * k + 2.0);
}

double sine_product_integral(double p, double f1, double r, double f2,
                             double a, double b) {
  return 0.5 * (cos_integral(p - r, f1 - f2, a, b) -
                cos_integral(p + r, f1 + f2, a, b));
}

ModeSolution make_mode(const CavityConfig& cav, double k, int index) {
  const double L1 = cav.left_length(), L2 = cav.right_length();
  const double s1 = std::sin(k * L1), c1 = std::cos(k * L1);
  const double s2 = std::sin(k * L2), c2 = std::cos(k * L2);
  double A = 1.0, B;
  // Continuity and the derivative jump both fix B at a root; use whichever
  // has the better-conditioned denominator.
  if (std::abs(s2) >= std::abs(c2))
    B = -A * s1 / s2;
  else
    B = A * (c1 - cav.alpha * k * s1) / c2;
  double left = 0.5 * L1 - std::sin(2.0 * k * L1) / (4.0 * k);
  double right = 0.5 * L2 - std::sin(2.0 * k * L2) / (4.0 * k);
  double u0 = A * s1;
  double norm = A * A * left + B * B * right + cav.alpha * u0 * u0;
  if (!(norm > 0.0) || !finite(norm))
    throw NumericalError("mode normalization failed at k=" + fmt_k(k));
  double scale = 1.0 / std::sqrt(norm);
  ModeSolution m;
  m.index = index;
  m.k = k;
  m.left_amp = A * scale;
  m.right_amp = B * scale;
  m.cavity = cav;
  return m;
}

double sl_overlap(const ModeSolution& a, const ModeSolution& b) {
  const CavityConfig& ca = a.cavity;
  const double L1 = ca.left_length(), L2 = ca.right_length();
  // Offset of b's subcavities relative to a's; b's left branch is
  // sin(k_b (u + d)) in u = x + L1, its right branch sin(k_b (w + d)) in
  // w = x - L2.
  const double d = b.cavity.displacement - ca.displacement;
  const double phase = b.k * d;
  double left = a.left_amp * b.left_amp *
                sine_product_integral(a.k, 0.0, b.k, phase, 0.0, L1);
  double right = a.right_amp * b.right_amp *
                 sine_product_integral(a.k, 0.0, b.k, phase, -L2, 0.0);
  double membrane = ca.alpha * a.membrane_value() * b.membrane_value();
  return left + right + membrane;
}

SpectrumWindow solve_spectrum(const CavityConfig& cav, double k_min,
                              double k_max, const SpectrumOptions& opts) {
  cav.validate();
  if (!finite(k_min) || !finite(k_max) || k_min <= 0.0 || k_max <= k_min)
    throw ValidationError("spectrum window must be positive and nondegenerate");
  if (opts.points_per_fsr < 2)
    throw ValidationError("scan needs at least 2 points per free spectral range");

  SpectrumWindow win;
  win.k_min = k_min;
  win.k_max = k_max;

  const double fsr = std::numbers::pi / cav.length;
  const long cells = std::max<long>(
      2, static_cast<long>(std::ceil((k_max - k_min) / (fsr / opts.points_per_fsr))));
  if (cells > 50'000'000)
    throw ValidationError("spectrum window too wide for the scan grid");
  const double dk = (k_max - k_min) / static_cast<double>(cells);

  std::vector<double> ks(cells + 1), fs(cells + 1);
  for (long i = 0; i <= cells; ++i) {
    ks[i] = (i == cells) ? k_max : k_min + dk * static_cast<double>(i);
    fs[i] = eigen_residual(cav, ks[i]);
  }

  std::vector<double> roots;
  for (long i = 0; i <= cells; ++i) {
    if (fs[i] == 0.0) roots.push_back(ks[i]);
  }
  for (long i = 0; i < cells; ++i) {
    if (fs[i] == 0.0 || fs[i + 1] == 0.0) continue;
    if (sign_of(fs[i]) != sign_of(fs[i + 1]))
      roots.push_back(bisect(cav, ks[i], ks[i + 1], fs[i]));
  }

  // A local minimum of |f| between same-signed neighbours can hide a
  // closely spaced root pair.
  for (long i = 1; i < cells; ++i) {
    int s = sign_of(fs[i]);
    if (s == 0 || sign_of(fs[i - 1]) != s || sign_of(fs[i + 1]) != s) continue;
    if (!(std::abs(fs[i]) < std::abs(fs[i - 1]) && std::abs(fs[i]) < std::abs(fs[i + 1])))
      continue;
    double kstar = golden_min(cav, s, ks[i - 1], ks[i + 1]);
    double fstar = eigen_residual(cav, kstar);
    if (sign_of(fstar) == -s) {
      roots.push_back(bisect(cav, ks[i - 1], kstar, fs[i - 1]));
      roots.push_back(bisect(cav, kstar, ks[i + 1], fstar));
    } else if (std::abs(fstar) <= residual_tolerance(cav.alpha, kstar)) {
      win.warnings.push_back("near-degenerate pair not separated near k=" +
                             fmt_k(kstar) + "; refine the scan grid");
    }
  }

  for (int edge = 0; edge < 2; ++edge) {
    double ke = edge == 0 ? k_min : k_max;
    if (std::abs(eigen_residual(cav, ke)) <= residual_tolerance(cav.alpha, ke))
      win.warnings.push_back("root on window edge at k=" + fmt_k(ke));
  }
  // Descending |f| into an edge may mean a pair straddles the boundary.
  if (cells >= 2) {
    if (sign_of(fs[0]) == sign_of(fs[1]) && std::abs(fs[0]) < std::abs(fs[1]) &&
        std::abs(fs[0]) < 1e-3 * (cav.alpha * k_min + 2.0))
      win.warnings.push_back("possible root just below window start");
    if (sign_of(fs[cells]) == sign_of(fs[cells - 1]) &&
        std::abs(fs[cells]) < std::abs(fs[cells - 1]) &&
        std::abs(fs[cells]) < 1e-3 * (cav.alpha * k_max + 2.0))
      win.warnings.push_back("possible root just above window end");
  }

  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());

  int idx = 0;
  for (double k : roots) {
    double f = eigen_residual(cav, k);
    if (std::abs(f) > residual_tolerance(cav.alpha, k))
      win.warnings.push_back("root at k=" + fmt_k(k) +
                             " did not reach the residual tolerance");
    win.modes.push_back(make_mode(cav, k, idx++));
  }
  return win;
}

SpectrumWindow track_modes(const SpectrumWindow& previous,
                           const CavityConfig& next,
                           const SpectrumOptions& opts) {
  SpectrumWindow out = solve_spectrum(next, previous.k_min, previous.k_max, opts);
  const auto& prev = previous.modes;
  std::vector<ModeSolution> matched;
  matched.reserve(prev.size());
  if (out.modes.size() == prev.size()) {
    matched = out.modes;
  } else {
    out.warnings.push_back("mode count changed while tracking; matching by nearest k");
    std::vector<bool> used(out.modes.size(), false);
    for (const auto& p : prev) {
      int best = -1;
      for (size_t j = 0; j < out.modes.size(); ++j) {
        if (used[j]) continue;
        if (best < 0 || std::abs(out.modes[j].k - p.k) < std::abs(out.modes[best].k - p.k))
          best = static_cast<int>(j);
      }
      if (best < 0) break;
      used[best] = true;
      matched.push_back(out.modes[best]);
    }
  }
  for (size_t i = 0; i < matched.size(); ++i) {
    ModeSolution& m = matched[i];
    m.index = prev[i].index;
    double ov = sl_overlap(m, prev[i]);
    if (ov < 0.0) {
      m.left_amp = -m.left_amp;
      m.right_amp = -m.right_amp;
      ov = -ov;
    }
    if (ov < 0.5)
      out.warnings.push_back("ambiguous tracking for mode " + std::to_string(m.index) +
                             " (overlap " + fmt_k(ov) + "); reduce the step");
  }
  out.modes = std::move(matched);
  return out;
}

}  // namespace mim
