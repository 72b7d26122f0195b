#pragma once

#include <string>
#include <vector>

#include "mim/core.hpp"

namespace mim {

// Double cavity with a delta membrane held at x = 0. End mirrors sit at
// -left_length() and +right_length(); `displacement` is half the
// difference of the two subcavity lengths.
struct CavityConfig {
  double length = 0.0;        // m
  double alpha = 0.0;         // m
  double displacement = 0.0;  // m

  double left_length() const { return 0.5 * length + displacement; }
  double right_length() const { return 0.5 * length - displacement; }
  double length_difference() const { return 2.0 * displacement; }

  // Throws ValidationError unless L > 0, 0 < alpha <= 1 m, |2q| < L.
  void validate() const;
};

struct ModeSolution {
  int index = 0;
  double k = 0.0;           // 1/m
  double left_amp = 0.0;    // A, 1/sqrt(m)
  double right_amp = 0.0;   // B, 1/sqrt(m)
  CavityConfig cavity;

  double omega() const { return kSpeedOfLight * k; }
  double value(double x) const;  // throws outside [-L1, L2]
  double membrane_value() const;
  // Formula value without the domain check; used for displaced overlaps.
  double formula_value(double x) const;
};

struct SpectrumWindow {
  double k_min = 0.0;
  double k_max = 0.0;
  std::vector<ModeSolution> modes;
  std::vector<std::string> warnings;
};

struct SpectrumOptions {
  int points_per_fsr = 40;  // scan points per pi/L
};

double delta_membrane_reflectivity(double k, double alpha);
// Inverse of the reflectivity law at the given vacuum wavelength.
double alpha_for_reflectivity(double reflectivity, double wavelength);

// Cleared-denominator eigen-condition.
double eigen_residual(const CavityConfig& cavity, double k);
double residual_tolerance(double alpha, double k);

SpectrumWindow solve_spectrum(const CavityConfig& cavity, double k_min,
                              double k_max, const SpectrumOptions& opts = {});

// Builds a normalized mode at a known root (A > 0).
ModeSolution make_mode(const CavityConfig& cavity, double k, int index);

// Weighted overlap (1/eps0) int eps U_a U_b dx over a's cavity. `b` may
// belong to a slightly displaced cavity; its piecewise formula is then
// continued onto a's domain.
double sl_overlap(const ModeSolution& a, const ModeSolution& b);

// Re-solves at `next`, matching each predecessor by frequency continuity and
// fixing signs by positive overlap.
SpectrumWindow track_modes(const SpectrumWindow& previous,
                           const CavityConfig& next,
                           const SpectrumOptions& opts = {});

// int_a^b sin(p x + f1) sin(r x + f2) dx, stable for p ~ r.
double sine_product_integral(double p, double f1, double r, double f2,
                             double a, double b);

}  // namespace mim
