#pragma once

#include <array>
#include <vector>

#include "mim/modes.hpp"

namespace mim {

struct CrossingParams {
  int pair = 0;
  double length = 0.0;
  double alpha = 0.0;
  double omega_av = 0.0;  // rad/s
  double delta = 0.0;     // half gap at q = 0, rad/s
  double gamma = 0.0;     // rad^2/s^2/m^2
  double omega0 = 0.0;    // 2 c n pi / L
  // Large-alpha closed forms, for cross-checking the fit.
  double delta_analytic = 0.0;
  double gamma_analytic = 0.0;
  double gap_fit_residual = 0.0;    // rms relative misfit of gap^2(q)
  double frequency_residual = 0.0;  // max |w_fit - w_solved| / w_solved
  bool two_level = true;

  // Detuning for displacement q (length difference 2q).
  double detuning(double q) const;
  double detuning_slope() const;  // d(detuning)/dq
  double half_splitting(double q) const;  // sqrt(delta^2 + detuning^2)
  double omega_lower(double q) const { return omega_av - half_splitting(q); }
  double omega_upper(double q) const { return omega_av + half_splitting(q); }
};

struct FitOptions {
  double q_range = 1e-7;  // fit displacements span [-q_range, q_range]
  int points = 8;         // nonzero displacements in the fit (>= 5)
  double two_level_threshold = 1e-2;
};

// Window that brackets exactly the two modes of crossing `pair` near q = 0.
std::array<double, 2> pair_window(double length, double alpha, int pair);

// Lower and upper mode of crossing `pair` at displacement q.
std::array<ModeSolution, 2> solve_pair(double length, double alpha, int pair,
                                       double q);

CrossingParams fit_crossing_params(double length, double alpha, int pair,
                                   const FitOptions& opts = {});

struct MixingAngle {
  double sin = 0.0;
  double cos = 1.0;
};

MixingAngle mixing_angle(double detuning, double delta);

// Amplitudes are ordered (c1, c2) adiabatic and (a_L, a_R) diabatic; both
// must be full coefficients with the dynamical phases attached.
std::array<cplx, 2> adiabatic_to_diabatic(const std::array<cplx, 2>& c,
                                          const MixingAngle& angle);
std::array<cplx, 2> diabatic_to_adiabatic(const std::array<cplx, 2>& a,
                                          const MixingAngle& angle);

// Mode-derivative overlaps at one displacement.
struct CouplingSample {
  double q = 0.0;
  std::array<double, 2> k{};
  std::array<double, 2> left_amp{};
  std::array<double, 2> right_amp{};
  std::array<double, 2> face_left{};   // A cos(k L1)
  std::array<double, 2> face_right{};  // B cos(k L2)
  double g[2][2] = {};  // int eps U_m dU_n/dq, 1/m
  double h[2][2] = {};  // int eps U_m d2U_n/dq2, 1/m^2
  double antisymmetry = 0.0;  // |g12 + g21| / |g12|
};

// `center` fixes the signs; modes at q +/- fd_step are sign-matched to it.
CouplingSample coupling_sample(const std::array<ModeSolution, 2>& center,
                               int pair, double fd_step);

// Coupling data cached on a uniform displacement grid, interpolated with
// local cubics.
class CouplingTable {
 public:
  enum Field {
    kG11, kG12, kG21, kG22,
    kH11, kH12, kH21, kH22,
    kW1, kW2,  // omega_m - omega_av
    kFaceL1, kFaceL2, kFaceR1, kFaceR2,
    kFieldCount
  };

  struct Options {
    int grid_points = 2001;
    double fd_step = 1e-12;
  };

  CouplingTable() = default;
  CouplingTable(const CrossingParams& crossing, double half_range,
                const Options& opts);

  struct Values {
    double f[kFieldCount];
    double dw1_dq;
    double dw2_dq;
  };

  Values at(double q) const;
  double q_min() const { return q0_; }
  double q_max() const { return q0_ + step_ * static_cast<double>(n_ - 1); }
  int size() const { return n_; }
  const CouplingSample& sample(int i) const { return samples_[i]; }
  double max_antisymmetry() const { return max_antisym_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  int n_ = 0;
  double q0_ = 0.0;
  double step_ = 0.0;
  std::vector<std::array<double, kFieldCount>> rows_;
  std::vector<CouplingSample> samples_;
  std::vector<std::string> warnings_;
  double max_antisym_ = 0.0;
};

}  // namespace mim
