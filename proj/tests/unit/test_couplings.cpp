#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mim/couplings.hpp"
#include "mim/quantum_coeffs.hpp"
#include "oracles.hpp"

using namespace mim;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kL = 100e-6;
constexpr double kAlpha = 1.5e-6;

const CrossingParams& crossing() {
  static const CrossingParams p = fit_crossing_params(kL, kAlpha, 128);
  return p;
}

// Mode pair at q from the brute-force root scan and quadrature norms.
std::array<ModeSolution, 2> oracle_pair(double q) {
  const double k0 = 2.0 * kPi * 128 / kL;
  auto roots = oracle::dense_roots(kL, kAlpha, q, k0 - kPi / kL, k0 + kPi / kL, 100000);
  REQUIRE(roots.size() == 2);
  return {oracle::quadrature_mode(kL, kAlpha, q, roots[0]),
          oracle::quadrature_mode(kL, kAlpha, q, roots[1])};
}

// int eps U_m dU_n/dq by central differences of quadrature overlaps.
double oracle_g(const ModeSolution& m, int n, double q, double h,
                const std::array<ModeSolution, 2>& centre) {
  auto plus = oracle_pair(q + h), minus = oracle_pair(q - h);
  for (auto* side : {&plus, &minus})
    for (int i = 0; i < 2; ++i)
      if (oracle::quadrature_overlap(centre[i], (*side)[i], 20000) < 0.0) {
        (*side)[i].left_amp = -(*side)[i].left_amp;
        (*side)[i].right_amp = -(*side)[i].right_amp;
      }
  return (oracle::quadrature_overlap(m, plus[n], 40000) -
          oracle::quadrature_overlap(m, minus[n], 40000)) / (2.0 * h);
}

}  // namespace

TEST_CASE("pair window isolates the two crossing modes") {
  auto w = pair_window(kL, kAlpha, 128);
  auto roots = oracle::dense_roots(kL, kAlpha, 0.0, w[0], w[1], 100000);
  CHECK(roots.size() == 2);
  auto pair = solve_pair(kL, kAlpha, 128, 4e-8);
  CHECK(pair[0].k < pair[1].k);
  CHECK_THROWS_AS(pair_window(kL, kAlpha, 0), ValidationError);
}

TEST_CASE("fitted crossing reproduces the solved splitting") {
  const auto& p = crossing();
  auto pair0 = solve_pair(kL, kAlpha, 128, 0.0);
  CHECK(2.0 * p.delta == doctest::Approx(pair0[1].omega() - pair0[0].omega()).epsilon(1e-12));
  CHECK(p.delta == doctest::Approx(p.delta_analytic).epsilon(0.02));
  CHECK(p.gamma == doctest::Approx(p.gamma_analytic).epsilon(0.02));
  CHECK(p.two_level);
  CHECK(p.gap_fit_residual < 1e-2);
  for (double q : {-9e-8, -3e-8, 2e-8, 7e-8}) {
    auto pr = solve_pair(kL, kAlpha, 128, q);
    CHECK(pr[0].omega() == doctest::Approx(p.omega_lower(q)).epsilon(1e-5));
    CHECK(pr[1].omega() == doctest::Approx(p.omega_upper(q)).epsilon(1e-5));
  }
}

TEST_CASE("gap shrinks as the membrane strengthens") {
  double prev = 1e300;
  for (double a : {1.6e-7, 3.1e-7, 8e-7, 1.7e-6}) {
    auto p = fit_crossing_params(kL, a, 128);
    CHECK(p.delta < prev);
    prev = p.delta;
  }
}

TEST_CASE("mixing angle and rotations") {
  const double D = 2.0;
  for (double G : {-50.0, -2.0, -1e-9, 0.0, 0.3, 2.0, 1e4}) {
    auto a = mixing_angle(G, D);
    CHECK(a.sin * a.sin + a.cos * a.cos == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mixing_identity_residual(G, D, 1e3) < 1e-12);
    std::array<cplx, 2> c{cplx{0.3, -0.1}, cplx{-0.7, 0.2}};
    auto back = diabatic_to_adiabatic(adiabatic_to_diabatic(c, a), a);
    CHECK(std::abs(back[0] - c[0]) < 1e-15);
    CHECK(std::abs(back[1] - c[1]) < 1e-15);
    auto d = adiabatic_to_diabatic(c, a);
    CHECK(std::norm(d[0]) + std::norm(d[1]) ==
          doctest::Approx(std::norm(c[0]) + std::norm(c[1])).epsilon(1e-15));
  }
  CHECK_THROWS_AS(mixing_angle(1.0, 0.0), ValidationError);
}

TEST_CASE("far from the crossing the lower mode is localized on the long side") {
  // q < 0 lengthens the right subcavity.
  const double q = -1e-7;
  auto pr = solve_pair(kL, kAlpha, 128, q);
  auto a = mixing_angle(crossing().detuning(q), crossing().delta);
  // Lower adiabatic mode maps mostly onto the right-localized diabatic state.
  auto d = adiabatic_to_diabatic({cplx{1.0, 0.0}, cplx{0.0, 0.0}}, a);
  CHECK(std::norm(d[1]) > 0.9);
  CHECK(std::abs(pr[0].right_amp) > 3.0 * std::abs(pr[0].left_amp));
}

TEST_CASE("numeric couplings against quadrature finite differences") {
  for (double q : {0.0, 2.5e-8}) {
    auto centre = solve_pair(kL, kAlpha, 128, q);
    auto s = coupling_sample(centre, 128, 1e-12);
    auto oc = oracle_pair(q);
    for (int i = 0; i < 2; ++i)
      if (oc[i].left_amp * centre[i].left_amp < 0.0) {
        oc[i].left_amp = -oc[i].left_amp;
        oc[i].right_amp = -oc[i].right_amp;
      }
    const double g12 = oracle_g(oc[0], 1, q, 1e-11, oc);
    INFO("q=" << q);
    CHECK(s.g[0][1] == doctest::Approx(g12).epsilon(1e-3));
    CHECK(s.antisymmetry < 1e-6);
    CHECK(std::abs(s.g[0][0]) < 1e-3 * std::abs(s.g[0][1]));
    CHECK(std::abs(s.g[1][1]) < 1e-3 * std::abs(s.g[0][1]));
  }
}

TEST_CASE("mixing-angle derivative tracks numeric g12 near the crossing") {
  const auto& p = crossing();
  auto table = CouplingTable(p, 1e-7, {401, 1e-12});
  for (double ratio : {0.0, 0.3, 0.7, 1.0}) {
    double q = ratio * p.delta / p.detuning_slope();
    double numeric = table.at(q).f[CouplingTable::kG12];
    CHECK(numeric < 0.0);
    CHECK(numeric == doctest::Approx(mixing_angle_g(p, q).g12).epsilon(0.02));
  }
}

TEST_CASE("table interpolation reproduces direct samples between nodes") {
  const auto& p = crossing();
  CouplingTable table(p, 1e-7, {801, 1e-12});
  CHECK(table.size() == 801);
  CHECK(table.q_min() == doctest::Approx(-1e-7));
  CHECK(table.q_max() == doctest::Approx(1e-7));
  CHECK(table.max_antisymmetry() < 1e-6);
  for (double q : {-8.7654e-8, -1.234e-9, 3.3333e-8, 9.1e-8}) {
    auto v = table.at(q);
    auto pr = solve_pair(kL, kAlpha, 128, q);
    // Sign of the table's modes follows the centre; align the direct pair.
    auto s = coupling_sample(pr, 128, 1e-12);
    const double sign = (s.g[0][1] * v.f[CouplingTable::kG12] > 0.0) ? 1.0 : -1.0;
    CHECK(v.f[CouplingTable::kG12] == doctest::Approx(sign * s.g[0][1]).epsilon(1e-5));
    // Cubic interpolation error scales as (node spacing / crossing width)^4 times delta.
    CHECK(std::abs(v.f[CouplingTable::kW1] + p.omega_av - pr[0].omega()) < 1e-7 * p.delta);
    CHECK(std::abs(v.f[CouplingTable::kW2] + p.omega_av - pr[1].omega()) < 1e-7 * p.delta);
    const double h = 1e-11;
    const double slope1 = (table.at(q + h).f[CouplingTable::kW1] - table.at(q - h).f[CouplingTable::kW1]) / (2 * h);
    CHECK(v.dw1_dq == doctest::Approx(slope1).epsilon(1e-4));
  }
  CHECK_THROWS_AS(CouplingTable(p, 1e-7, {3, 1e-12}), ValidationError);
}
