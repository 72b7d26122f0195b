// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mim/observables.hpp"
#include "mim/quantum_coeffs.hpp"
#include "mim/scenario.hpp"

using namespace mim;
namespace fs = std::filesystem;

namespace tol {
constexpr double kReflectivity = 0.979, kReflectivityBand = 1e-3;
constexpr double kGapRelative = 0.10;
constexpr int kOrthoDraws = 1000;
constexpr double kOrtho = 1e-9;
constexpr double kLandauZenerRelative = 0.10;
constexpr double kSlowPopulation = 1e-3;
constexpr double kCurveShape = 0.05;
constexpr double kNonzeroCurve = 1e-6;
constexpr double kSchemeGap = 1e-4;
constexpr double kDiabaticGapLow = 1e-4, kDiabaticGapHigh = 1e-2;
constexpr double kWorkClosure = 1e-4;
constexpr double kModeSumContrast = 5.0;
constexpr double kScaling = 1e-12;
constexpr double kDiagonalG = 1e-3;
constexpr double kAnalyticG = 0.05;
constexpr double kLargeCavityTarget = 10.0, kLargeCavityBand = 0.30;
constexpr double kStepHalving = 1e-6;
}  // namespace tol

namespace {

constexpr double kL = 100e-6;
constexpr int kPair = 128;
constexpr double kAlpha98 = 1.5e-6;
constexpr double kC = 299792458.0;
constexpr double kPi = std::numbers::pi;

int failures = 0;

void report(int n, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const std::string& s) {
  std::printf("    %s\n", s.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... T>
std::string cat(const T&... parts) {
  std::ostringstream s;
  (s << ... << parts);
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Same measure as the library's step-halving check: populations over the
// initial norm, energy and work over the initial energy.
double halving_change(const SweepResult& a, const SweepResult& b) {
  if (a.rows.size() != b.rows.size()) return INFINITY;
  double d = 0.0;
  for (size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    d = std::max(d, std::abs(x.dE_over_E0 - y.dE_over_E0));
    d = std::max(d, std::abs(x.work - y.work) / a.initial_energy);
    for (int m = 0; m < 2; ++m) {
      d = std::max(d, std::abs(std::norm(x.adiabatic[m]) - std::norm(y.adiabatic[m])));
      d = std::max(d, std::abs(std::norm(x.diabatic[m]) - std::norm(y.diabatic[m])));
    }
  }
  return d;
}

ScenarioSpec sweep_spec(double alpha, double speed, Scheme scheme, StateBasis basis,
                        std::array<cplx, 2> amps) {
  ScenarioSpec s;
  s.alpha = alpha;
  s.speed = speed;
  s.schemes = {scheme};
  s.initial_basis = basis;
  s.initial_amplitudes = amps;
  s.validate();
  return s;
}

std::map<double, SweepModel> models;

const SweepModel& model(double alpha) {
  auto it = models.find(alpha);
  if (it == models.end()) {
    ScenarioSpec s;
    s.alpha = alpha;
    it = models.emplace(alpha, model_for(s, alpha)).first;
  }
  return it->second;
}

struct Run {
  SweepResult base, fine;
  double change = 0.0;
};

Run run_with_halving(const ScenarioSpec& s, Scheme scheme) {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepModel& m = model(s.resolved_alpha());
  Run r;
  r.base = run_sweep(s, scheme, m);
  r.fine = run_sweep(s, scheme, m, 2 * s.integrator(scheme).steps_per_period);
  r.change = halving_change(r.base, r.fine);
  note(cat(scheme_name(scheme), " v=", s.speed.value(), " m/s alpha=", s.resolved_alpha(),
           ": ", r.base.rows.size(), " samples, halving change ", fmt("%.2e", r.change), ", ",
           fmt("%.1f", seconds_since(t0)), " s"));
  return r;
}


// dE(tau) at arbitrary tau by linear interpolation on a uniform grid.
double energy_at(const SweepResult& r, double tau) {
  const auto& rows = r.rows;
  const double t0 = rows.front().tau, t1 = rows.back().tau;
  const double x = (tau - t0) / (t1 - t0) * static_cast<double>(rows.size() - 1);
  size_t i = std::min(static_cast<size_t>(std::max(0.0, std::floor(x))), rows.size() - 2);
  const double f = x - static_cast<double>(i);
  return (1.0 - f) * rows[i].dE_over_E0 + f * rows[i + 1].dE_over_E0;
}

std::vector<double> shipped_asoe_speeds(double alpha) {
  std::vector<double> speeds;
  for (const auto& entry : fs::directory_iterator(MIM_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    ScenarioSpec s = load_scenario(entry.path().string());
    if (std::find(s.schemes.begin(), s.schemes.end(), Scheme::ASOE) == s.schemes.end()) continue;
    if (std::abs(s.resolved_alpha() - alpha) > 1e-15) continue;
    std::vector<double> v = s.scan_speeds;
    if (s.speed) v.push_back(*s.speed);
    for (double x : v)
      if (std::find(speeds.begin(), speeds.end(), x) == speeds.end()) speeds.push_back(x);
  }
  std::sort(speeds.begin(), speeds.end());
  return speeds;
}

// ---------------------------------------------------------------------------

void reflectivity_anchor() {
  const double k = 2.0 * kPi / 785e-9;
  const double ak = 1.7e-6 * k;
  const double oracle = ak * ak / (4.0 + ak * ak);
  const double r = delta_membrane_reflectivity(k, 1.7e-6);
  const bool pass = std::abs(r - tol::kReflectivity) <= tol::kReflectivityBand &&
                    std::abs(r - oracle) < 1e-15;
  report(1, pass, cat("R=", fmt("%.6f", r), " target ", tol::kReflectivity, " +- ",
                      tol::kReflectivityBand));
}

void spectrum_fidelity() {
  const std::vector<double> alphas = {1.6e-7, 3.1e-7, 8.0e-7, 1.7e-6};
  bool decreasing = true, within = true;
  double previous_gap = INFINITY;
  for (double a : alphas) {
    CrossingParams p = fit_crossing_params(kL, a, kPair);
    auto pair = solve_pair(kL, a, kPair, 0.0);
    const double gap = kC * (pair[1].k - pair[0].k);
    const double omega0 = 2.0 * kC * kPair * kPi / kL;
    const double closed = 2.0 * kC * kC / (omega0 * kL * a);
    const double ratio = p.delta / closed;
    decreasing = decreasing && gap < previous_gap;
    previous_gap = gap;
    const bool ok = std::abs(ratio - 1.0) <= tol::kGapRelative;
    within = within && ok;
    note(cat("alpha=", a, " gap 2D=", fmt("%.6e", gap), " rad/s, fitted D/closed form=",
             fmt("%.4f", ratio), ok ? "" : "  (outside band)"));
  }
  report(2, decreasing && within,
         cat("gap strictly decreasing: ", decreasing ? "yes" : "no",
             "; fitted half-gap within ", tol::kGapRelative * 100, "% for all alphas: ",
             within ? "yes" : "no"));
}

void orthonormality() {
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> len(50e-6, 200e-6), logalpha(-8.0, -5.0), frac(-0.45, 0.45),
      u(0.0, 1.0);
  double worst = 0.0;
  int draws = 0;
  while (draws < tol::kOrthoDraws) {
    CavityConfig c;
    c.length = len(rng);
    c.alpha = std::pow(10.0, logalpha(rng));
    c.displacement = frac(rng) * c.length;
    const double k_center = 2.0 * kPi / 785e-9 * (0.5 + u(rng));
    const double k_span = 6.0 * kPi / c.length;
    SpectrumWindow w = solve_spectrum(c, k_center - 0.5 * k_span, k_center + 0.5 * k_span);
    if (w.modes.size() < 2) continue;
    std::uniform_int_distribution<size_t> pick(0, w.modes.size() - 1);
    const size_t i = pick(rng), j = pick(rng);
    const double expect = i == j ? 1.0 : 0.0;
    worst = std::max(worst, std::abs(sl_overlap(w.modes[i], w.modes[j]) - expect));
    ++draws;
  }
  report(3, worst <= tol::kOrtho,
         cat(draws, " draws, worst |<U_m,U_n> - delta_mn| = ", fmt("%.3e", worst)));
}

std::vector<Run> landau_zener_runs;

// The formula gives the adiabatic-to-adiabatic transition probability, equal
// to the diabatic survival only for an infinite sweep. With the sweep window
// ending near ten half-gaps the DFOE starts in the upper adiabatic state and
// the lower-state population is read at the end; the raw diabatic survival
// from a diabatic start is printed alongside.
void landau_zener() {
  const SweepModel& m = model(kAlpha98);
  const double D = m.crossing.delta, G = m.crossing.gamma;
  int ok = 0;
  double lo = 1.0, hi = 0.0;
  for (double target : {0.1, 0.5, 0.9}) {
    const double v = kPi * D * D / (2.0 * std::sqrt(G) * -std::log(target));
    ScenarioSpec s = sweep_spec(kAlpha98, v, Scheme::DFOE, StateBasis::Adiabatic,
                                {cplx{0.0, 0.0}, cplx{1.0, 0.0}});
    Run r = run_with_halving(s, Scheme::DFOE);
    ScenarioSpec raw = sweep_spec(kAlpha98, v, Scheme::DFOE, StateBasis::Diabatic,
                                  {cplx{1.0, 0.0}, cplx{0.0, 0.0}});
    const double survival = run_sweep(raw, Scheme::DFOE, m).final_diabatic()[0];
    const double oracle = std::exp(-kPi * D * D / (2.0 * v * std::sqrt(G)));
    const double transition = r.base.final_adiabatic()[0];
    const double rel = std::abs(transition - oracle) / oracle;
    if (rel <= tol::kLandauZenerRelative) ++ok;
    lo = std::min(lo, oracle);
    hi = std::max(hi, oracle);
    note(cat("  P_LZ=", fmt("%.4f", oracle), " transition=", fmt("%.4f", transition),
             " relative error ", fmt("%.2e", rel), "; diabatic start survival=",
             fmt("%.4f", survival)));
    landau_zener_runs.push_back(std::move(r));
  }
  report(4, ok >= 3 && lo <= 0.1 + 1e-9 && hi >= 0.9 - 1e-9,
         cat(ok, "/3 speeds within ", tol::kLandauZenerRelative * 100, "%, P_LZ spans [",
             fmt("%.3f", lo), ", ", fmt("%.3f", hi), "]"));
}

std::map<double, Run> asoe_runs;
std::vector<Run> dsoe_runs;

void slow_adiabatic() {
  auto speeds = shipped_asoe_speeds(kAlpha98);
  if (speeds.size() < 2) speeds = {50.0, 100.0};
  for (double v : speeds) {
    ScenarioSpec s = sweep_spec(kAlpha98, v, Scheme::ASOE, StateBasis::Adiabatic,
                                {cplx{1.0, 0.0}, cplx{0.0, 0.0}});
    asoe_runs.emplace(v, run_with_halving(s, Scheme::ASOE));
  }
  const SweepResult& slow = asoe_runs.at(speeds[0]).base;
  const SweepResult& next = asoe_runs.at(speeds[1]).base;

  double empty = 0.0;
  for (const auto& row : slow.rows) empty = std::max(empty, std::norm(row.adiabatic[1]));
  double peak = 0.0, asym = 0.0, between = 0.0;
  for (const auto& row : slow.rows) peak = std::max(peak, std::abs(row.dE_over_E0));
  for (const SweepResult* r : {&slow, &next}) {
    const size_t n = r->rows.size();
    for (size_t i = 0; i < n; ++i)
      asym = std::max(asym, std::abs(r->rows[i].dE_over_E0 - r->rows[n - 1 - i].dE_over_E0));
  }
  for (const auto& row : slow.rows)
    between = std::max(between, std::abs(row.dE_over_E0 - energy_at(next, row.tau)));
  const double sign_at_center = energy_at(slow, 0.0);
  note(cat("dE/E0 at tau=0: ", fmt("%.4e", sign_at_center), " (", speeds[0], " m/s), ",
           fmt("%.4e", energy_at(next, 0.0)), " (", speeds[1], " m/s)"));
  const bool pass = empty < tol::kSlowPopulation && peak > tol::kNonzeroCurve &&
                    asym <= tol::kCurveShape * peak && between <= tol::kCurveShape * peak;
  report(5, pass,
         cat("max |c2|^2=", fmt("%.2e", empty), ", peak |dE|/E0=", fmt("%.4e", peak),
             ", asymmetry/peak=", fmt("%.2e", asym / peak), ", ", speeds[0], " vs ", speeds[1],
             " m/s /peak=", fmt("%.2e", between / peak)));
}

void scheme_gaps() {
  ScenarioSpec s = sweep_spec(kAlpha98, 5000.0, Scheme::DSOE, StateBasis::Adiabatic,
                              {cplx{1.0, 0.0}, cplx{0.0, 0.0}});
  dsoe_runs.push_back(run_with_halving(s, Scheme::DSOE));
  if (!asoe_runs.count(5000.0)) {
    ScenarioSpec a = s;
    a.schemes = {Scheme::ASOE};
    asoe_runs.emplace(5000.0, run_with_halving(a, Scheme::ASOE));
  }
  const SweepResult& asoe = asoe_runs.at(5000.0).base;
  const SweepResult& dsoe = dsoe_runs.back().base;
  double gap = 0.0, diabatic = 0.0;
  for (size_t i = 0; i < dsoe.rows.size(); ++i) {
    gap = std::max(gap, std::abs(asoe.rows[i].dE_over_E0 - dsoe.rows[i].dE_over_E0));
    diabatic = std::max(diabatic, std::abs(dsoe.rows[i].dE_over_E0));
  }
  const bool pass = asoe.rows.size() == dsoe.rows.size() && gap <= tol::kSchemeGap &&
                    diabatic >= tol::kDiabaticGapLow && diabatic <= tol::kDiabaticGapHigh;
  report(6, pass,
         cat("max|dE_ASOE - dE_DSOE|/E0=", fmt("%.3e", gap), " (<= ", tol::kSchemeGap,
             "), max|dE_DSOE|/E0=", fmt("%.3e", diabatic), " (in [", tol::kDiabaticGapLow, ", ",
             tol::kDiabaticGapHigh, "])"));
}

void work_closure() {
  double worst = 0.0, worst_opposite = 0.0;
  for (const auto& [v, run] : asoe_runs) {
    const SweepResult& r = run.base;
    double opposite = 0.0, opposite_sum = 0.0;
    for (const auto& row : r.rows) {
      opposite = std::max(opposite, std::abs(row.dE_over_E0 + row.work / r.initial_energy));
      opposite_sum =
          std::max(opposite_sum, std::abs(row.dE_over_E0 + row.work_mode_sum / r.initial_energy));
    }
    worst = std::max(worst, r.work_residual);
    worst_opposite = std::max(worst_opposite, opposite);
    note(cat("v=", v, " m/s: max|dE-W|/E0=", fmt("%.3e", r.work_residual),
             " mode-sum ", fmt("%.3e", r.work_residual_mode_sum), "; max|dE+W|/E0=",
             fmt("%.3e", opposite), " mode-sum ", fmt("%.3e", opposite_sum)));
  }
  const SweepResult& ref = asoe_runs.at(5000.0).base;
  const double contrast = ref.work_residual_mode_sum / ref.work_residual;
  report(7, worst < tol::kWorkClosure && contrast >= tol::kModeSumContrast,
         cat("worst max|dE-W|/E0=", fmt("%.3e", worst), " (< ", tol::kWorkClosure,
             "), mode-sum/interference at 5000 m/s=", fmt("%.3f", contrast), " (>= ",
             tol::kModeSumContrast, "); diagnostic max|dE+W|/E0=", fmt("%.3e", worst_opposite)));
}

void validity_law() {
  const SweepModel& m = model(kAlpha98);
  const auto& p = m.crossing;
  double scaling = 0.0;
  for (double v : {50.0, 500.0, 5000.0, 20000.0}) {
    const double r1 = validity_ratio(p.delta, p.gamma, p.omega_av, 5e-8, v);
    const double r2 = validity_ratio(p.delta, p.gamma, p.omega_av, 5e-8, 2.0 * v);
    scaling = std::max(scaling, std::abs(r1 / r2 - 4.0) / 4.0);
  }
  const double omega = kC * 2.0 * kPi * kPair / kL;
  std::vector<double> r;
  std::vector<double> alphas;
  for (int i = 0; i < 10; ++i) alphas.push_back(2e-7 + 2e-7 * i);
  for (double a : alphas) {
    CrossingParams c = fit_crossing_params(kL, a, kPair);
    r.push_back(validity_ratio(c.delta, c.gamma, omega, 5e-8, 5000.0));
  }
  int negative = 0;
  double largest = -INFINITY;
  for (size_t i = 0; i + 1 < r.size(); ++i) {
    const double d = (r[i + 1] - r[i]) / (alphas[i + 1] - alphas[i]);
    if (d < 0.0) ++negative;
    largest = std::max(largest, d);
  }
  const int total = static_cast<int>(r.size()) - 1;
  report(8, scaling <= tol::kScaling && negative == total,
         cat("v^-2 scaling deviation ", fmt("%.1e", scaling), ", dr/dalpha < 0 on ", negative, "/",
             total, " intervals (largest ", fmt("%.3e", largest), " per m)"));
}

void quantum_anchors() {
  const SweepModel& m = model(kAlpha98);
  const auto& p = m.crossing;
  double diag = 0.0, analytic = 0.0;
  for (double ratio : {-5.0, -3.0, -1.5, -0.7, -0.2, 0.0, 0.3, 1.0, 2.0, 3.5, 5.0}) {
    const double q = ratio * p.delta / p.detuning_slope();
    auto pair = solve_pair(kL, kAlpha98, kPair, q);
    CouplingSample s = coupling_sample(pair, kPair, 1e-12);
    const double g12 = s.g[0][1];
    diag = std::max({diag, std::abs(s.g[0][0]) / std::abs(g12), std::abs(s.g[1][1]) / std::abs(g12)});
    const double closed = analytic_g(p, q).g12;
    const double rel = std::abs(closed - g12) / std::abs(g12);
    analytic = std::max(analytic, rel);
    note(cat("G/D=", ratio, ": numeric g12=", fmt("%.5e", g12), " closed form ", fmt("%.5e", closed),
             " mixing-angle form ", fmt("%.5e", mixing_angle_g(p, q).g12)));
  }
  CrossingParams t;
  t.length = 6.7e-2;
  t.omega_av = 1e15;
  t.delta = 2.0 * kPi * 1e9;
  t.gamma = t.omega_av * t.omega_av / (t.length * t.length);
  double large_cavity = 0.0;
  for (int i = 0; i <= 70; ++i) {
    const double q = 1e-7 * i * t.length;
    large_cavity = std::max(large_cavity, std::abs(hamiltonian_coefficients(t, q, 1.0, Basis::Adiabatic).dlnw1_dq));
  }
  const bool a = diag <= tol::kDiagonalG;
  const bool b = analytic <= tol::kAnalyticG;
  const bool c = std::abs(large_cavity - tol::kLargeCavityTarget) <= tol::kLargeCavityBand * tol::kLargeCavityTarget;
  report(9, a && b && c,
         cat("max|g_mm|/|g12|=", fmt("%.2e", diag), a ? " ok" : " FAIL",
             "; closed-form g12 worst relative error ", fmt("%.3f", analytic), b ? " ok" : " FAIL",
             "; max|dln(w1)/dq| up to q/L=7e-6: ", fmt("%.2f", large_cavity), " 1/m",
             c ? " ok" : " FAIL"));
}

void determinism() {
  double worst = 0.0;
  for (const auto& r : landau_zener_runs) {
    worst = std::max(worst, r.change);
    const double a = r.base.final_adiabatic()[0], b = r.fine.final_adiabatic()[0];
    worst = std::max(worst, std::abs(a - b) / a);
  }
  for (const auto& [v, r] : asoe_runs) {
    worst = std::max(worst, r.change);
    worst = std::max(worst, std::abs(r.base.work_residual - r.fine.work_residual));
  }
  for (const auto& r : dsoe_runs) worst = std::max(worst, r.change);

  const fs::path dir = fs::temp_directory_path() / "mim_acceptance_csv";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ScenarioSpec s = sweep_spec(kAlpha98, 5000.0, Scheme::ASOE, StateBasis::Adiabatic,
                              {cplx{1.0, 0.0}, cplx{0.0, 0.0}});
  s.schemes = {Scheme::ASOE, Scheme::DSOE, Scheme::DFOE};
  auto first = run_scenario(s, {(dir / "a").string(), 1, false});
  auto second = run_scenario(s, {(dir / "b").string(), 3, false});
  bool identical = first.size() == second.size();
  for (size_t i = 0; identical && i < first.size(); ++i) {
    std::ifstream x(first[i], std::ios::binary), y(second[i], std::ios::binary);
    std::stringstream sx, sy;
    sx << x.rdbuf();
    sy << y.rdbuf();
    identical = sx.str() == sy.str();
  }
  fs::remove_all(dir);
  report(10, worst < tol::kStepHalving && identical,
         cat("largest step-halving change ", fmt("%.2e", worst), " (< ", tol::kStepHalving,
             "), repeated runs byte-identical: ", identical ? "yes" : "no"));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Step {
    int n;
    void (*fn)();
  };
  const Step steps[] = {{1, reflectivity_anchor}, {2, spectrum_fidelity}, {3, orthonormality},
                        {4, landau_zener},        {5, slow_adiabatic},    {6, scheme_gaps},
                        {7, work_closure},        {8, validity_law},      {9, quantum_anchors},
                        {10, determinism}};
  for (const auto& s : steps) {
    try {
      s.fn();
    } catch (const std::exception& e) {
      report(s.n, false, cat("error: ", e.what()));
    }
  }
  std::printf("%d criteria failed, %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
