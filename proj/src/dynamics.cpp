#include "mim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace mim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

template <size_t N>
using Vec = std::array<double, N>;

template <size_t N, class F>
void rk4_step(F& f, double t, double h, Vec<N>& y) {
  Vec<N> k1, k2, k3, k4, tmp;
  f(t, y, k1);
  for (size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  f(t + 0.5 * h, tmp, k2);
  for (size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  f(t + 0.5 * h, tmp, k3);
  for (size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * k3[i];
  f(t + h, tmp, k4);
  for (size_t i = 0; i < N; ++i)
    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline cplx get(const double* p) { return {p[0], p[1]}; }
inline void put(double* p, cplx z) {
  p[0] = z.real();
  p[1] = z.imag();
}

template <size_t N>
void check_finite(const Vec<N>& y, double t) {
  for (double v : y)
    if (!std::isfinite(v))
      throw NumericalError("non-finite state at t=" + std::to_string(t) + " s");
}

// Carrier exp(-i w (t - t0)) with the phase reduced before the complex
// exponential.
cplx carrier(double w, double elapsed) {
  return std::polar(1.0, -std::fmod(w * elapsed, kTwoPi));
}

// int_0^t sqrt(D^2 + (s u)^2) du
double splitting_integral(double delta, double slope, double t) {
  if (slope == 0.0) return delta * t;
  double g = slope * t;
  double r = std::hypot(delta, g);
  return 0.5 * (g * r + delta * delta * std::asinh(g / delta)) / slope;
}

// Phases of the fitted two-level frequencies accumulated from t0.
std::array<double, 2> fitted_phases(const CrossingParams& p, const SweepTrajectory& traj,
                                    double t) {
  const double t0 = -traj.half_duration;
  const double slope = p.detuning_slope() * traj.speed;
  double split = splitting_integral(p.delta, slope, t) - splitting_integral(p.delta, slope, t0);
  double base = p.omega_av * (t - t0);
  return {base - split, base + split};
}

double max_frequency(const SweepModel& m, const SweepTrajectory& traj) {
  return m.crossing.omega_upper(traj.half_range);
}

double beat_frequency(const SweepModel& m, const SweepTrajectory& traj) {
  return 2.0 * m.crossing.half_splitting(traj.half_range);
}

}  // namespace

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::ASOE: return "asoe";
    case Scheme::DSOE: return "dsoe";
    case Scheme::DFOE: return "dfoe";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  std::string n;
  for (char ch : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (n == "asoe") return Scheme::ASOE;
  if (n == "dsoe") return Scheme::DSOE;
  if (n == "dfoe") return Scheme::DFOE;
  throw ValidationError("unknown scheme '" + name + "'");
}

SweepTrajectory SweepTrajectory::from_speed(double speed, double half_range) {
  if (!std::isfinite(speed) || speed <= 0.0) throw ValidationError("speed must be positive");
  if (!std::isfinite(half_range) || half_range <= 0.0)
    throw ValidationError("sweep half range must be positive");
  return {speed, half_range, half_range / speed};
}

SweepTrajectory SweepTrajectory::from_duration(double half_duration, double half_range) {
  if (!std::isfinite(half_duration) || half_duration <= 0.0)
    throw ValidationError("sweep half duration must be positive");
  if (!std::isfinite(half_range) || half_range <= 0.0)
    throw ValidationError("sweep half range must be positive");
  return {half_range / half_duration, half_range, half_duration};
}

void IntegratorConfig::validate() const {
  if (steps_per_period < 20)
    throw ValidationError("steps per fastest period must be >= 20");
  if (mode_window != 2)
    throw ValidationError("only the two-mode window is supported");
  if (samples_per_beat < 1) throw ValidationError("samples per beat must be >= 1");
}

double SweepModel::omega(int m, double q) const {
  if (fitted_frequencies || !table)
    return m == 0 ? crossing.omega_lower(q) : crossing.omega_upper(q);
  auto v = table->at(q);
  return crossing.omega_av + v.f[m == 0 ? CouplingTable::kW1 : CouplingTable::kW2];
}

double SweepModel::domega_dq(int m, double q) const {
  if (fitted_frequencies || !table) {
    double g = crossing.detuning(q);
    double d = g * crossing.detuning_slope() / crossing.half_splitting(q);
    return m == 0 ? -d : d;
  }
  auto v = table->at(q);
  return m == 0 ? v.dw1_dq : v.dw2_dq;
}

SweepModel build_sweep_model(double length, double alpha, int pair, double half_range,
                             const CouplingTable::Options& table_opts, bool need_table) {
  SweepModel m;
  FitOptions fo;
  fo.q_range = half_range;
  m.crossing = fit_crossing_params(length, alpha, pair, fo);
  if (need_table) {
    m.table = std::make_shared<CouplingTable>(m.crossing, half_range, table_opts);
    m.fitted_frequencies = m.crossing.frequency_residual < 1e-6;
  }
  return m;
}

double OutputGrid::time(long i) const {
  if (i == intervals) return t1;
  return t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(intervals);
}

OutputGrid make_output_grid(const CrossingParams& crossing, const SweepTrajectory& traj,
                            int samples_per_beat) {
  if (samples_per_beat < 1) throw ValidationError("samples per beat must be >= 1");
  OutputGrid g;
  g.t0 = -traj.half_duration;
  g.t1 = traj.half_duration;
  double beats = 2.0 * traj.half_duration * 2.0 * crossing.half_splitting(traj.half_range) / kTwoPi;
  double n = std::ceil(beats * samples_per_beat);
  if (n > 5e7) throw ValidationError("output grid too large; lower samples_per_beat");
  g.intervals = std::max<long>(200, static_cast<long>(n));
  return g;
}

long substeps_per_output(const SweepModel& model, const SweepTrajectory& traj,
                         const OutputGrid& grid, const IntegratorConfig& cfg) {
  double period = cfg.scheme == Scheme::DFOE ? kTwoPi / beat_frequency(model, traj)
                                             : kTwoPi / max_frequency(model, traj);
  double h = period / cfg.steps_per_period;
  return std::max<long>(1, static_cast<long>(std::ceil(grid.dt() / h * (1.0 - 1e-12))));
}

FieldState initial_conditions(const std::array<cplx, 2>& c0, const SweepModel& model,
                              const SweepTrajectory& traj) {
  if (!model.table) throw ValidationError("adiabatic start needs coupling tables");
  FieldState s;
  s.basis = StateBasis::Adiabatic;
  s.t = -traj.half_duration;
  s.amp = c0;
  auto v = model.table->at(traj.position(s.t));
  const double g[2][2] = {{v.f[CouplingTable::kG11], v.f[CouplingTable::kG12]},
                          {v.f[CouplingTable::kG21], v.f[CouplingTable::kG22]}};
  for (int m = 0; m < 2; ++m) {
    cplx acc = 0.0;
    for (int n = 0; n < 2; ++n) acc += traj.speed * g[m][n] * c0[n];
    s.deriv[m] = -acc;
  }
  s.phase = {0.0, 0.0};
  return s;
}

FieldState diabatic_initial_state(const std::array<cplx, 2>& a0, const SweepModel& model,
                                  const SweepTrajectory& traj, bool diagonal) {
  const auto& p = model.crossing;
  if (!(p.delta > 0.0)) throw ValidationError("diabatic schemes need a nonzero gap");
  FieldState s;
  s.basis = StateBasis::Diabatic;
  s.t = -traj.half_duration;
  s.amp = a0;
  const double G = p.detuning(traj.position(s.t)), D = p.delta, w = p.omega_av;
  if (diagonal) {
    double bl = std::sqrt((w - G) * (w - G) + D * D);
    double br = std::sqrt((w + G) * (w + G) + D * D);
    s.deriv = {-kI * bl * a0[0], -kI * br * a0[1]};
  } else {
    s.deriv = {-kI * ((w - G) * a0[0] + D * a0[1]), -kI * (D * a0[0] + (w + G) * a0[1])};
  }
  s.phase = {0.0, 0.0};
  return s;
}

std::vector<FieldState> integrate_asoe(const FieldState& s0, const SweepModel& model,
                                       const SweepTrajectory& traj,
                                       const IntegratorConfig& cfg) {
  cfg.validate();
  if (s0.basis != StateBasis::Adiabatic) throw ValidationError("ASOE needs an adiabatic state");
  if (!model.table) throw ValidationError("ASOE needs coupling tables");
  const CouplingTable& table = *model.table;
  const double v = traj.speed, v2 = v * v;
  const double wav = model.crossing.omega_av;
  const bool fitted = model.fitted_frequencies;

  auto rhs = [&](double t, const Vec<10>& y, Vec<10>& dy) {
    const double q = v * t;
    const auto tv = table.at(q);
    double w[2], wdot[2];
    if (fitted) {
      for (int m = 0; m < 2; ++m) {
        w[m] = model.omega(m, q);
        wdot[m] = v * model.domega_dq(m, q);
      }
    } else {
      w[0] = wav + tv.f[CouplingTable::kW1];
      w[1] = wav + tv.f[CouplingTable::kW2];
      wdot[0] = v * tv.dw1_dq;
      wdot[1] = v * tv.dw2_dq;
    }
    const cplx c[2] = {get(&y[0]), get(&y[2])};
    const cplx cd[2] = {get(&y[4]), get(&y[6])};
    const cplx e12 = std::polar(1.0, y[8] - y[9]);
    const cplx ph[2][2] = {{1.0, e12}, {std::conj(e12), 1.0}};
    const double g[2][2] = {{tv.f[CouplingTable::kG11], tv.f[CouplingTable::kG12]},
                            {tv.f[CouplingTable::kG21], tv.f[CouplingTable::kG22]}};
    const double hq[2][2] = {{tv.f[CouplingTable::kH11], tv.f[CouplingTable::kH12]},
                             {tv.f[CouplingTable::kH21], tv.f[CouplingTable::kH22]}};
    for (int m = 0; m < 2; ++m) {
      cplx acc = kI * wdot[m] * c[m] + 2.0 * kI * w[m] * cd[m];
      for (int n = 0; n < 2; ++n) {
        cplx P = ph[m][n] * (v * g[m][n]);
        cplx Q = ph[m][n] * (v2 * hq[m][n]);
        acc -= (2.0 * cd[n] - 2.0 * kI * w[n] * c[n]) * P + c[n] * Q;
      }
      put(&dy[2 * m], cd[m]);
      put(&dy[4 + 2 * m], acc);
      dy[8 + m] = w[m];
    }
  };

  OutputGrid grid = make_output_grid(model.crossing, traj, cfg.samples_per_beat);
  const long sub = substeps_per_output(model, traj, grid, cfg);
  Vec<10> y{};
  put(&y[0], s0.amp[0]);
  put(&y[2], s0.amp[1]);
  put(&y[4], s0.deriv[0]);
  put(&y[6], s0.deriv[1]);
  y[8] = s0.phase[0];
  y[9] = s0.phase[1];

  std::vector<FieldState> out;
  out.reserve(grid.intervals + 1);
  auto record = [&](double t) {
    FieldState s;
    s.basis = StateBasis::Adiabatic;
    s.t = t;
    s.amp = {get(&y[0]), get(&y[2])};
    s.deriv = {get(&y[4]), get(&y[6])};
    s.phase = {y[8], y[9]};
    out.push_back(s);
  };
  record(grid.t0);
  for (long i = 0; i < grid.intervals; ++i) {
    const double ta = grid.time(i), tb = grid.time(i + 1);
    const double h = (tb - ta) / static_cast<double>(sub);
    for (long j = 0; j < sub; ++j) rk4_step(rhs, ta + h * static_cast<double>(j), h, y);
    check_finite(y, tb);
    record(tb);
  }
  return out;
}

std::vector<FieldState> integrate_dsoe(const FieldState& s0, const SweepModel& model,
                                       const SweepTrajectory& traj,
                                       const IntegratorConfig& cfg) {
  cfg.validate();
  if (s0.basis != StateBasis::Diabatic) throw ValidationError("DSOE needs a diabatic state");
  const auto& p = model.crossing;
  if (!(p.delta > 0.0)) throw ValidationError("diabatic schemes need a nonzero gap");
  const double v = traj.speed, wav = p.omega_av, D = p.delta;
  const double t0 = s0.t;

  // Envelope e = a exp(+i wav (t - t0)):  e'' = 2 i wav e' + (wav^2 - M) e.
  auto rhs = [&](double t, const Vec<8>& y, Vec<8>& dy) {
    const double G = p.detuning(v * t);
    const double common = -G * G - D * D;
    const double kll = 2.0 * wav * G + common;
    const double krr = -2.0 * wav * G + common;
    const double klr = -2.0 * D * wav;
    const cplx e[2] = {get(&y[0]), get(&y[2])};
    const cplx ed[2] = {get(&y[4]), get(&y[6])};
    put(&dy[0], ed[0]);
    put(&dy[2], ed[1]);
    put(&dy[4], 2.0 * kI * wav * ed[0] + kll * e[0] + klr * e[1]);
    put(&dy[6], 2.0 * kI * wav * ed[1] + klr * e[0] + krr * e[1]);
  };

  OutputGrid grid = make_output_grid(p, traj, cfg.samples_per_beat);
  const long sub = substeps_per_output(model, traj, grid, cfg);
  Vec<8> y{};
  put(&y[0], s0.amp[0]);
  put(&y[2], s0.amp[1]);
  put(&y[4], s0.deriv[0] + kI * wav * s0.amp[0]);
  put(&y[6], s0.deriv[1] + kI * wav * s0.amp[1]);

  std::vector<FieldState> out;
  out.reserve(grid.intervals + 1);
  auto record = [&](double t) {
    FieldState s;
    s.basis = StateBasis::Diabatic;
    s.t = t;
    const cplx car = carrier(wav, t - t0);
    for (int m = 0; m < 2; ++m) {
      cplx e = get(&y[2 * m]), ed = get(&y[4 + 2 * m]);
      s.amp[m] = e * car;
      s.deriv[m] = (ed - kI * wav * e) * car;
    }
    s.phase = fitted_phases(p, traj, t);
    out.push_back(s);
  };
  record(grid.t0);
  for (long i = 0; i < grid.intervals; ++i) {
    const double ta = grid.time(i), tb = grid.time(i + 1);
    const double h = (tb - ta) / static_cast<double>(sub);
    for (long j = 0; j < sub; ++j) rk4_step(rhs, ta + h * static_cast<double>(j), h, y);
    check_finite(y, tb);
    record(tb);
  }
  return out;
}

std::vector<FieldState> integrate_dfoe(const std::array<cplx, 2>& a0, const SweepModel& model,
                                       const SweepTrajectory& traj,
                                       const IntegratorConfig& cfg) {
  cfg.validate();
  const auto& p = model.crossing;
  if (!(p.delta > 0.0)) throw ValidationError("diabatic schemes need a nonzero gap");
  const double v = traj.speed, wav = p.omega_av, D = p.delta;
  const double t0 = -traj.half_duration;

  // Frame rotating at the mean frequency: i b' = (H - wav) b.
  auto rhs = [&](double t, const Vec<4>& y, Vec<4>& dy) {
    const double G = p.detuning(v * t);
    const cplx b[2] = {get(&y[0]), get(&y[2])};
    put(&dy[0], -kI * (-G * b[0] + D * b[1]));
    put(&dy[2], -kI * (D * b[0] + G * b[1]));
  };

  OutputGrid grid = make_output_grid(p, traj, cfg.samples_per_beat);
  const long sub = substeps_per_output(model, traj, grid, cfg);
  Vec<4> y{};
  put(&y[0], a0[0]);
  put(&y[2], a0[1]);
  const double norm0 = std::norm(a0[0]) + std::norm(a0[1]);

  std::vector<FieldState> out;
  out.reserve(grid.intervals + 1);
  auto record = [&](double t) {
    FieldState s;
    s.basis = StateBasis::Diabatic;
    s.t = t;
    const cplx car = carrier(wav, t - t0);
    s.amp = {get(&y[0]) * car, get(&y[2]) * car};
    s.phase = fitted_phases(p, traj, t);
    out.push_back(s);
  };
  record(grid.t0);
  for (long i = 0; i < grid.intervals; ++i) {
    const double ta = grid.time(i), tb = grid.time(i + 1);
    const double h = (tb - ta) / static_cast<double>(sub);
    for (long j = 0; j < sub; ++j) rk4_step(rhs, ta + h * static_cast<double>(j), h, y);
    check_finite(y, tb);
    record(tb);
  }
  const double norm1 = std::norm(get(&y[0])) + std::norm(get(&y[2]));
  if (norm0 > 0.0 && std::abs(norm1 - norm0) / norm0 > 1e-8)
    throw NumericalError(fmt::format(
        "first-order sweep norm drifted by {:.3e}; increase steps per period",
        std::abs(norm1 - norm0) / norm0));
  return out;
}

std::array<cplx, 2> full_amplitudes(const FieldState& s, const SweepModel& model,
                                    const SweepTrajectory& traj, StateBasis basis) {
  std::array<cplx, 2> full = s.amp;
  if (s.basis == StateBasis::Adiabatic)
    for (int m = 0; m < 2; ++m) full[m] *= std::polar(1.0, -std::fmod(s.phase[m], kTwoPi));
  if (basis == s.basis) return full;
  const auto& p = model.crossing;
  MixingAngle ang = mixing_angle(p.detuning(traj.position(s.t)), p.delta);
  return basis == StateBasis::Diabatic ? adiabatic_to_diabatic(full, ang)
                                       : diabatic_to_adiabatic(full, ang);
}

std::vector<FieldState> convert_series(const std::vector<FieldState>& series,
                                       const SweepModel& model, const SweepTrajectory& traj,
                                       StateBasis target) {
  std::vector<FieldState> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    FieldState r = s;
    if (s.basis != target) {
      r.basis = target;
      r.deriv = {0.0, 0.0};
      auto full = full_amplitudes(s, model, traj, target);
      if (target == StateBasis::Adiabatic)
        for (int m = 0; m < 2; ++m) full[m] *= std::polar(1.0, std::fmod(s.phase[m], kTwoPi));
      r.amp = full;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace mim
