#include "mim/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <json.hpp>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "mim/observables.hpp"

namespace mim {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"cavity", {"length", "alpha", "reflectivity", "wavelength", "pair"}},
      {"sweep", {"speed", "half_duration", "half_range"}},
      {"run", {"name", "schemes", "initial_basis", "initial_amplitudes"}},
      {"integrator",
       {"asoe_steps_per_period", "dsoe_steps_per_period", "dfoe_steps_per_period",
        "samples_per_beat", "diagonal_dsoe_start", "coupling_grid", "fd_step"}},
      {"scan", {"speeds", "alphas", "run_sweeps"}},
      {"spectrum", {"points", "half_range", "pairs"}},
      {"quantum", {"points", "speed", "basis"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ValidationError(key + ": not a number: '" + text + "'");
  }
  if (used != t.size() || !std::isfinite(v))
    throw ValidationError(key + ": not a finite number: '" + text + "'");
  return v;
}

int to_int(const std::string& key, const std::string& text) {
  double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 2e9)
    throw ValidationError(key + ": expected an integer, got '" + text + "'");
  return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw ValidationError(key + ": expected a boolean, got '" + text + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

pt::ptree read_tree(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.message() + " at line " +
                          std::to_string(e.line()));
  }
  for (const auto& [section, body] : tree) {
    auto it = known_keys().find(section);
    if (it == known_keys().end())
      throw ValidationError("config: unknown section [" + section + "]");
    if (body.empty() && !body.data().empty())
      throw ValidationError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body)
      if (!it->second.count(key))
        throw ValidationError("config: unknown key '" + section + "." + key + "'");
  }
  return tree;
}

std::string fmt17(double v) { return fmt::format("{:.17g}", v); }

// Writes to `path` through a sibling temporary, so readers never see a
// half-written file.
template <class F>
void write_atomic(const std::string& path, F&& body) {
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    body(out);
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for '" + tmp + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into '" + path + "'");
  }
}

// Removes everything registered unless `commit` is called.
class OutputSet {
 public:
  explicit OutputSet(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory '" + dir + "'");
  }
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) {
      fs::remove(f, ec);
      fs::remove(f + ".partial", ec);
    }
  }
  std::string path(const std::string& name) {
    std::string p = (fs::path(dir_) / name).string();
    std::lock_guard<std::mutex> lock(mu_);
    files_.push_back(p);
    return p;
  }
  std::vector<std::string> commit() {
    committed_ = true;
    return files_;
  }

 private:
  std::string dir_;
  std::vector<std::string> files_;
  std::mutex mu_;
  bool committed_ = false;
};

template <class F>
void parallel_for(size_t n, int jobs, F&& body) {
  const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (failure) return;
        }
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::array<MagneticModeProfile, 2> face_profiles(const CouplingTable::Values& v) {
  return {MagneticModeProfile{0.0, v.f[CouplingTable::kFaceL1], v.f[CouplingTable::kFaceR1]},
          MagneticModeProfile{0.0, v.f[CouplingTable::kFaceL2], v.f[CouplingTable::kFaceR2]}};
}

double reflectivity_of(const ScenarioSpec& spec, double alpha) {
  return delta_membrane_reflectivity(kTwoPi / spec.wavelength, alpha);
}

}  // namespace

void ScenarioSpec::validate() const {
  if (name.empty() || name.find('/') != std::string::npos)
    throw ValidationError("run.name must be a plain, non-empty file stem");
  if (!(length > 0.0)) throw ValidationError("cavity.length must be positive");
  if (alpha && reflectivity) throw ValidationError("give cavity.alpha or cavity.reflectivity, not both");
  if (alpha && !(*alpha > 0.0)) throw ValidationError("cavity.alpha must be positive");
  if (reflectivity && !(*reflectivity > 0.0 && *reflectivity < 1.0))
    throw ValidationError("cavity.reflectivity must lie in (0, 1)");
  if (!(wavelength > 0.0)) throw ValidationError("cavity.wavelength must be positive");
  if (pair < 1) throw ValidationError("cavity.pair must be >= 1");
  if (speed && half_duration) throw ValidationError("give sweep.speed or sweep.half_duration, not both");
  if (speed && !(*speed > 0.0)) throw ValidationError("sweep.speed must be positive");
  if (half_duration && !(*half_duration > 0.0))
    throw ValidationError("sweep.half_duration must be positive");
  if (!(half_range > 0.0) || half_range >= 0.25 * length)
    throw ValidationError("sweep.half_range must be positive and well inside the cavity");
  if (schemes.empty()) throw ValidationError("run.schemes must name at least one scheme");
  if (std::norm(initial_amplitudes[0]) + std::norm(initial_amplitudes[1]) == 0.0)
    throw ValidationError("run.initial_amplitudes must not be all zero");
  for (int s : {asoe_steps_per_period, dsoe_steps_per_period, dfoe_steps_per_period})
    if (s < 20) throw ValidationError("steps per period must be >= 20");
  if (samples_per_beat < 50) throw ValidationError("integrator.samples_per_beat must be >= 50");
  if (table.grid_points < 5) throw ValidationError("integrator.coupling_grid must be >= 5");
  if (!(table.fd_step > 0.0)) throw ValidationError("integrator.fd_step must be positive");
  for (double v : scan_speeds)
    if (!(v > 0.0)) throw ValidationError("scan.speeds must be positive");
  for (double a : scan_alphas)
    if (!(a > 0.0)) throw ValidationError("scan.alphas must be positive");
  if (spectrum_points < 2) throw ValidationError("spectrum.points must be >= 2");
  if (spectrum_half_range < 0.0) throw ValidationError("spectrum.half_range must be >= 0");
  if (spectrum_pairs < 0 || spectrum_pairs >= pair)
    throw ValidationError("spectrum.pairs must lie in [0, pair)");
  if (quantum_points < 1) throw ValidationError("quantum.points must be >= 1");
  if (quantum_speed < 0.0) throw ValidationError("quantum.speed must be >= 0");
}

double ScenarioSpec::resolved_alpha() const {
  if (alpha) return *alpha;
  if (reflectivity) return alpha_for_reflectivity(*reflectivity, wavelength);
  return 1.5e-6;
}

SweepTrajectory ScenarioSpec::trajectory() const {
  if (speed && half_duration)
    throw ValidationError("give sweep.speed or sweep.half_duration, not both");
  if (speed) return SweepTrajectory::from_speed(*speed, half_range);
  if (half_duration) return SweepTrajectory::from_duration(*half_duration, half_range);
  throw ValidationError("a sweep needs sweep.speed or sweep.half_duration");
}

IntegratorConfig ScenarioSpec::integrator(Scheme s) const {
  IntegratorConfig cfg;
  cfg.scheme = s;
  cfg.samples_per_beat = samples_per_beat;
  cfg.diagonal_dsoe_start = diagonal_dsoe_start;
  switch (s) {
    case Scheme::ASOE: cfg.steps_per_period = asoe_steps_per_period; break;
    case Scheme::DSOE: cfg.steps_per_period = dsoe_steps_per_period; break;
    case Scheme::DFOE: cfg.steps_per_period = dfoe_steps_per_period; break;
  }
  return cfg;
}

ScenarioSpec parse_scenario(const std::string& text) {
  pt::ptree tree = read_tree(text);
  ScenarioSpec s;
  auto get = [&](const char* key) { return tree.get_optional<std::string>(pt::path(key, '.')); };

  if (auto v = get("cavity.length")) s.length = to_double("cavity.length", *v);
  if (auto v = get("cavity.alpha")) s.alpha = to_double("cavity.alpha", *v);
  if (auto v = get("cavity.reflectivity")) s.reflectivity = to_double("cavity.reflectivity", *v);
  if (auto v = get("cavity.wavelength")) s.wavelength = to_double("cavity.wavelength", *v);
  if (auto v = get("cavity.pair")) s.pair = to_int("cavity.pair", *v);

  if (auto v = get("sweep.speed")) s.speed = to_double("sweep.speed", *v);
  if (auto v = get("sweep.half_duration")) s.half_duration = to_double("sweep.half_duration", *v);
  if (auto v = get("sweep.half_range")) s.half_range = to_double("sweep.half_range", *v);

  if (auto v = get("run.name")) s.name = trim(*v);
  if (auto v = get("run.schemes")) {
    s.schemes.clear();
    for (const auto& item : split_list(*v)) {
      Scheme sc = parse_scheme(item);
      if (std::find(s.schemes.begin(), s.schemes.end(), sc) == s.schemes.end())
        s.schemes.push_back(sc);
    }
  }
  if (auto v = get("run.initial_basis")) {
    std::string b = trim(*v);
    if (b == "adiabatic") s.initial_basis = StateBasis::Adiabatic;
    else if (b == "diabatic") s.initial_basis = StateBasis::Diabatic;
    else throw ValidationError("run.initial_basis must be 'adiabatic' or 'diabatic'");
  }
  if (auto v = get("run.initial_amplitudes")) {
    auto xs = to_doubles("run.initial_amplitudes", *v);
    if (xs.size() == 2) s.initial_amplitudes = {cplx{xs[0], 0.0}, cplx{xs[1], 0.0}};
    else if (xs.size() == 4) s.initial_amplitudes = {cplx{xs[0], xs[1]}, cplx{xs[2], xs[3]}};
    else throw ValidationError("run.initial_amplitudes takes 2 real or 4 (re im re im) numbers");
  }

  if (auto v = get("integrator.asoe_steps_per_period"))
    s.asoe_steps_per_period = to_int("integrator.asoe_steps_per_period", *v);
  if (auto v = get("integrator.dsoe_steps_per_period"))
    s.dsoe_steps_per_period = to_int("integrator.dsoe_steps_per_period", *v);
  if (auto v = get("integrator.dfoe_steps_per_period"))
    s.dfoe_steps_per_period = to_int("integrator.dfoe_steps_per_period", *v);
  if (auto v = get("integrator.samples_per_beat"))
    s.samples_per_beat = to_int("integrator.samples_per_beat", *v);
  if (auto v = get("integrator.diagonal_dsoe_start"))
    s.diagonal_dsoe_start = to_bool("integrator.diagonal_dsoe_start", *v);
  if (auto v = get("integrator.coupling_grid"))
    s.table.grid_points = to_int("integrator.coupling_grid", *v);
  if (auto v = get("integrator.fd_step")) s.table.fd_step = to_double("integrator.fd_step", *v);

  if (auto v = get("scan.speeds")) s.scan_speeds = to_doubles("scan.speeds", *v);
  if (auto v = get("scan.alphas")) s.scan_alphas = to_doubles("scan.alphas", *v);
  if (auto v = get("scan.run_sweeps")) s.scan_sweeps = to_bool("scan.run_sweeps", *v);

  if (auto v = get("spectrum.points")) s.spectrum_points = to_int("spectrum.points", *v);
  if (auto v = get("spectrum.half_range"))
    s.spectrum_half_range = to_double("spectrum.half_range", *v);
  if (auto v = get("spectrum.pairs")) s.spectrum_pairs = to_int("spectrum.pairs", *v);

  if (auto v = get("quantum.points")) s.quantum_points = to_int("quantum.points", *v);
  if (auto v = get("quantum.speed")) s.quantum_speed = to_double("quantum.speed", *v);
  if (auto v = get("quantum.basis")) {
    std::string b = trim(*v);
    if (b == "adiabatic") s.quantum_basis = Basis::Adiabatic;
    else if (b == "diabatic") s.quantum_basis = Basis::Diabatic;
    else throw ValidationError("quantum.basis must be 'adiabatic' or 'diabatic'");
  }

  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string scenario_with(const std::string& text, const std::string& key,
                          const std::string& value) {
  pt::ptree tree = read_tree(text);
  auto dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
    throw ValidationError("config key must look like 'section.key'");
  auto sec = known_keys().find(key.substr(0, dot));
  if (sec == known_keys().end() || !sec->second.count(key.substr(dot + 1)))
    throw ValidationError("config: unknown key '" + key + "'");
  tree.put(pt::path(key, '.'), value);
  std::ostringstream out;
  pt::ini_parser::write_ini(out, tree);
  std::string result = out.str();
  parse_scenario(result);
  return result;
}

std::array<double, 2> SweepResult::final_adiabatic() const {
  if (rows.empty()) return {0.0, 0.0};
  return {std::norm(rows.back().adiabatic[0]), std::norm(rows.back().adiabatic[1])};
}

std::array<double, 2> SweepResult::final_diabatic() const {
  if (rows.empty()) return {0.0, 0.0};
  return {std::norm(rows.back().diabatic[0]), std::norm(rows.back().diabatic[1])};
}

SweepModel model_for(const ScenarioSpec& spec, double alpha) {
  return build_sweep_model(spec.length, alpha, spec.pair, spec.half_range, spec.table, true);
}

SweepResult run_sweep(const ScenarioSpec& spec, Scheme scheme, const SweepModel& model,
                      int steps_override) {
  const SweepTrajectory traj = spec.trajectory();
  IntegratorConfig cfg = spec.integrator(scheme);
  if (steps_override > 0) cfg.steps_per_period = steps_override;
  const auto& p = model.crossing;

  const double t0 = -traj.half_duration;
  const MixingAngle start_angle = mixing_angle(p.detuning(traj.position(t0)), p.delta);
  std::array<cplx, 2> c0, a0;
  if (spec.initial_basis == StateBasis::Adiabatic) {
    c0 = spec.initial_amplitudes;
    a0 = adiabatic_to_diabatic(c0, start_angle);
  } else {
    a0 = spec.initial_amplitudes;
    c0 = diabatic_to_adiabatic(a0, start_angle);
  }

  std::vector<FieldState> states;
  switch (scheme) {
    case Scheme::ASOE:
      states = integrate_asoe(initial_conditions(c0, model, traj), model, traj, cfg);
      break;
    case Scheme::DSOE:
      states = integrate_dsoe(diabatic_initial_state(a0, model, traj, cfg.diagonal_dsoe_start),
                              model, traj, cfg);
      break;
    case Scheme::DFOE:
      states = integrate_dfoe(a0, model, traj, cfg);
      break;
  }

  SweepResult r;
  r.scheme = scheme;
  r.speed = traj.speed;
  r.alpha = p.alpha;
  r.initial_energy = field_energy(states.front().amp);
  r.landau_zener = landau_zener_probability(p.delta, p.gamma, traj.speed);
  r.validity_center = validity_ratio(p.delta, p.gamma, p.omega_av, 0.0, traj.speed);
  r.validity_edge = validity_ratio(p.delta, p.gamma, p.omega_av, traj.half_range, traj.speed);
  if (model.table)
    for (const auto& w : model.table->warnings()) r.warnings.push_back(w);
  if (!p.two_level) r.warnings.push_back("crossing is not well described by two levels");
  if (!model.fitted_frequencies)
    r.warnings.push_back("two-level frequency fit off by " + fmt17(p.frequency_residual) +
                         "; solved frequencies used instead");

  std::vector<double> tau, pres, pres_sum;
  r.rows.reserve(states.size());
  for (const auto& s : states) {
    SweepRecord rec;
    rec.tau = s.t / traj.half_duration;
    rec.q = traj.position(s.t);
    auto full_c = full_amplitudes(s, model, traj, StateBasis::Adiabatic);
    auto full_a = full_amplitudes(s, model, traj, StateBasis::Diabatic);
    for (int m = 0; m < 2; ++m) {
      rec.adiabatic[m] = s.basis == StateBasis::Adiabatic
                             ? s.amp[m]
                             : full_c[m] * std::polar(1.0, std::fmod(s.phase[m], kTwoPi));
      rec.diabatic[m] =
          full_a[m] * std::polar(1.0, std::fmod(p.omega_av * (s.t - t0), kTwoPi));
      rec.mode_sq[m] = std::norm(s.amp[m]);
    }
    rec.energy = field_energy(s.amp);
    rec.dE_over_E0 = (rec.energy - r.initial_energy) / r.initial_energy;
    if (model.table) {
      auto faces = face_profiles(model.table->at(rec.q));
      rec.pressure = pressure_two_mode(faces, full_c, 0.0);
      rec.pressure_mode_sum =
          pressure_single_mode(faces[0], full_c[0]) + pressure_single_mode(faces[1], full_c[1]);
    }
    tau.push_back(rec.tau);
    pres.push_back(rec.pressure);
    pres_sum.push_back(rec.pressure_mode_sum);
    r.rows.push_back(rec);
  }
  auto work = work_done(tau, pres, traj.speed, traj.half_duration);
  auto work_sum = work_done(tau, pres_sum, traj.speed, traj.half_duration);
  for (size_t i = 0; i < r.rows.size(); ++i) {
    auto& rec = r.rows[i];
    rec.work = work[i];
    rec.work_mode_sum = work_sum[i];
    const double dE = rec.energy - r.initial_energy;
    r.work_residual = std::max(r.work_residual, std::abs(dE - rec.work) / r.initial_energy);
    r.work_residual_mode_sum =
        std::max(r.work_residual_mode_sum, std::abs(dE - rec.work_mode_sum) / r.initial_energy);
    r.max_abs_dE = std::max(r.max_abs_dE, std::abs(rec.dE_over_E0));
  }
  return r;
}

void write_sweep_csv(const std::string& path, const SweepResult& r) {
  write_atomic(path, [&](std::ostream& out) {
    out << "tau[1],q_m[m],re_c1[V/m],im_c1[V/m],re_c2[V/m],im_c2[V/m],"
           "re_aL[V/m],im_aL[V/m],re_aR[V/m],im_aR[V/m],"
           "mode_sq_1[V^2/m^2],mode_sq_2[V^2/m^2],energy_per_area[J/m^2],dE_over_E0[1],"
           "pressure[N/m^2],work_per_area[J/m^2]\n";
    std::string line;
    for (const auto& rec : r.rows) {
      line.clear();
      auto add = [&](double v) {
        if (!line.empty()) line.push_back(',');
        line += fmt17(v);
      };
      add(rec.tau);
      add(rec.q);
      for (const auto& z : rec.adiabatic) {
        add(z.real());
        add(z.imag());
      }
      for (const auto& z : rec.diabatic) {
        add(z.real());
        add(z.imag());
      }
      add(rec.mode_sq[0]);
      add(rec.mode_sq[1]);
      add(rec.energy);
      add(rec.dE_over_E0);
      add(rec.pressure);
      add(rec.work);
      line.push_back('\n');
      out << line;
    }
  });
}

std::string summary_json(const ScenarioSpec& spec, const SweepModel& model,
                         const SweepResult& r) {
  const auto& p = model.crossing;
  json j;
  j["scenario"] = spec.name;
  j["scheme"] = scheme_name(r.scheme);
  j["alpha_m"] = r.alpha;
  j["reflectivity"] = reflectivity_of(spec, r.alpha);
  j["speed_m_per_s"] = r.speed;
  j["half_range_m"] = spec.half_range;
  j["pair"] = spec.pair;
  j["omega_av_rad_per_s"] = p.omega_av;
  j["delta_rad_per_s"] = p.delta;
  j["gamma_rad2_per_s2_m2"] = p.gamma;
  j["samples"] = r.rows.size();
  j["final_adiabatic_populations"] = r.final_adiabatic();
  j["final_diabatic_populations"] = r.final_diabatic();
  j["landau_zener_probability"] = r.landau_zener;
  j["validity_ratio_center"] = r.validity_center;
  j["validity_ratio_edge"] = r.validity_edge;
  j["max_abs_dE_over_E0"] = r.max_abs_dE;
  j["final_dE_over_E0"] = r.rows.empty() ? 0.0 : r.rows.back().dE_over_E0;
  j["work_energy_residual"] = r.work_residual;
  j["work_energy_residual_mode_sum"] = r.work_residual_mode_sum;
  j["warnings"] = r.warnings;
  return j.dump();
}

SeedCheck seed_check(const ScenarioSpec& spec, Scheme scheme, const SweepModel& model,
                     double tolerance) {
  const int base = spec.integrator(scheme).steps_per_period;
  SweepResult coarse = run_sweep(spec, scheme, model, base);
  SweepResult fine = run_sweep(spec, scheme, model, 2 * base);
  SeedCheck sc;
  sc.scheme = scheme;
  if (coarse.rows.size() != fine.rows.size())
    throw NumericalError("step halving changed the output grid");
  const double norm0 = std::norm(spec.initial_amplitudes[0]) + std::norm(spec.initial_amplitudes[1]);
  for (size_t i = 0; i < coarse.rows.size(); ++i) {
    const auto& a = coarse.rows[i];
    const auto& b = fine.rows[i];
    double d = std::abs(a.dE_over_E0 - b.dE_over_E0);
    for (int m = 0; m < 2; ++m) {
      d = std::max(d, std::abs(std::norm(a.adiabatic[m]) - std::norm(b.adiabatic[m])) / norm0);
      d = std::max(d, std::abs(std::norm(a.diabatic[m]) - std::norm(b.diabatic[m])) / norm0);
    }
    d = std::max(d, std::abs(a.work - b.work) / coarse.initial_energy);
    sc.max_change = std::max(sc.max_change, d);
  }
  sc.richardson_error = sc.max_change / 15.0;
  sc.pass = sc.max_change < tolerance;
  return sc;
}

std::vector<std::string> run_scenario(const ScenarioSpec& spec, const RunOptions& opts) {
  spec.validate();
  spec.trajectory();
  OutputSet outputs(opts.out_dir);
  const SweepModel model = model_for(spec, spec.resolved_alpha());

  std::vector<std::string> summaries(spec.schemes.size());
  std::vector<std::string> checks(spec.schemes.size());
  std::vector<std::string> csv_paths;
  for (Scheme s : spec.schemes)
    csv_paths.push_back(outputs.path(spec.name + "_" + scheme_name(s) + ".csv"));
  const std::string summary_path = outputs.path(spec.name + "_summary.jsonl");
  const std::string check_path =
      opts.seed_check ? outputs.path(spec.name + "_seed_check.jsonl") : std::string();

  parallel_for(spec.schemes.size(), opts.jobs, [&](size_t i) {
    SweepResult r = run_sweep(spec, spec.schemes[i], model);
    write_sweep_csv(csv_paths[i], r);
    summaries[i] = summary_json(spec, model, r);
    if (opts.seed_check) {
      SeedCheck sc = seed_check(spec, spec.schemes[i], model);
      json j;
      j["scenario"] = spec.name;
      j["scheme"] = scheme_name(sc.scheme);
      j["max_change"] = sc.max_change;
      j["richardson_error"] = sc.richardson_error;
      j["pass"] = sc.pass;
      checks[i] = j.dump();
    }
  });

  write_atomic(summary_path, [&](std::ostream& out) {
    for (const auto& line : summaries) out << line << '\n';
  });
  if (opts.seed_check)
    write_atomic(check_path, [&](std::ostream& out) {
      for (const auto& line : checks) out << line << '\n';
    });
  return outputs.commit();
}

std::vector<std::string> run_scan(const ScenarioSpec& spec, const RunOptions& opts) {
  spec.validate();
  if (spec.scan_speeds.empty()) throw ValidationError("scan.speeds must list at least one speed");
  std::vector<double> alphas = spec.scan_alphas;
  if (alphas.empty()) alphas.push_back(spec.resolved_alpha());
  OutputSet outputs(opts.out_dir);

  std::vector<SweepModel> models(alphas.size());
  parallel_for(alphas.size(), opts.jobs, [&](size_t i) {
    ScenarioSpec s = spec;
    s.alpha = alphas[i];
    s.reflectivity.reset();
    models[i] = build_sweep_model(s.length, alphas[i], s.pair, s.half_range, s.table,
                                  s.scan_sweeps);
  });

  struct Entry {
    size_t ia, iv;
    std::vector<SweepResult> results;
    std::vector<std::string> summaries;
  };
  std::vector<Entry> entries;
  for (size_t ia = 0; ia < alphas.size(); ++ia)
    for (size_t iv = 0; iv < spec.scan_speeds.size(); ++iv) entries.push_back({ia, iv, {}, {}});

  std::vector<std::vector<std::string>> csv_paths(entries.size());
  if (spec.scan_sweeps)
    for (size_t e = 0; e < entries.size(); ++e)
      for (Scheme s : spec.schemes)
        csv_paths[e].push_back(outputs.path(fmt::format("{}_a{}_v{}_{}.csv", spec.name,
                                                        entries[e].ia, entries[e].iv,
                                                        scheme_name(s))));
  const std::string table_path = outputs.path(spec.name + "_scan.csv");
  const std::string summary_path =
      spec.scan_sweeps ? outputs.path(spec.name + "_scan_summary.jsonl") : std::string();

  parallel_for(entries.size(), opts.jobs, [&](size_t e) {
    if (!spec.scan_sweeps) return;
    Entry& en = entries[e];
    ScenarioSpec s = spec;
    s.alpha = alphas[en.ia];
    s.reflectivity.reset();
    s.speed = spec.scan_speeds[en.iv];
    s.half_duration.reset();
    for (size_t k = 0; k < s.schemes.size(); ++k) {
      SweepResult r = run_sweep(s, s.schemes[k], models[en.ia]);
      write_sweep_csv(csv_paths[e][k], r);
      en.summaries.push_back(summary_json(s, models[en.ia], r));
      r.rows.erase(r.rows.begin() + 1, r.rows.end() - 1);
      en.results.push_back(std::move(r));
    }
  });

  write_atomic(table_path, [&](std::ostream& out) {
    out << "alpha[m],reflectivity[1],speed[m/s],delta[rad/s],gamma[rad^2/s^2/m^2],"
           "omega_av[rad/s],p_lz[1],r_center[1],r_edge[1]";
    if (spec.scan_sweeps)
      for (Scheme s : spec.schemes) {
        const char* n = scheme_name(s);
        out << fmt::format(",{0}_final_c1_sq[1],{0}_final_c2_sq[1],{0}_final_aL_sq[1],"
                           "{0}_final_aR_sq[1],{0}_max_abs_dE_over_E0[1]",
                           n);
      }
    out << '\n';
    for (const auto& en : entries) {
      const auto& p = models[en.ia].crossing;
      const double v = spec.scan_speeds[en.iv];
      std::vector<double> cols = {alphas[en.ia],
                                  reflectivity_of(spec, alphas[en.ia]),
                                  v,
                                  p.delta,
                                  p.gamma,
                                  p.omega_av,
                                  landau_zener_probability(p.delta, p.gamma, v),
                                  validity_ratio(p.delta, p.gamma, p.omega_av, 0.0, v),
                                  validity_ratio(p.delta, p.gamma, p.omega_av, spec.half_range, v)};
      for (const auto& r : en.results) {
        auto fa = r.final_adiabatic();
        auto fd = r.final_diabatic();
        cols.insert(cols.end(), {fa[0], fa[1], fd[0], fd[1], r.max_abs_dE});
      }
      std::string line;
      for (double c : cols) {
        if (!line.empty()) line.push_back(',');
        line += fmt17(c);
      }
      out << line << '\n';
    }
  });
  if (spec.scan_sweeps)
    write_atomic(summary_path, [&](std::ostream& out) {
      for (const auto& en : entries)
        for (const auto& line : en.summaries) out << line << '\n';
    });
  return outputs.commit();
}

std::vector<std::string> run_spectrum(const ScenarioSpec& spec, const RunOptions& opts) {
  spec.validate();
  const double alpha = spec.resolved_alpha();
  OutputSet outputs(opts.out_dir);
  const std::string csv_path = outputs.path(spec.name + "_spectrum.csv");
  const std::string fit_path = outputs.path(spec.name + "_spectrum_fit.json");

  const double L = spec.length;
  const double half = spec.spectrum_half_range > 0.0 ? spec.spectrum_half_range
                                                     : L / (4.0 * spec.pair);
  if (half >= 0.25 * L) throw ValidationError("spectrum.half_range must stay well inside the cavity");
  const double k_lo = kTwoPi * (spec.pair - spec.spectrum_pairs) / L - std::numbers::pi / L;
  const double k_hi = kTwoPi * (spec.pair + spec.spectrum_pairs) / L + std::numbers::pi / L;
  const int n = spec.spectrum_points;

  std::vector<SpectrumWindow> rows(n);
  std::vector<double> qs(n);
  for (int i = 0; i < n; ++i) qs[i] = -half + 2.0 * half * i / (n - 1);
  parallel_for(static_cast<size_t>(n), opts.jobs, [&](size_t i) {
    rows[i] = solve_spectrum(CavityConfig{L, alpha, qs[i]}, k_lo, k_hi);
  });

  FitOptions fo;
  fo.q_range = std::min(spec.half_range, 0.5 * half);
  CrossingParams p = fit_crossing_params(L, alpha, spec.pair, fo);

  write_atomic(csv_path, [&](std::ostream& out) {
    out << "q_m[m],length_difference[m],mode[1],k[1/m],omega[rad/s]\n";
    for (int i = 0; i < n; ++i)
      for (size_t m = 0; m < rows[i].modes.size(); ++m) {
        const auto& md = rows[i].modes[m];
        out << fmt17(qs[i]) << ',' << fmt17(2.0 * qs[i]) << ',' << m << ',' << fmt17(md.k)
            << ',' << fmt17(md.omega()) << '\n';
      }
  });
  write_atomic(fit_path, [&](std::ostream& out) {
    json j;
    std::vector<std::string> warnings;
    for (const auto& w : rows) warnings.insert(warnings.end(), w.warnings.begin(), w.warnings.end());
    j["scenario"] = spec.name;
    j["alpha_m"] = alpha;
    j["reflectivity"] = reflectivity_of(spec, alpha);
    j["pair"] = spec.pair;
    j["omega_av_rad_per_s"] = p.omega_av;
    j["delta_rad_per_s"] = p.delta;
    j["gap_rad_per_s"] = 2.0 * p.delta;
    j["delta_closed_form_rad_per_s"] = p.delta_analytic;
    j["gamma_rad2_per_s2_m2"] = p.gamma;
    j["gamma_closed_form_rad2_per_s2_m2"] = p.gamma_analytic;
    j["gap_fit_residual"] = p.gap_fit_residual;
    j["frequency_residual"] = p.frequency_residual;
    j["two_level"] = p.two_level;
    j["warnings"] = warnings;
    out << j.dump() << '\n';
  });
  return outputs.commit();
}

std::vector<std::string> run_quantum(const ScenarioSpec& spec, const RunOptions& opts) {
  spec.validate();
  const double alpha = spec.resolved_alpha();
  OutputSet outputs(opts.out_dir);
  const std::string csv_path = outputs.path(spec.name + "_quantum.csv");
  const std::string warn_path = outputs.path(spec.name + "_quantum_summary.json");

  const SweepModel model = model_for(spec, alpha);
  const auto& p = model.crossing;
  double speed = spec.quantum_speed;
  if (speed == 0.0 && (spec.speed || spec.half_duration)) speed = spec.trajectory().speed;

  const int n = spec.quantum_points;
  std::set<std::string> warnings;
  for (const auto& w : model.table->warnings()) warnings.insert(w);
  write_atomic(csv_path, [&](std::ostream& out) {
    out << "q_m[m],detuning[rad/s],g12_closed_form[1/m],g12_mixing_angle[1/m],"
           "g11_numeric[1/m],g12_numeric[1/m],g21_numeric[1/m],g22_numeric[1/m],"
           "dlnw1_dq[1/m],dlnw1_dq_exact[1/m],sqrt_w2_over_w1[1],expansion_parameter[1],"
           "adiabatic_squeezing[1/m],adiabatic_transfer[1/m],adiabatic_two_mode[1/m],"
           "diabatic_transfer[1/m],diabatic_two_mode[1/m],diabatic_single_mode[1/m],"
           "weighted_1[1/s],weighted_2[1/s],weighted_3[1/s]\n";
    for (int i = 0; i < n; ++i) {
      const double q = n == 1 ? 0.0 : -spec.half_range + 2.0 * spec.half_range * i / (n - 1);
      QuantumCoefficients qc = hamiltonian_coefficients(p, q, speed, spec.quantum_basis);
      for (const auto& w : qc.warnings) warnings.insert(w);
      auto tv = model.table->at(q);
      auto w3 = qc.weighted();
      std::vector<double> cols = {q,
                                  p.detuning(q),
                                  qc.g.g12,
                                  mixing_angle_g(p, q).g12,
                                  tv.f[CouplingTable::kG11],
                                  tv.f[CouplingTable::kG12],
                                  tv.f[CouplingTable::kG21],
                                  tv.f[CouplingTable::kG22],
                                  qc.dlnw1_dq,
                                  qc.dlnw1_dq_exact,
                                  qc.sqrt_w2_over_w1,
                                  qc.expansion_parameter,
                                  qc.adiabatic_squeezing,
                                  qc.adiabatic_transfer,
                                  qc.adiabatic_two_mode,
                                  qc.diabatic_transfer,
                                  qc.diabatic_two_mode,
                                  qc.diabatic_single_mode,
                                  w3[0],
                                  w3[1],
                                  w3[2]};
      std::string line;
      for (double c : cols) {
        if (!line.empty()) line.push_back(',');
        line += fmt17(c);
      }
      out << line << '\n';
    }
  });
  write_atomic(warn_path, [&](std::ostream& out) {
    json j;
    j["scenario"] = spec.name;
    j["alpha_m"] = alpha;
    j["speed_m_per_s"] = speed;
    j["basis"] = spec.quantum_basis == Basis::Adiabatic ? "adiabatic" : "diabatic";
    j["delta_rad_per_s"] = p.delta;
    j["gamma_rad2_per_s2_m2"] = p.gamma;
    j["omega_av_rad_per_s"] = p.omega_av;
    j["warnings"] = std::vector<std::string>(warnings.begin(), warnings.end());
    out << j.dump() << '\n';
  });
  return outputs.commit();
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  size_t column(const std::string& prefix) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i].rfind(prefix + "[", 0) == 0 || header[i] == prefix) return i;
    throw ValidationError("CSV lacks column '" + prefix + "'");
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(trim(cell));
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');)
      row.push_back(to_double(path + ":" + std::to_string(lineno), cell));
    if (row.size() != t.header.size())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": wrong column count");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

CompareMetrics compare_runs(const std::string& csv_a, const std::string& csv_b) {
  CsvTable a = read_csv(csv_a), b = read_csv(csv_b);
  if (a.rows.size() != b.rows.size() || a.rows.empty())
    throw ValidationError("runs have different tau grids (row counts differ)");
  const size_t ta = a.column("tau"), tb = b.column("tau");
  const size_t ea = a.column("dE_over_E0"), eb = b.column("dE_over_E0");
  const char* amp_cols[4][2] = {{"re_c1", "im_c1"}, {"re_c2", "im_c2"},
                                {"re_aL", "im_aL"}, {"re_aR", "im_aR"}};
  size_t ia[4][2], ib[4][2];
  for (int k = 0; k < 4; ++k)
    for (int c = 0; c < 2; ++c) {
      ia[k][c] = a.column(amp_cols[k][c]);
      ib[k][c] = b.column(amp_cols[k][c]);
    }
  CompareMetrics m;
  m.rows = a.rows.size();
  double sum_sq = 0.0;
  for (size_t i = 0; i < a.rows.size(); ++i) {
    const auto& ra = a.rows[i];
    const auto& rb = b.rows[i];
    if (std::abs(ra[ta] - rb[tb]) > 1e-12)
      throw ValidationError("runs have different tau grids at row " + std::to_string(i + 1));
    const double d = std::abs(ra[ea] - rb[eb]);
    m.max_dE = std::max(m.max_dE, d);
    sum_sq += d * d;
    for (int k = 0; k < 4; ++k) {
      const double pa = ra[ia[k][0]] * ra[ia[k][0]] + ra[ia[k][1]] * ra[ia[k][1]];
      const double pb = rb[ib[k][0]] * rb[ib[k][0]] + rb[ib[k][1]] * rb[ib[k][1]];
      double& slot = k < 2 ? m.max_adiabatic[k] : m.max_diabatic[k - 2];
      slot = std::max(slot, std::abs(pa - pb));
    }
  }
  m.rms_dE = std::sqrt(sum_sq / static_cast<double>(m.rows));
  return m;
}

std::string compare_json(const CompareMetrics& m) {
  json j;
  j["rows"] = m.rows;
  j["max_abs_dE_difference"] = m.max_dE;
  j["rms_dE_difference"] = m.rms_dE;
  j["max_adiabatic_population_difference"] = m.max_adiabatic;
  j["max_diabatic_population_difference"] = m.max_diabatic;
  return j.dump();
}

}  // namespace mim
