#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "mim/mim.h"

namespace {

int exit_code(mim_status st) {
  switch (st) {
    case MIM_OK: return 0;
    case MIM_ERR_NUMERICAL: return 3;
    case MIM_ERR_VALIDATION:
    case MIM_ERR_IO: return 2;
    default: return 1;
  }
}

int report(mim_status st, const char* verb) {
  if (st != MIM_OK) std::fprintf(stderr, "mimsim %s: %s\n", verb, mim_last_error());
  return exit_code(st);
}

using Runner = mim_status (*)(const mim_scenario*, const mim_run_options*, mim_outputs**);

int run_verb(const char* verb, Runner runner, const std::string& config, const std::string& out,
             int jobs, bool seed_check) {
  mim_scenario* sc = nullptr;
  mim_status st = config.empty() ? mim_scenario_parse("", &sc)
                                 : mim_scenario_load(config.c_str(), &sc);
  if (st != MIM_OK) return report(st, verb);
  mim_run_options opts{out.c_str(), jobs, seed_check ? 1 : 0};
  mim_outputs* files = nullptr;
  st = runner(sc, &opts, &files);
  mim_scenario_free(sc);
  if (st != MIM_OK) return report(st, verb);
  for (size_t i = 0; i < mim_outputs_count(files); ++i)
    std::printf("%s\n", mim_outputs_path(files, i));
  mim_outputs_free(files);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-membrane double-cavity simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mim_version()));

  std::string config, out = ".";
  int jobs = 1;
  bool seed_check = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Scenario file (INI)")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_option("--jobs", jobs, "Parallel workers")->check(CLI::PositiveNumber);
  };

  auto* spectrum = app.add_subcommand("solve-spectrum", "Mode network around the crossing pair");
  add_common(spectrum);
  auto* sweep = app.add_subcommand("sweep", "Integrate one sweep with the configured schemes");
  add_common(sweep);
  sweep->add_flag("--seed-check", seed_check, "Also run the step-halving check");
  auto* scan = app.add_subcommand("scan", "Speed by membrane-strength grid");
  add_common(scan);
  auto* quantum = app.add_subcommand("quantum-coeffs", "Quantum Hamiltonian prefactors");
  add_common(quantum);

  auto* compare = app.add_subcommand("compare", "Difference metrics of two sweep CSVs");
  std::string csv_a, csv_b, json_out;
  compare->add_option("first", csv_a, "First CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("second", csv_b, "Second CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("--json", json_out, "Also write the metrics here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*spectrum) return run_verb("solve-spectrum", mim_solve_spectrum, config, out, jobs, false);
  if (*sweep) return run_verb("sweep", mim_run_sweep, config, out, jobs, seed_check);
  if (*scan) return run_verb("scan", mim_scan, config, out, jobs, false);
  if (*quantum) return run_verb("quantum-coeffs", mim_quantum_coeffs, config, out, jobs, false);

  mim_compare_metrics m{};
  mim_status st = mim_compare_csv(csv_a.c_str(), csv_b.c_str(),
                                  json_out.empty() ? nullptr : json_out.c_str(), &m);
  if (st != MIM_OK) return report(st, "compare");
  std::printf(
      "{\"rows\":%zu,\"max_abs_dE_difference\":%.17g,\"rms_dE_difference\":%.17g,"
      "\"max_adiabatic_population_difference\":[%.17g,%.17g],"
      "\"max_diabatic_population_difference\":[%.17g,%.17g]}\n",
      m.rows, m.max_dE, m.rms_dE, m.max_adiabatic[0], m.max_adiabatic[1], m.max_diabatic[0],
      m.max_diabatic[1]);
  return 0;
}
