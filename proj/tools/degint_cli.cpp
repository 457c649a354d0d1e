// degint: scenario runner for the integrable-systems library.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "degint/scenarios.hpp"

int main(int argc, char** argv) {
  using degint::cli::ScenarioConfig;
  CLI::App app{"Reproducible experiments for degenerately integrable systems"};
  app.set_config("--config", "", "TOML or INI file with option values; command-line flags take precedence");

  ScenarioConfig cfg;
  double t_max = 0.0, dt = 0.0;
  bool list = false;
  app.add_flag("--list", list, "Print the available scenarios and exit");
  app.add_option("--scenario", cfg.scenario, "Scenario name (see --list)");
  app.add_option("--n", cfg.n, "Matrix size / number of particles");
  app.add_option("--kappa-re,--kappa", cfg.kappa_re, "Real part of the coupling kappa");
  app.add_option("--kappa-im", cfg.kappa_im, "Imaginary part of kappa");
  app.add_option("--q-re,--q", cfg.q_re, "Real part of the deformation parameter q");
  app.add_option("--q-im", cfg.q_im, "Imaginary part of q");
  app.add_option("--t-max", t_max, "Integration horizon (scenario default when omitted)");
  app.add_option("--dt", dt, "Fixed step / output sampling interval");
  app.add_option("--tol", cfg.tol, "Adaptive integrator tolerance, in [1e-13, 1e-6]");
  app.add_option("--seed", cfg.seed, "Seed of all random sampling");
  app.add_option("--samples", cfg.samples, "Number of seeded samples for oracle suites");
  app.add_option("--out-csv", cfg.out_csv, "Trajectory / sample table");
  app.add_option("--out-json", cfg.out_json, "Report (printed to stdout when omitted)");
  app.add_option("--out-svg", cfg.out_svg, "Line plot of selected columns");
  app.add_flag("--timing", cfg.timing, "Record elapsed_seconds in the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : degint::cli::kInvalidConfig;
  }
  if (list) {
    std::cout << degint::cli::list_scenarios();
    return 0;
  }
  if (cfg.scenario.empty()) {
    std::cerr << "invalid configuration: --scenario is required (use --list)\n";
    return degint::cli::kInvalidConfig;
  }
  if (app.count("--t-max") > 0) cfg.t_max = t_max;
  if (app.count("--dt") > 0) cfg.dt = dt;
  return degint::cli::run(cfg, std::cout, std::cerr);
}
