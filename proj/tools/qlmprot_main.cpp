// qlmprot - command-line front end. One subcommand per experiment kind; the
// config file must name the same experiment.
//
// exit codes: 0 success, 2 invalid input, 1 runtime failure.

#include "qlmprot/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 1;

void print_norms_report(const nlohmann::json& r) {
  auto num = [&](const char* key) { return r.at(key).get<double>(); };
  std::printf("kappa-norm estimate, L = %d, %s error, lambda = %g\n", r.at("L").get<int>(),
              r.at("error").get<std::string>().c_str(), num("lambda"));
  std::printf("  sequence          %s\n", r.at("sequence").get<std::string>().c_str());
  std::printf("  support rule      %s (%d diag, %d ndiag terms)\n", r.at("support_rule").get<std::string>().c_str(),
              r.at("terms_diag").get<int>(), r.at("terms_ndiag").get<int>());
  std::printf("  kappa0            %.4g\n", num("kappa0"));
  std::printf("  |V_diag|_kappa0   %.6g\n", num("norm_diag"));
  std::printf("  |V_ndiag|_kappa0  %.6g\n", num("norm_ndiag"));
  std::printf("  V0                %.6g J\n", num("V0"));
  std::printf("  bound on V        %.6g J\n", num("v_bound"));
  std::printf("  V_min             %.6g J (n* = %lld, kappa_n* = %.4g)\n", num("v_min"),
              r.at("n_star_at_v_min").get<long long>(), num("kappa_n_star"));
  std::printf("  V_min, large-n    %.6g J\n", num("v_min_asymptotic"));
}

struct Args {
  std::string config;
  std::string out;
  int threads = 1;
  bool ci_scale = false;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace qlmprot;

  CLI::App app{"Gauge-protection simulator for the U(1) quantum link model"};
  app.set_version_flag("--version", std::string(kCodeVersion));
  app.require_subcommand(1);

  Args args;
  const std::vector<std::pair<Experiment, std::string>> commands{
      {Experiment::trajectory, "Quench trajectories eps(t) and running averages, one CSV per V"},
      {Experiment::v_scan, "Infinite-time violation vs J/V for quadratic, compliant and noncompliant protection"},
      {Experiment::circuit, "Trotterized circuit trajectories, optionally locating V_ideal"},
      {Experiment::circuit_collapse, "Circuit eps_avg over (dt, V dt) for the rescaling collapse"},
      {Experiment::sequence_search, "Compliance, protection gap, sequence search and degeneracy diagnostics"},
      {Experiment::norm_estimate, "kappa-norm estimates of V0 and V_min"},
      {Experiment::zeno_scan, "Distance to the Zeno-limit evolution vs V"},
  };
  for (const auto& [experiment, help] : commands) {
    auto* sub = app.add_subcommand(std::string(subcommand_of(experiment)), help);
    sub->add_option("--config", args.config, "JSON experiment config")->required();
    sub->add_option("--out", args.out, "Output directory (default: output_path from the config)");
    sub->add_option("--threads", args.threads, "Worker threads for independent grid points")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--ci-scale", args.ci_scale, "Reduced grids: L=4, 40 time points, 8 V points");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  std::string command = chosen->get_name();
  try {
    ExperimentConfig config = load_config(args.config);
    if (subcommand_of(config.experiment) != command)
      throw ValidationError({"experiment: config describes \"" + std::string(to_string(config.experiment)) +
                             "\", which runs under the \"" + std::string(subcommand_of(config.experiment)) +
                             "\" subcommand, not \"" + command + "\""});
    RunOptions options;
    options.out_dir = args.out;
    options.threads = args.threads;
    options.ci_scale = args.ci_scale;
    options.command = command;
    const RunResult result = run_experiment(std::move(config), options);
    if (command == "norms") print_norms_report(result.summary);
    std::fflush(stdout);
    for (const auto& f : result.files) std::cout << f.string() << '\n';
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "qlmprot: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "qlmprot: invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "qlmprot: error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
