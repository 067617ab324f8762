#include <CLI11.hpp>
#include <iostream>

#include "parahom/error.hpp"
#include "parahom/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and spectral experiments for parabolic equations in random environments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out, "Override the output directory");

  std::string validate_path;
  auto* val = app.add_subcommand("validate", "Check a config file without running it");
  val->add_option("--config", validate_path, "Experiment config (JSON)")->required();

  auto* list = app.add_subcommand("list-experiments", "Print the experiment names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : parahom::kExitConfigError;
  }

  if (list->parsed()) {
    for (const auto& n : parahom::experiment_names()) std::cout << n << "\n";
    return 0;
  }
  if (val->parsed()) {
    const auto diags = parahom::validate_file(validate_path);
    for (const auto& d : diags) std::cout << d << "\n";
    if (diags.empty()) std::cout << "ok\n";
    return diags.empty() ? 0 : parahom::kExitConfigError;
  }

  std::vector<std::string> diags;
  auto cfg = parahom::load_config(config_path, diags);
  if (!cfg) {
    for (const auto& d : diags) std::cerr << d << "\n";
    return parahom::kExitConfigError;
  }
  if (seed) {
    cfg->seed = *seed;
    cfg->env.seed = *seed;
  }
  if (out) cfg->output_dir = *out;
  const int workers = parahom::configure_workers();
  try {
    const auto man = parahom::run(*cfg);
    std::cout << "experiment " << man.experiment << " seed " << man.seed << " workers " << workers << "\n";
    for (const auto& c : man.checks) std::cout << "  " << to_string(c.verdict) << "  " << c.name << ": " << c.detail << "\n";
    for (const auto& [stage, f] : man.files) std::cout << "  wrote " << f.path.string() << " " << f.sha256 << "\n";
    std::cout << "verdict " << to_string(man.verdict) << " (" << man.wall_seconds << " s)\n";
    return man.exit_code();
  } catch (const parahom::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return parahom::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return parahom::kExitRuntimeError;
  }
}
