#include <iostream>

#include <CLI11.hpp>

#include "gnb/harness.hpp"

namespace {

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw gnb::config_error("--values: cannot parse '" + item + "'");
    }
  }
  return out;
}

void report(const gnb::RunResult& r) {
  for (const auto& s : r.seeds) {
    if (s.ok)
      std::cout << "seed " << s.seed << ": final regret " << s.final_regret() << " (" << s.seconds << " s)\n";
    else
      std::cout << "seed " << s.seed << ": FAILED: " << s.error << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph neural bandit simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::string out_dir;
  std::int64_t checkpoint_at = 0;
  bool resume = false;
  auto* run_cmd = app.add_subcommand("run", "run every seed of a config");
  run_cmd->add_option("--config", config_path, "INI config file")->required();
  run_cmd->add_option("--seed-override", seed_override, "run this single seed instead");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--checkpoint-at", checkpoint_at, "write checkpoint_seed{S}.json after this many rounds");
  run_cmd->add_flag("--resume", resume, "continue from checkpoint files in the output directory");

  std::string axis;
  std::string values;
  auto* sweep_cmd = app.add_subcommand("sweep", "one run per value of an axis");
  sweep_cmd->add_option("--config", config_path, "INI config file")->required();
  sweep_cmd->add_option("--axis", axis, "k, gamma, alpha or n_tilde")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory");

  auto* validate_cmd = app.add_subcommand("validate", "check a config and exit");
  validate_cmd->add_option("--config", config_path, "INI config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  gnb::RunConfig config;
  try {
    config = gnb::load_run_config(config_path);
    if (seed_override) config.seeds = {*seed_override};
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (checkpoint_at) config.checkpoint_at = checkpoint_at;
    config.validate();
    if (*validate_cmd) {
      std::cout << "ok: policy " << gnb::to_string(config.policy) << ", environment " << gnb::to_string(config.env.kind)
                << ", T=" << config.rounds << ", " << config.seeds.size() << " seed(s)\n";
      return 0;
    }
    if (*sweep_cmd) {
      const auto a = gnb::parse_sweep_axis(axis);
      const auto v = parse_values(values);
      if (v.empty()) throw gnb::config_error("sweep: values must be non-empty");
      for (double x : v) {
        gnb::RunConfig probe = config;
        gnb::apply_axis(probe, a, x);
      }
      const auto rows = gnb::sweep(config, a, v);
      bool ok = true;
      for (const auto& r : rows) {
        std::cout << axis << "=" << r.value << ": mean final regret " << r.mean_final << " +- " << r.std_final
                  << ", adjacency std " << r.adjacency_std << "\n";
        ok = ok && r.seeds_ok == config.seeds.size();
      }
      return ok ? 0 : 2;
    }
  } catch (const gnb::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const gnb::parse_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    gnb::RunOptions options;
    options.resume = resume;
    const auto result = gnb::run(config, options);
    report(result);
    std::cout << "wrote " << config.output_dir.string() << "\n";
    return result.all_ok() ? 0 : 2;
  } catch (const gnb::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
