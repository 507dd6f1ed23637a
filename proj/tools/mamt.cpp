// Command-line front end: train, verify-theorems, dilemma, plot.

#include "mamt/mamt.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace mamt;
using harness::ExperimentConfig;
using harness::json;

namespace {

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    cfg.set(key, value);
  }
  return cfg;
}

int cmd_train(const std::string& config, std::uint64_t seed, std::string out, const std::vector<std::string>& sets) {
  const auto cfg = load_config(config, sets);
  const auto s = cfg.resolve();
  if (out.empty())
    out = (std::filesystem::path(s.output_dir) / (to_string(s.algorithm) + "-" + s.env_name) / ("seed_" + std::to_string(seed)))
              .string();
  const auto sum = harness::run_experiment(cfg, seed, out, [](const harness::UpdateRecord& r) {
    if (r.iteration % 100 == 0) {
      double kl = 0.0;
      for (double v : r.policy_kl) kl += v / static_cast<double>(r.policy_kl.size());
      std::cerr << "update " << r.iteration << "  critic_mse " << r.critic_mse << "  policy_kl " << kl << '\n';
    }
  });
  std::cout << "run " << out << "\nenv_steps " << sum.env_steps << "\nupdates " << sum.updates << "\nfinal_reward "
            << sum.final_reward << "\nmean_policy_kl " << sum.mean_policy_kl << "\nseconds " << sum.seconds << '\n';
  return 0;
}

int cmd_verify(long trials, std::uint64_t seed, const std::string& csv) {
  const auto results = divergence::run_oracle_suite(trials, seed);
  bool ok = true;
  std::cout << "check                                                    trials  worst         tolerance  result\n";
  for (const auto& r : results) {
    std::cout << std::left << std::setw(57) << r.name << std::setw(8) << r.trials << std::setw(14) << r.worst
              << std::setw(11) << r.tolerance << (r.pass ? "PASS" : "FAIL") << '\n';
    ok = ok && r.pass;
  }
  std::ofstream out(csv);
  if (!out) throw std::runtime_error("cannot write " + csv);
  divergence::write_sweep_csv(out, divergence::transition_sweep());
  std::cout << "sweep written to " << csv << '\n';
  return ok ? 0 : 1;
}

int cmd_dilemma(const std::string& variant, const std::string& config, std::vector<std::uint64_t> seeds,
                const std::string& out, const std::vector<std::string>& sets) {
  auto cfg = load_config(config, sets);
  cfg.set("env.name", harness::dilemma_env(variant));
  if (seeds.empty()) seeds = cfg.resolve().seeds;
  const std::string dir = out.empty() ? (std::filesystem::path(cfg.resolve().output_dir) / ("dilemma-" + variant)).string() : out;
  const auto rep = harness::dilemma_study(cfg, seeds, dir);
  rep.write_table(std::cout);
  return 0;
}

int cmd_plot(const std::string& run, const std::string& out) {
  const auto rep = harness::emit_plots(run, out);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& p : rep.written) std::cout << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent trust-region training and divergence checks"};
  app.require_subcommand(1);

  std::string config, out, variant, run_dir, csv = "theorem_sweep.csv";
  std::uint64_t seed = 0, oracle_seed = 0;
  long trials = 1000;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sets;

  auto* train = app.add_subcommand("train", "Train one seed and write its run directory");
  train->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--out", out, "Run directory (default: <output_dir>/<algorithm>-<env>/seed_<N>)");
  train->add_option("--set", sets, "Override a config key, key=value")->take_all();

  auto* verify = app.add_subcommand("verify-theorems", "Run the divergence oracle suite");
  verify->add_option("--trials", trials, "Random instances per check")->check(CLI::PositiveNumber);
  verify->add_option("--seed", oracle_seed, "Random seed");
  verify->add_option("--csv", csv, "Where to write the m-sweep CSV");

  auto* dilemma = app.add_subcommand("dilemma", "Compare decomposition schemes on a three-agent Spread variant");
  dilemma->add_option("--variant", variant, "Coupling variant")->required()->check(CLI::IsMember({"sep", "mix", "ful"}));
  dilemma->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  dilemma->add_option("--seeds", seeds, "Seeds (default: config seeds)");
  dilemma->add_option("--out", out, "Output directory");
  dilemma->add_option("--set", sets, "Override a config key, key=value")->take_all();

  auto* plot = app.add_subcommand("plot", "Render charts for a run directory");
  plot->add_option("--run", run_dir, "Run directory or directory of seed_* runs")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", out, "Output directory (default: <run>/plots)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config, seed, out, sets);
    if (*verify) return cmd_verify(trials, oracle_seed, csv);
    if (*dilemma) return cmd_dilemma(variant, config, seeds, out, sets);
    if (*plot) return cmd_plot(run_dir, out);
  } catch (const MissingSeries& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
