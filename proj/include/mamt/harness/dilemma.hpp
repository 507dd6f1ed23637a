#pragma once

// Decomposition study on the three-agent Spread variants: the unconstrained
// baseline, uniform per-agent budgets, and budgets only on coupled agents,
// run over the same seeds. Algorithms whose per-agent budgets coincide share
// one set of runs.

#include "mamt/harness/run.hpp"

#include <cmath>
#include <ostream>

namespace mamt::harness {

struct DilemmaRow {
  Algorithm algorithm = Algorithm::Baseline;
  std::vector<double> epsilon;
  std::vector<double> final_rewards;  // one per seed
  double mean = 0.0;
  double stddev = 0.0;
  std::string shared_with;  // non-empty when the runs of another row were reused
};

struct DilemmaReport {
  std::string env;
  std::vector<std::uint64_t> seeds;
  std::vector<DilemmaRow> rows;

  const DilemmaRow& row(Algorithm a) const {
    for (const auto& r : rows)
      if (r.algorithm == a) return r;
    throw std::out_of_range("DilemmaReport: no row for " + to_string(a));
  }

  json to_json() const {
    json j{{"env", env}, {"seeds", seeds}, {"rows", json::array()}};
    for (const auto& r : rows)
      j["rows"].push_back(json{{"algorithm", to_string(r.algorithm)},
                               {"epsilon", doubles_to_json(r.epsilon)},
                               {"final_rewards", r.final_rewards},
                               {"mean", r.mean},
                               {"std", r.stddev},
                               {"shared_with", r.shared_with}});
    return j;
  }

  /// Rows ordered by mean final reward, best first.
  void write_table(std::ostream& out) const {
    auto sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.mean > b.mean; });
    out << env << " (" << seeds.size() << " seeds)\n";
    out << "rank  algorithm  mean_final_reward  std\n";
    int rank = 1;
    for (const auto& r : sorted) {
      out << rank++ << "     " << to_string(r.algorithm) << "  " << r.mean << "  " << r.stddev;
      if (!r.shared_with.empty()) out << "  (same budgets as " << r.shared_with << ")";
      out << '\n';
    }
  }
};

inline std::string dilemma_env(const std::string& variant) {
  if (variant == "sep" || variant == "mix" || variant == "ful") return "spread3-" + variant;
  throw ConfigError("unknown dilemma variant '" + variant + "' (expected sep | mix | ful)");
}

/// `base` supplies every setting except the algorithm and env name, which
/// must be a spread3 variant. Runs go to out_dir/<algorithm>/seed_<k> when
/// out_dir is non-empty.
inline DilemmaReport dilemma_study(const ExperimentConfig& base, std::span<const std::uint64_t> seeds,
                                   const std::filesystem::path& out_dir = {}) {
  const auto env_name = base.get("env.name").get<std::string>();
  if (env_name.rfind("spread3-", 0) != 0)
    throw ConfigError("dilemma study needs a spread3-sep | spread3-mix | spread3-ful environment, got '" + env_name + "'");
  if (seeds.empty()) throw ConfigError("dilemma study needs at least one seed");

  DilemmaReport rep;
  rep.env = env_name;
  rep.seeds.assign(seeds.begin(), seeds.end());
  const RunSettings s0 = base.resolve();
  const auto proto = env::make_env(s0.env_name, s0.horizon, s0.spread_agents);

  for (Algorithm alg : {Algorithm::Baseline, Algorithm::Mamd, Algorithm::MamdOp}) {
    DilemmaRow row;
    row.algorithm = alg;
    row.epsilon = initial_epsilon(alg, s0, proto->coupling());
    for (const auto& prev : rep.rows) {
      if (prev.epsilon == row.epsilon) {
        row.final_rewards = prev.final_rewards;
        row.shared_with = to_string(prev.algorithm);
        break;
      }
    }
    if (row.shared_with.empty()) {
      ExperimentConfig cfg = base;
      cfg.set("algorithm", to_string(alg));
      for (std::uint64_t seed : seeds) {
        const auto dir = out_dir.empty() ? std::filesystem::path{}
                                         : out_dir / to_string(alg) / ("seed_" + std::to_string(seed));
        row.final_rewards.push_back(run_experiment(cfg, seed, dir).final_reward);
      }
    }
    const double k = static_cast<double>(row.final_rewards.size());
    for (double r : row.final_rewards) row.mean += r / k;
    for (double r : row.final_rewards) row.stddev += (r - row.mean) * (r - row.mean) / k;
    row.stddev = std::sqrt(row.stddev);
    rep.rows.push_back(std::move(row));
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json(out_dir / "dilemma.json", rep.to_json());
    std::ofstream t(out_dir / "dilemma.txt");
    rep.write_table(t);
  }
  return rep;
}

}  // namespace mamt::harness
