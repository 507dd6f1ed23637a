#pragma once

// Randomised and grid checks of the divergence identities, shared by the CLI
// `verify-theorems` command and the tests.

#include "mamt/divergence/joint_kl.hpp"
#include "mamt/divergence/stationarity.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace mamt::divergence {

/// Random point on the simplex; `floor` keeps every entry away from zero.
inline DiscreteDistribution random_distribution(int k, std::mt19937_64& rng, double floor = 1e-3) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double s = 0.0;
  for (double& v : p) s += (v = g(rng) + floor);
  for (double& v : p) v /= s;
  return DiscreteDistribution(std::move(p));
}

inline JointDistribution random_joint(const std::vector<int>& dims, std::mt19937_64& rng) {
  std::int64_t total = 1;
  for (int d : dims) total *= d;
  const auto d = random_distribution(static_cast<int>(total), rng);
  return JointDistribution(dims, std::vector<double>(d.probs().begin(), d.probs().end()));
}

inline JointDistribution random_factored(const std::vector<int>& dims, std::mt19937_64& rng) {
  std::vector<DiscreteDistribution> f;
  for (int d : dims) f.push_back(random_distribution(d, rng));
  return JointDistribution::product(f);
}

struct MeanFieldInstance {
  JointPolicy pi;
  JointPolicy old;
  std::vector<WeightedObservation> batch;
};

/// n agents with 2-4 actions and 1-3 local observations each, and a
/// weighted batch covering every joint observation.
inline MeanFieldInstance random_meanfield_instance(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> na(2, 4), no(1, 3);
  MeanFieldInstance inst;
  std::vector<int> n_obs;
  for (int i = 0; i < n; ++i) {
    const int a = na(rng);
    const int o = no(rng);
    n_obs.push_back(o);
    std::vector<DiscreteDistribution> rp, ro;
    for (int k = 0; k < o; ++k) {
      rp.push_back(random_distribution(a, rng));
      ro.push_back(random_distribution(a, rng));
    }
    inst.pi.emplace_back(std::move(rp));
    inst.old.emplace_back(std::move(ro));
  }
  std::uniform_real_distribution<double> w(0.1, 1.0);
  JointObservationIndex idx(static_cast<std::size_t>(n), 0);
  while (true) {
    inst.batch.push_back({idx, w(rng)});
    int k = n - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == n_obs[static_cast<std::size_t>(k)]) idx[static_cast<std::size_t>(k--)] = 0;
    if (k < 0) break;
  }
  return inst;
}

struct CheckResult {
  std::string name;
  long trials = 0;
  double worst = 0.0;      // largest error or smallest margin, per check
  double tolerance = 0.0;
  bool pass = false;
  double seconds = 0.0;
};

/// max |exact - meanfield| over random instances with n in {2, 3, 4}.
inline CheckResult check_decomposition(long trials, std::uint64_t seed, double tol = 1e-8) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  CheckResult r{"joint KL equals sum of local KLs", trials, 0.0, tol, true, 0.0};
  for (long t = 0; t < trials; ++t) {
    const int n = 2 + static_cast<int>(t % 3);
    const auto inst = random_meanfield_instance(n, rng);
    const double err = std::abs(joint_kl_exact(inst.pi, inst.old, inst.batch) - joint_kl_meanfield(inst.pi, inst.old, inst.batch));
    r.worst = std::max(r.worst, err);
  }
  r.pass = r.worst <= tol;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// min margin of the average-divergence bound over random pairs.
inline CheckResult check_average_bound(long trials, bool correlated, std::uint64_t seed, double tol = 1e-10) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nd(2, 4), ad(2, 3);
  CheckResult r{correlated ? "average bound, correlated pairs" : "average bound, factored pairs", trials,
                std::numeric_limits<double>::infinity(), tol, true, 0.0};
  for (long t = 0; t < trials; ++t) {
    std::vector<int> dims(static_cast<std::size_t>(nd(rng)));
    for (int& d : dims) d = ad(rng);
    const auto p = correlated ? random_joint(dims, rng) : random_factored(dims, rng);
    const auto q = correlated ? random_joint(dims, rng) : random_factored(dims, rng);
    r.worst = std::min(r.worst, verify_theorem2(p, q));
  }
  r.pass = r.worst >= -tol;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

struct SweepRow {
  double m = 0.0;
  double transition_kl_a1 = 0.0;  // own action 0
  double transition_kl_a2 = 0.0;  // own action 1
  double policy_kl = 0.0;
};

/// m on k / (points + 1), k = 1..points (0.05 steps by default), for the opponent change (m, 1-m) -> (m/2, 1-m/2).
inline std::vector<SweepRow> transition_sweep(int points = 19) {
  env::TabularGame game;
  std::vector<SweepRow> rows;
  for (int k = 1; k <= points; ++k) {
    const env::TabularGameSpec s{static_cast<double>(k) / (points + 1)};
    rows.push_back({s.m, transition_kl(game, s, 0), transition_kl(game, s, 1), policy_kl(s)});
  }
  return rows;
}

/// Monotone in m and bounded by the opponent's own policy KL.
inline CheckResult check_transition_sweep(const std::vector<SweepRow>& rows) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r{"transition KL below opponent policy KL, increasing in m", static_cast<long>(rows.size()),
                std::numeric_limits<double>::infinity(), 0.0, true, 0.0};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    r.worst = std::min(r.worst, rows[k].policy_kl - std::max(rows[k].transition_kl_a1, rows[k].transition_kl_a2));
    if (k > 0 && !(rows[k].transition_kl_a1 > rows[k - 1].transition_kl_a1 && rows[k].policy_kl > rows[k - 1].policy_kl))
      r.pass = false;
  }
  r.pass = r.pass && r.worst >= 0.0;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::vector<CheckResult> run_oracle_suite(long trials = 1000, std::uint64_t seed = 0) {
  return {check_decomposition(trials, seed), check_average_bound(trials, false, seed + 1),
          check_average_bound(trials, true, seed + 2), check_transition_sweep(transition_sweep())};
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "m,transition_kl_a1,transition_kl_a2,policy_kl\n";
  out.precision(17);
  for (const auto& r : rows) out << r.m << ',' << r.transition_kl_a1 << ',' << r.transition_kl_a2 << ',' << r.policy_kl << '\n';
}

}  // namespace mamt::divergence
