#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

namespace mamt::mamd {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct MamdConfig {
  double discount = 0.99;
  double alpha = 0.01;  // entropy temperature, 1 / soft reward scale
  long delay = 100;     // iterations between refreshes of the old policy copy
  std::vector<double> epsilon;  // per-agent trust-region sizes; +inf disables the penalty
  double lr = 1e-3;
  double critic_clip = 20.0;
  double policy_clip = 0.5;
  double policy_reg = 1e-3;
  double critic_reg = 1e-3;
  double target_tau = 0.005;

  /// epsilon_i = total / n for every agent.
  static std::vector<double> uniform_split(double total, int n) {
    if (n < 1) throw std::invalid_argument("uniform_split: need at least one agent");
    return std::vector<double>(static_cast<std::size_t>(n), total / n);
  }

  void validate(int n_agents) const {
    if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("MamdConfig: discount must lie in (0, 1]");
    if (delay < 1) throw std::invalid_argument("MamdConfig: delay must be >= 1");
    if (static_cast<int>(epsilon.size()) != n_agents)
      throw std::invalid_argument("MamdConfig: one trust-region size per agent required");
    for (double e : epsilon)
      if (!(e > 0.0)) throw std::invalid_argument("MamdConfig: trust-region sizes must be positive");
    if (!(alpha >= 0.0)) throw std::invalid_argument("MamdConfig: alpha must be non-negative");
  }
};

}  // namespace mamt::mamd
