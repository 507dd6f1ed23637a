#pragma once

// Behaviour, target and delayed ("old") parameter sets.

#include "mamt/nets/critic.hpp"

namespace mamt::nets {

enum class TargetMode { Soft, Hard };

/// soft: dst <- tau * src + (1 - tau) * dst; hard: dst <- src.
inline void target_update(Params& dst, const Params& src, TargetMode mode, double tau = 1.0) {
  if (dst.size() != src.size()) throw std::invalid_argument("target_update: parameter count mismatch");
  if (mode == TargetMode::Hard) {
    nn::copy_values(dst, src);
    return;
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("target_update: tau must lie in (0, 1]");
  for (std::size_t k = 0; k < dst.size(); ++k) {
    auto& d = dst[k].mutable_value();
    d = tau * src[k].value() + (1.0 - tau) * d;
  }
}

struct PolicySnapshot {
  std::vector<Policy> behavior;
  std::vector<Policy> target;
  std::vector<Policy> old;
  AttentionCritic critic;
  AttentionCritic target_critic;

  static PolicySnapshot create(std::vector<Policy> policies, AttentionCritic critic) {
    PolicySnapshot s;
    for (const auto& p : policies) {
      s.target.push_back(p.deep_copy());
      s.old.push_back(p.deep_copy());
    }
    s.behavior = std::move(policies);
    s.target_critic = critic.deep_copy();
    s.critic = std::move(critic);
    return s;
  }

  void refresh_old() {
    for (std::size_t i = 0; i < behavior.size(); ++i) {
      auto dst = old[i].parameters();
      nn::copy_values(dst, behavior[i].parameters());
    }
  }

  void update_targets(TargetMode mode, double tau) {
    for (std::size_t i = 0; i < behavior.size(); ++i) {
      auto dst = target[i].parameters();
      target_update(dst, behavior[i].parameters(), mode, tau);
    }
    auto dst = target_critic.parameters();
    target_update(dst, critic.parameters(), mode, tau);
  }
};

/// Refreshes the old copy when `iteration` is a multiple of `delay`.
/// Returns whether a refresh happened.
inline bool mirror_descent_tick(long iteration, PolicySnapshot& snapshot, long delay) {
  if (delay < 1) throw std::invalid_argument("mirror_descent_tick: delay must be >= 1");
  if (iteration % delay != 0) return false;
  snapshot.refresh_old();
  return true;
}

}  // namespace mamt::nets
