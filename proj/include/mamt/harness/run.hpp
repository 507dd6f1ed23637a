#pragma once

// Rollout/update loop for one seed: act in parallel environments, store
// transitions, run update epochs every `steps_per_update` environment steps,
// evaluate greedily at a fixed interval, and write metrics, a summary, the
// config snapshot and checkpoints under the run directory.

#include "mamt/env/make_env.hpp"
#include "mamt/harness/checkpoint.hpp"
#include "mamt/harness/replay_buffer.hpp"

#include <chrono>
#include <filesystem>
#include <thread>

namespace mamt::harness {

struct RunSummary {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  long env_steps = 0;
  long updates = 0;
  double final_reward = 0.0;        // mean eval return over the last 10% of evaluations
  double mean_policy_kl = 0.0;      // mean over updates and agents
  std::vector<double> eval_returns;
  double seconds = 0.0;
};

/// Per-episode return: sum over steps of the agent-mean reward.
inline double mean_reward(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v;
  return s / static_cast<double>(r.size());
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double evaluate(const Learner& learner, const env::Environment& proto, int episodes, nn::Rng& rng) {
  auto e = proto.clone();
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto obs = e->reset(rng());
    double ret = 0.0;
    while (!e->episode_done()) {
      const auto a = learner.act({obs}, rng, true);
      auto res = e->step(a.front());
      ret += mean_reward(res.rewards);
      obs = std::move(res.obs);
    }
    total += ret;
  }
  return total / episodes;
}

/// Runs one seed. When `out_dir` is empty nothing is written to disk.
/// `on_update` (optional) sees every update record.
inline RunSummary run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                                 const std::function<void(const UpdateRecord&)>& on_update = {}) {
  const auto start = std::chrono::steady_clock::now();
  RunSettings s = cfg.resolve();
  s.seed = seed;
  auto proto = env::make_env(s.env_name, s.horizon, s.spread_agents);
  const auto& spec = proto->spec();
  Learner learner(s, spec, proto->coupling(), seed);

  std::vector<int> obs_dims;
  for (const auto& o : spec.observation_spaces) obs_dims.push_back(o.dim);
  ReplayBuffer buffer(s.buffer_size, obs_dims);

  const bool write = !out_dir.empty();
  std::optional<JsonlWriter> metrics;
  std::optional<JsonlWriter> evals;
  if (write) {
    std::filesystem::create_directories(out_dir);
    json snap = cfg.snapshot();
    snap["config"]["seed"] = seed;
    write_json(out_dir / "config.json", snap);
    metrics.emplace(out_dir / "metrics.jsonl");
    evals.emplace(out_dir / "eval.jsonl");
  }

  nn::Rng act_rng(mix_seed(seed, 1));
  nn::Rng eval_rng(mix_seed(seed, 2));
  nn::Rng reset_rng(mix_seed(seed, 3));

  std::vector<std::unique_ptr<env::Environment>> envs;
  std::vector<env::JointObservation> obs;
  std::vector<double> ep_return(static_cast<std::size_t>(s.n_parallel), 0.0);
  for (int k = 0; k < s.n_parallel; ++k) {
    envs.push_back(proto->clone());
    obs.push_back(envs.back()->reset(reset_rng()));
  }

  RunSummary sum;
  sum.dir = out_dir;
  sum.seed = seed;
  long since_update = 0;
  long next_eval = s.eval_interval;
  double kl_acc = 0.0;
  std::vector<double> train_returns;

  std::vector<env::StepResult> results(envs.size());
  while (sum.env_steps < s.step_size) {
    const auto actions = learner.act(obs, act_rng, false);
    auto step_range = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k) results[k] = envs[k]->step(actions[k]);
    };
    if (s.rollout_workers > 1 && envs.size() > 1) {
      std::vector<std::thread> pool;
      const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(s.rollout_workers), envs.size());
      for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&step_range, lo = t * envs.size() / w, hi = (t + 1) * envs.size() / w] { step_range(lo, hi); });
      for (auto& th : pool) th.join();
    } else {
      step_range(0, envs.size());
    }
    for (std::size_t k = 0; k < envs.size(); ++k) {
      auto& res = results[k];
      env::TransitionRecord t{obs[k], actions[k], res.rewards, res.obs, res.dones};
      buffer.push(t);
      ep_return[k] += mean_reward(res.rewards);
      if (envs[k]->episode_done()) {
        train_returns.push_back(ep_return[k]);
        ep_return[k] = 0.0;
        obs[k] = envs[k]->reset(reset_rng());
      } else {
        obs[k] = std::move(res.obs);
      }
    }
    sum.env_steps += static_cast<long>(envs.size());
    since_update += static_cast<long>(envs.size());

    if (since_update >= s.steps_per_update && buffer.size() >= s.batch_size) {
      since_update -= s.steps_per_update;
      for (int ep = 0; ep < s.epochs_per_step; ++ep) {
        auto batch = buffer.sample(s.batch_size, act_rng);
        const auto rec = learner.update(batch);
        for (double v : rec.policy_kl) kl_acc += v / static_cast<double>(rec.policy_kl.size());
        ++sum.updates;
        if (on_update) on_update(rec);
        if (metrics) {
          json j = update_to_json(rec, sum.env_steps);
          if (!train_returns.empty()) j["train_return"] = train_returns.back();
          metrics->write(j);
        }
        if (write && s.checkpoint_every > 0 && sum.updates % s.checkpoint_every == 0)
          write_json(out_dir / "checkpoint.json", make_checkpoint(learner, sum.env_steps));
      }
    } else if (since_update >= s.steps_per_update) {
      since_update = 0;
    }

    if (sum.env_steps >= next_eval) {
      next_eval += s.eval_interval;
      const double r = evaluate(learner, *proto, s.eval_episodes, eval_rng);
      sum.eval_returns.push_back(r);
      if (evals) evals->write(json{{"env_steps", sum.env_steps}, {"updates", sum.updates}, {"eval_return", r}});
    }
  }

  if (sum.eval_returns.empty()) sum.eval_returns.push_back(evaluate(learner, *proto, s.eval_episodes, eval_rng));
  const std::size_t tail = std::max<std::size_t>(1, sum.eval_returns.size() / 10);
  for (std::size_t k = sum.eval_returns.size() - tail; k < sum.eval_returns.size(); ++k)
    sum.final_reward += sum.eval_returns[k] / static_cast<double>(tail);
  sum.mean_policy_kl = sum.updates > 0 ? kl_acc / static_cast<double>(sum.updates) : 0.0;
  sum.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (write) {
    metrics->flush();
    evals->flush();
    write_json(out_dir / "checkpoint.json", make_checkpoint(learner, sum.env_steps));
    write_json(out_dir / "summary.json", json{{"algorithm", to_string(s.algorithm)},
                                              {"env", s.env_name},
                                              {"seed", seed},
                                              {"env_steps", sum.env_steps},
                                              {"updates", sum.updates},
                                              {"final_reward", sum.final_reward},
                                              {"mean_policy_kl", sum.mean_policy_kl},
                                              {"eval_returns", sum.eval_returns},
                                              {"seconds", sum.seconds}});
  }
  return sum;
}

}  // namespace mamt::harness
