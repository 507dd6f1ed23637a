#pragma once

// Line-delimited metric records (one JSON object per update) and readers.

#include "mamt/harness/learner.hpp"

#include <filesystem>
#include <fstream>

namespace mamt::harness {

inline json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json doubles_to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_to_json(x));
  return a;
}

inline std::vector<double> json_to_doubles(const json& a, const std::string& key) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(number_or_inf(x, key));
  return v;
}

inline json update_to_json(const UpdateRecord& r, long env_steps) {
  json j{{"update", r.iteration},
         {"env_steps", env_steps},
         {"refreshed", r.refreshed},
         {"critic_loss", r.critic_mse},
         {"policy_kl", doubles_to_json(r.policy_kl)},
         {"epsilon", doubles_to_json(r.epsilon)}};
  double mk = 0.0;
  for (double v : r.policy_kl) mk += v / static_cast<double>(r.policy_kl.size());
  j["mean_policy_kl"] = mk;
  if (r.has_mamt) {
    j["coord_pre"] = matrix_to_json(r.coord_pre);
    j["coord_post"] = matrix_to_json(r.coord_post);
    j["d_ns"] = doubles_to_json(r.d_ns);
    j["d_ns_system"] = r.d_ns_system;
    j["kl_hat"] = doubles_to_json(r.kl_hat);
    j["l_ns"] = r.l_ns;
    j["modeling_loss"] = r.modeling_loss;
    j["objective_f"] = r.objective_f;
  }
  return j;
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open metrics file " + path.string());
  }
  void write(const json& j) { out_ << j.dump() << '\n'; }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

}  // namespace mamt::harness
