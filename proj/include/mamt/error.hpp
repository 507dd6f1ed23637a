#pragma once

#include <stdexcept>
#include <string>

namespace mamt {

/// An action index outside an agent's action space.
class InvalidAction : public std::invalid_argument {
 public:
  InvalidAction(int agent, int action, int n_actions)
      : std::invalid_argument("agent " + std::to_string(agent) + ": action " + std::to_string(action) +
                              " outside [0, " + std::to_string(n_actions) + ")"),
        agent_(agent) {}
  int agent() const { return agent_; }

 private:
  int agent_;
};

/// The operation is not defined for this kind of object (e.g. exact
/// transition probabilities of a sampled environment).
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// KL(p || q) with q(x) = 0 < p(x), or distributions on different supports.
class DivergenceUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A joint action space too large to enumerate under the configured cap.
class EnumerationLimit : public std::length_error {
 public:
  using std::length_error::length_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric series the caller needs is absent from a run archive.
class MissingSeries : public std::runtime_error {
 public:
  explicit MissingSeries(const std::string& series)
      : std::runtime_error("missing metric series '" + series + "'"), series_(series) {}
  const std::string& series() const { return series_; }

 private:
  std::string series_;
};

}  // namespace mamt
