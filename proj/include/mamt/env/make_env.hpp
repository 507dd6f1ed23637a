#pragma once

#include "mamt/env/spread.hpp"
#include "mamt/env/tabular_game.hpp"

#include <memory>
#include <string>

namespace mamt::env {

/// Builds an environment from its configuration name:
/// spread | spread3-sep | spread3-mix | spread3-ful | tabular.
inline std::unique_ptr<Environment> make_env(const std::string& name, int horizon = 25, int spread_agents = 2) {
  if (name == "spread") return std::make_unique<Spread>(Spread::standard(spread_agents, horizon));
  if (name == "spread3-sep") return std::make_unique<Spread>(Spread::three(SpreadVariant::Sep, horizon));
  if (name == "spread3-mix") return std::make_unique<Spread>(Spread::three(SpreadVariant::Mix, horizon));
  if (name == "spread3-ful") return std::make_unique<Spread>(Spread::three(SpreadVariant::Ful, horizon));
  if (name == "tabular") return std::make_unique<TabularGame>();
  throw ConfigError("unknown environment '" + name + "'");
}

}  // namespace mamt::env
