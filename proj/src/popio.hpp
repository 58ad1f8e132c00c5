#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "population.hpp"

namespace scerm {

struct SourceMeta {
  double r = 0, alpha = 1, L = 1, Q = 0;
};

struct LoadedPopulation {
  FinitePopulation pop;
  std::optional<SourceMeta> source;
};

// Accepts either {"loss": ..., "atoms": [...]} or {"generator": {...}}.
// Errors are ConfigError messages prefixed with the offending path.
LoadedPopulation population_from_json(const nlohmann::json& doc, const std::string& path = "population");

nlohmann::json population_to_json(const FinitePopulation& pop);

}  // namespace scerm
