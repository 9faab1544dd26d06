#pragma once

#include <json.hpp>
#include <string>

#include "pfd/geneval.hpp"

namespace pfd {

// Distribution documents:
//   {"type":"gaussian","mean":[...],"cov":[[...]]}
//   {"type":"gmm","components":[{"weight":w,"mean":[...],"cov":[[...]]}]}
//   {"type":"empirical","atoms":[[...]]}
nlohmann::json to_json(const DistributionSpec& spec);
DistributionSpec distribution_from_json(const nlohmann::json& j);
DistributionSpec load_distribution(const std::string& path);

nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
Vector vector_from_json(const nlohmann::json& j);

// "identity" or {"linear": [[...]]}; the CLI form linear:FILE loads the
// matrix from a JSON file (bare [[...]] or {"matrix": [[...]]}).
Descriptor descriptor_from_json(const nlohmann::json& j);
Descriptor descriptor_from_cli(const std::string& value);

// {"method":"heun"|"euler","steps":n,"sigma_max":...,"sigma_min":...,"rho":...}
SolverConfig solver_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SolverConfig& cfg);

// Scenario document:
// {"data": <spec>, "model": <spec>, "training_set": <empirical spec or [[...]]>,
//  "noise": {"samples":M,"seed":S,"sigma_max":...}, "solver": {...},
//  "descriptor": ..., "training_seed": ...}
EvaluationScenario scenario_from_json(const nlohmann::json& j);
EvaluationScenario load_scenario(const std::string& path);

}  // namespace pfd
