#pragma once

#include <json.hpp>

#include "pcf/mlp.hpp"
#include "pcf/ode.hpp"

namespace pcf {

// Checkpoint layout: layer sizes, activation name, flat row-major weights.
nlohmann::json mlp_to_json(const MlpParams& p);
MlpParams mlp_from_json(const nlohmann::json& j);

nlohmann::json solver_to_json(const SolverConfig& s);
SolverConfig solver_from_json(const nlohmann::json& j);

// Load + parse with ValidationError on failure.
nlohmann::json load_json_file(const std::filesystem::path& file);
void save_json_file(const std::filesystem::path& file,
                    const nlohmann::json& j);

}  // namespace pcf
