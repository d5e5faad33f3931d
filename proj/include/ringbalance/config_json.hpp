#pragma once

#include <filesystem>

#include <json.hpp>

#include "ringbalance/core.hpp"

namespace ringbalance {

// Missing fields keep their ExperimentConfig defaults. Throws ConfigError on
// unknown keys or wrongly typed values.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace ringbalance
