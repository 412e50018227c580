#pragma once

#include <filesystem>

#include <json.hpp>

#include "crossview/generator.hpp"
#include "crossview/training.hpp"

namespace crossview {

// Merged operator-facing configuration: optimization settings plus model
// settings plus process knobs, loaded from a flat JSON file. Command-line
// flags override file values. Unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  GeneratorConfig generator;
  int threads = 0;  // 0 = hardware default
};

RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json generator_config_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

}  // namespace crossview
