#pragma once

// Model checkpoint container, little-endian:
//   "SDCK" | u32 version | u32 header_len | header (UTF-8 JSON with the model
//   config and free-form metadata) | u32 count |
//   count x (u32 name_len | name | u32 rank | rank x u64 dim | values as f64)

#include <filesystem>

#include <json.hpp>

#include "spandet/model.hpp"

namespace spandet {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

nlohmann::ordered_json to_json(const ModelConfig& cfg);
/// Keys missing from j keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct Checkpoint {
    ModelConfig config;
    ParameterStore params;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

void save_checkpoint(const std::filesystem::path& path, const DetectionTransformer& model,
                     const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);
DetectionTransformer load_model(const std::filesystem::path& path);

}  // namespace spandet
