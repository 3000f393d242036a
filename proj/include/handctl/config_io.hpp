#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "handctl/encoder.hpp"
#include "handctl/hand_model.hpp"
#include "handctl/motor_map.hpp"
#include "handctl/plant.hpp"

namespace handctl {

// Versioned JSON schemas; see docs/formats.md.
inline constexpr int kHandModelSchemaVersion = 1;
inline constexpr int kCalibrationSchemaVersion = 1;
inline constexpr int kPlantSchemaVersion = 1;

nlohmann::json to_json(const HandModel& model);
HandModel hand_model_from_json(const nlohmann::json& j);

/// Calibration file: motor records plus optional encoder offsets.
struct CalibrationFile {
  CalibrationSet motors;
  std::vector<std::pair<int, EncoderCalibration>> encoders;  // (channel, calibration)
};

nlohmann::json to_json(const CalibrationFile& cal);
CalibrationFile calibration_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PlantConfig& cfg);
PlantConfig plant_config_from_json(const nlohmann::json& j);

/// Whole-file helpers. Throw IoError on I/O failure, ConfigError on schema problems.
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

HandModel load_hand_model(const std::string& path);
CalibrationFile load_calibration(const std::string& path);
void save_calibration(const std::string& path, const CalibrationFile& cal);
PlantConfig load_plant_config(const std::string& path);

/// 64-bit FNV-1a over the canonical (sorted-key) JSON dump.
std::uint64_t config_hash(const nlohmann::json& j);
std::string hex64(std::uint64_t v);

}  // namespace handctl
