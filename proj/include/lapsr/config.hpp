#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "lapsr/model.hpp"
#include "lapsr/trainer.hpp"

namespace lapsr {

/// Flat `key = value` file, UTF-8, '#' comments. Every LapSRNConfig and
/// TrainConfig field is addressable by its field name; CLI flags override.
struct KvConfig {
  std::map<std::string, std::string> values;

  static KvConfig parse_file(const std::filesystem::path& path);
  static KvConfig parse_text(const std::string& text, const std::string& origin = "<string>");
};

/// Applies recognized keys to both configs; unknown keys or malformed values
/// raise invalid_argument naming the key.
void apply_config(const KvConfig& kv, LapSRNConfig& model_cfg, TrainConfig& train_cfg);

}  // namespace lapsr
