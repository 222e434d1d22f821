// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "crsam/harness.hpp"
#include "json.hpp"

namespace crsam {

using Json = nlohmann::json;

/// "%.17g": every double is written with 17 significant digits.
std::string format_double(double value);

Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j);

Json to_json(const OptimizerConfig& config);
/// Applies `j` on top of `base`; a "preset" key selects a named profile first.
OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig base = {});

Json to_json(const TrainConfig& config);
/// Unknown keys are rejected with ConfigError. optimizer.total_epochs defaults
/// to epochs when absent.
TrainConfig train_config_from_json(const Json& j);

Json to_json(const CurvatureReport& report);
CurvatureReport curvature_report_from_json(const Json& j);
Json to_json(const ARReport& report);

Json checkpoint_to_json(const ModelSpec& spec, const Checkpoint& checkpoint);
std::pair<ModelSpec, Checkpoint> checkpoint_from_json(const Json& j);

/// Sets the value at a dotted key path ("optimizer.rho"). The text is parsed
/// as JSON when possible, otherwise stored as a string.
void apply_override(Json& config, const std::string& dotted_key, const std::string& value);

Json read_json_file(const std::filesystem::path& path);
/// Writes `j.dump(2)` plus a trailing newline.
void write_json_file(const Json& j, const std::filesystem::path& path);

/// Reads a config file, applies overrides in order and validates the result.
TrainConfig load_train_config(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace crsam
