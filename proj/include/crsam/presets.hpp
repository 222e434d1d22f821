// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "crsam/optim.hpp"

namespace crsam {

struct OptimizerPreset {
  std::string name;
  OptimizerConfig config;
  /// False for the published large-scale settings, which are kept as
  /// reference values only.
  bool desk_reproducible = true;
  std::string note;
};

const std::vector<OptimizerPreset>& optimizer_presets();

/// Throws ConfigError for an unknown name.
const OptimizerPreset& find_preset(std::string_view name);

}  // namespace crsam
