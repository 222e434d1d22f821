// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crsam/curvature.hpp"
#include "crsam/data.hpp"
#include "crsam/errors.hpp"
#include "crsam/model.hpp"
#include "crsam/optim.hpp"

namespace crsam {

enum class DataSource { two_moons, gaussian_blobs, spiral, idx };

std::string_view to_string(DataSource source);
DataSource parse_data_source(std::string_view text);

struct DatasetConfig {
  DataSource source = DataSource::two_moons;
  // generators
  int n = 2500;
  double noise = 0.2;
  double sigma = 0.5;
  std::vector<std::vector<double>> centers = {{-1.0, 0.0}, {1.0, 0.0}};
  double turns = 1.5;
  int n_arms = 2;
  std::uint64_t seed = 0;
  // idx
  std::string images;
  std::string labels;
  std::optional<std::size_t> limit;
  /// Optional separate IDX test pair; when empty the dataset is split.
  std::string test_images;
  std::string test_labels;
  std::optional<std::size_t> test_limit;

  SplitSpec split;
  /// Subtract the training-set feature mean from train and test inputs.
  bool center = false;

  bool operator==(const DatasetConfig&) const = default;
};

struct DiagnosticsConfig {
  /// Checkpoint + geometry cadence in epochs (0 disables the curve; the final
  /// epoch is always reported).
  int geometry_every = 0;
  /// AR cadence in epochs (0 disables the AR curve).
  int ar_every = 0;
  int ar_k = 20;
  int ar_samples = 500;
  /// Ascent radius for AR; <= 0 uses the optimizer rho.
  double ar_rho = 0.0;
  int probes = 100;
  int power_iters = 100;
  bool final_geometry = true;
  bool landscape = false;
  int landscape_resolution = 25;
  double landscape_extent = 1.0;
  /// When false, metrics.csv carries wall_ms = 0 so output files are reproducible.
  bool record_wall_time = false;

  bool operator==(const DiagnosticsConfig&) const = default;
};

struct TrainConfig {
  ModelSpec model;
  DatasetConfig dataset;
  OptimizerConfig optimizer;
  int epochs = 200;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  DiagnosticsConfig diagnostics;
  std::string output_dir = "runs/default";

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

struct MetricRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double lr = 0.0;
  double mean_d1 = 0.0;
  double mean_d2 = 0.0;
  double clamp_rate = 0.0;
  double wall_ms = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

struct Checkpoint {
  int epoch = 0;
  ParamVector params;
};

struct EpochGeometry {
  int epoch = 0;
  CurvatureReport train;
  CurvatureReport test;
};

struct EpochAR {
  int epoch = 0;
  ARReport report;
};

struct LandscapeCell {
  int i = 0;
  int j = 0;
  double a = 0.0;
  double b = 0.0;
  double loss = 0.0;
};

struct LandscapeGrid {
  int resolution = 0;
  double extent = 0.0;
  std::vector<double> direction1;
  std::vector<double> direction2;
  /// Layers whose parameter norm was zero; their direction segment is left
  /// unnormalized.
  std::vector<std::string> unnormalized_layers;
  std::vector<LandscapeCell> cells;
};

struct RunResult {
  std::vector<MetricRecord> records;
  std::optional<CurvatureReport> final_train;
  std::optional<CurvatureReport> final_test;
  std::vector<EpochGeometry> geometry_curve;
  std::vector<EpochAR> ar_curve;
  std::vector<Checkpoint> checkpoints;
  std::optional<LandscapeGrid> landscape;
  ParamVector final_params;
  TrainConfig config_echo;
  bool diverged = false;
};

/// Thrown by run_training on a non-finite loss; carries the records of every
/// completed epoch.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::shared_ptr<RunResult> partial)
      : NumericError(what), partial_(std::move(partial)) {}
  const RunResult& partial() const { return *partial_; }

 private:
  std::shared_ptr<RunResult> partial_;
};

/// Builds the train/test datasets named by the config.
Split build_datasets(const DatasetConfig& config);

/// Stable per-purpose seed derived from the run seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Trains for config.epochs epochs, then computes the scheduled diagnostics
/// from the saved checkpoints. Deterministic given the config.
RunResult run_training(const TrainConfig& config);

/// Per-checkpoint approximation ratios with a shared seed. Needs >= 2 checkpoints.
std::vector<EpochAR> ar_curve(const Model& model, const std::vector<Checkpoint>& checkpoints, const Batch& dataset,
                              const ARConfig& config);

struct LandscapeOptions {
  double extent = 1.0;
  int resolution = 25;
  std::uint64_t seed = 0;
};

/// Loss on a resolution x resolution grid spanned by two random directions.
/// The second direction is orthogonalized against the first within each layer
/// segment, then each segment of both directions is rescaled to the norm of
/// the matching parameter segment.
LandscapeGrid landscape_grid(const Model& model, const ParamVector& params, const Batch& dataset,
                             const LandscapeOptions& options);

void write_landscape_csv(const LandscapeGrid& grid, const std::filesystem::path& path);
void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path);

/// Writes metrics.csv, geometry.json, ar.json, config.json, checkpoints/ and
/// (when present) landscape.csv into output_dir.
void write_run(const RunResult& result, const std::filesystem::path& output_dir);

}  // namespace crsam
