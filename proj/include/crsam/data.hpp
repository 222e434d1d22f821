// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crsam/batch.hpp"

namespace crsam {

struct Dataset {
  DenseMatrix inputs;
  std::vector<int> labels;
  int n_classes = 2;
  std::string name;

  std::size_t size() const { return labels.size(); }
  bool operator==(const Dataset&) const = default;
};

/// Throws ContractError unless row counts match, labels are in range and
/// inputs are finite.
void validate(const Dataset& dataset);

Batch as_batch(const Dataset& dataset);

/// n/2 points per class on two interleaved half circles of radius 1. Class 0
/// is the upper arc (cos t, sin t); class 1 is (1 - cos t, 1 - sin t - 0.5).
/// Gaussian noise of standard deviation `noise` is added to both coordinates.
Dataset gen_two_moons(int n, double noise, std::uint64_t seed);

/// Example i belongs to class i % centers.size() and is drawn from
/// N(center, sigma^2 I).
Dataset gen_gaussian_blobs(int n, const std::vector<std::vector<double>>& centers, double sigma,
                           std::uint64_t seed);

/// Interleaved spiral arms, one per class. Along arm c the radius is t and the
/// angle is 2*pi*turns*t + 2*pi*c/n_arms for t in (0, 1].
Dataset gen_spiral(int n, double turns, double noise, std::uint64_t seed, int n_arms = 2);

/// Parses an IDX image file (magic 0x00000803, u8, rank 3) and label file
/// (magic 0x00000801, u8, rank 1). Pixels are scaled by 1/255; each image is
/// flattened row-major. `limit` keeps the first `limit` items.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::optional<std::size_t> limit = std::nullopt);

/// Writes the dataset as an IDX pair with images shaped (n, 1, n_features).
/// Inputs must lie in [0, 1]; they are quantized to round(255 x).
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// Affine per-feature rescale of the inputs to [0, 1].
Dataset min_max_scale(const Dataset& dataset);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  bool operator==(const SplitSpec&) const = default;
};

struct Split {
  Dataset train;
  Dataset test;
};

/// Seeded permutation, first round(train_fraction * n) examples go to train.
Split split_dataset(const Dataset& dataset, const SplitSpec& spec);

/// Subtracts the per-feature mean of `reference` from the inputs of `target`.
void center_features(Dataset& target, const Dataset& reference);

/// One random permutation per epoch; the final partial batch is kept.
std::vector<Batch> batch_iter(const Dataset& dataset, std::size_t batch_size, std::uint64_t epoch_seed);

/// Index permutation used by batch_iter for the same epoch seed.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t epoch_seed);

}  // namespace crsam
