// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crsam {

/// Row-major dense matrix of doubles.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  bool operator==(const DenseMatrix&) const = default;
};

/// A set of (input row, class label) pairs evaluated together.
struct Batch {
  DenseMatrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool operator==(const Batch&) const = default;
};

/// Throws ContractError unless rows match labels and n >= 1.
void validate_batch(const Batch& batch);

/// Copies the listed rows into a new batch, in the given order.
Batch gather(const Batch& source, std::span<const std::size_t> indices);

}  // namespace crsam
