// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace crsam {

enum class Dtype { f32, f64 };

std::string_view to_string(Dtype dtype);
Dtype parse_dtype(std::string_view text);

/// Flat, ordered model parameters. Values are held in double storage; an f32
/// tag means every value is exactly representable as a float and arithmetic
/// producing a new vector rounds back to float.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t size, Dtype dtype = Dtype::f64) : values_(size, 0.0), dtype_(dtype) {}
  explicit ParamVector(std::vector<double> values, Dtype dtype = Dtype::f64);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  Dtype dtype() const { return dtype_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> span() const { return values_; }
  std::span<double> span() { return values_; }
  const std::vector<double>& values() const { return values_; }

  /// Rounds every entry to the storage precision implied by the dtype tag.
  void round_to_dtype();
  bool all_finite() const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
  Dtype dtype_ = Dtype::f64;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
bool all_finite(std::span<const double> a);

}  // namespace crsam
