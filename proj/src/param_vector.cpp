// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/param_vector.hpp"

#include <cmath>
#include <string>

#include "crsam/errors.hpp"

namespace crsam {

std::string_view to_string(Dtype dtype) { return dtype == Dtype::f32 ? "f32" : "f64"; }

Dtype parse_dtype(std::string_view text) {
  if (text == "f32" || text == "float32") return Dtype::f32;
  if (text == "f64" || text == "float64") return Dtype::f64;
  throw ConfigError("unknown dtype '" + std::string(text) + "'");
}

ParamVector::ParamVector(std::vector<double> values, Dtype dtype) : values_(std::move(values)), dtype_(dtype) {
  round_to_dtype();
}

void ParamVector::round_to_dtype() {
  if (dtype_ != Dtype::f32) return;
  for (auto& v : values_) v = static_cast<double>(static_cast<float>(v));
}

bool ParamVector::all_finite() const { return crsam::all_finite(values_); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace crsam
