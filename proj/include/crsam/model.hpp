// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crsam/batch.hpp"
#include "crsam/param_vector.hpp"

namespace crsam {

enum class ModelKind { quadratic, linear_softmax, mlp };
enum class Activation { relu, tanh };

std::string_view to_string(ModelKind kind);
std::string_view to_string(Activation act);
ModelKind parse_model_kind(std::string_view text);
Activation parse_activation(std::string_view text);

/// Contiguous slice of the flat parameter vector belonging to one layer.
struct LayerSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const LayerSegment&) const = default;
};

/// Declarative description of a model.
///
/// For `mlp` and `linear_softmax`, `widths` is [n_inputs, hidden..., n_classes]
/// and each layer stores its weights (out x in, row-major) followed by its
/// biases. `linear_softmax` has exactly two widths. For `quadratic`, the loss is
/// 0.5 w'Aw + b'w and the batch is ignored.
struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  std::vector<int> widths;
  Activation activation = Activation::relu;
  Dtype dtype = Dtype::f64;
  /// Constant multiplier on the loss. Used to probe scale invariance.
  double loss_scale = 1.0;

  // quadratic payload
  DenseMatrix A;
  std::vector<double> b;
  std::vector<double> start;

  bool operator==(const ModelSpec&) const = default;
};

/// Throws ConfigError describing the first violated invariant.
void validate(const ModelSpec& spec);
std::size_t param_count(const ModelSpec& spec);
std::vector<LayerSegment> layer_segments(const ModelSpec& spec);
int n_classes(const ModelSpec& spec);

ModelSpec make_quadratic(DenseMatrix A, std::vector<double> b, std::vector<double> start = {});
ModelSpec make_mlp(std::vector<int> widths, Activation act = Activation::relu, Dtype dtype = Dtype::f64);
ModelSpec make_linear_softmax(int n_inputs, int n_classes, Dtype dtype = Dtype::f64);

struct GradEval {
  double loss = 0.0;
  ParamVector grad;
};

/// Glorot-uniform weights, zero biases; quadratic returns `start` or zeros.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

double loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch);
GradEval loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Loss evaluated entirely in extended precision. Finite-difference probes
/// divide loss differences by rho^2 and use this path to keep round-off below
/// the truncation error they are meant to expose.
long double loss_extended(const ModelSpec& spec, std::span<const long double> params, const Batch& batch);

/// Per-example predicted class (argmax of logits). Not defined for quadratic.
std::vector<int> predict(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Differentiable scalar loss over (params, batch). Implementations are pure
/// and may be called concurrently on shared read-only arguments.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::vector<LayerSegment> layers() const = 0;
  virtual double loss(const ParamVector& params, const Batch& batch) const = 0;
  virtual GradEval loss_and_grad(const ParamVector& params, const Batch& batch) const = 0;
  virtual long double loss_extended(std::span<const long double> params, const Batch& batch) const = 0;
};

/// Model backed by a ModelSpec.
class SpecModel final : public Model {
 public:
  explicit SpecModel(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }

  std::size_t dimension() const override { return dimension_; }
  std::vector<LayerSegment> layers() const override { return layer_segments(spec_); }
  double loss(const ParamVector& params, const Batch& batch) const override;
  GradEval loss_and_grad(const ParamVector& params, const Batch& batch) const override;
  long double loss_extended(std::span<const long double> params, const Batch& batch) const override;

 private:
  ModelSpec spec_;
  std::size_t dimension_;
};

}  // namespace crsam
