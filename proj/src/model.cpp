// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "crsam/errors.hpp"

namespace crsam {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::quadratic: return "quadratic";
    case ModelKind::linear_softmax: return "linear-softmax";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

std::string_view to_string(Activation act) { return act == Activation::relu ? "relu" : "tanh"; }

ModelKind parse_model_kind(std::string_view text) {
  if (text == "quadratic") return ModelKind::quadratic;
  if (text == "linear-softmax" || text == "linear_softmax") return ModelKind::linear_softmax;
  if (text == "mlp") return ModelKind::mlp;
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

void validate(const ModelSpec& spec) {
  if (!(spec.loss_scale > 0.0) || !std::isfinite(spec.loss_scale))
    throw ConfigError("loss_scale must be a finite positive number");
  if (spec.kind == ModelKind::quadratic) {
    const std::size_t n = spec.A.rows;
    if (n == 0) throw ConfigError("quadratic: A must be non-empty");
    if (spec.A.cols != n || spec.A.data.size() != n * n) throw ConfigError("quadratic: A must be square");
    if (spec.b.size() != n) throw ConfigError("quadratic: b dimension does not match A");
    if (!spec.start.empty() && spec.start.size() != n)
      throw ConfigError("quadratic: start dimension does not match A");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (spec.A(i, j) != spec.A(j, i)) throw ConfigError("quadratic: A is not symmetric");
    if (!all_finite(spec.A.data) || !all_finite(spec.b)) throw ConfigError("quadratic: non-finite payload");
    return;
  }
  if (spec.widths.size() < 2) throw ConfigError("model needs at least input and output widths");
  if (spec.kind == ModelKind::linear_softmax && spec.widths.size() != 2)
    throw ConfigError("linear-softmax takes exactly [n_inputs, n_classes]");
  for (int w : spec.widths)
    if (w < 1) throw ConfigError("layer widths must be >= 1");
  if (spec.widths.back() < 2) throw ConfigError("classifier needs at least 2 output classes");
}

std::size_t param_count(const ModelSpec& spec) {
  if (spec.kind == ModelKind::quadratic) return spec.A.rows;
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    total += in * out + out;
  }
  return total;
}

std::vector<LayerSegment> layer_segments(const ModelSpec& spec) {
  if (spec.kind == ModelKind::quadratic) return {{"quadratic", 0, spec.A.rows}};
  std::vector<LayerSegment> out;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const auto size =
        static_cast<std::size_t>(spec.widths[l]) * spec.widths[l + 1] + static_cast<std::size_t>(spec.widths[l + 1]);
    out.push_back({"layer" + std::to_string(l), offset, size});
    offset += size;
  }
  return out;
}

int n_classes(const ModelSpec& spec) { return spec.kind == ModelKind::quadratic ? 0 : spec.widths.back(); }

ModelSpec make_quadratic(DenseMatrix A, std::vector<double> b, std::vector<double> start) {
  ModelSpec s;
  s.kind = ModelKind::quadratic;
  s.A = std::move(A);
  s.b = std::move(b);
  s.start = std::move(start);
  validate(s);
  return s;
}

ModelSpec make_mlp(std::vector<int> widths, Activation act, Dtype dtype) {
  ModelSpec s;
  s.kind = ModelKind::mlp;
  s.widths = std::move(widths);
  s.activation = act;
  s.dtype = dtype;
  validate(s);
  return s;
}

ModelSpec make_linear_softmax(int n_inputs, int n_cls, Dtype dtype) {
  ModelSpec s;
  s.kind = ModelKind::linear_softmax;
  s.widths = {n_inputs, n_cls};
  s.dtype = dtype;
  validate(s);
  return s;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  if (spec.kind == ModelKind::quadratic) {
    if (spec.start.empty()) return ParamVector(spec.A.rows, spec.dtype);
    return ParamVector(spec.start, spec.dtype);
  }
  std::mt19937_64 rng(seed);
  std::vector<double> w(param_count(spec), 0.0);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-s, s);
    for (std::size_t i = 0; i < in * out; ++i) w[offset + i] = dist(rng);
    offset += in * out + out;  // biases stay zero
  }
  return ParamVector(std::move(w), spec.dtype);
}

namespace {

template <class T>
T activate(Activation act, T z) {
  if (act == Activation::relu) return z > T(0) ? z : T(0);
  return std::tanh(z);
}

// derivative expressed through the activation output a = act(z)
template <class T>
T activate_grad(Activation act, T z, T a) {
  if (act == Activation::relu) return z > T(0) ? T(1) : T(0);
  return T(1) - a * a;
}

template <class T>
T quadratic_eval(const ModelSpec& spec, const T* w, T* grad) {
  const std::size_t n = spec.A.rows;
  T quad = 0, lin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    T aw = 0;
    const double* row = spec.A.data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) aw += static_cast<T>(row[j]) * w[j];
    quad += w[i] * aw;
    lin += static_cast<T>(spec.b[i]) * w[i];
    if (grad) grad[i] = aw + static_cast<T>(spec.b[i]);
  }
  T value = T(0.5) * quad + lin;
  if (spec.loss_scale != 1.0) {
    const T scale = static_cast<T>(spec.loss_scale);
    value *= scale;
    if (grad)
      for (std::size_t i = 0; i < n; ++i) grad[i] *= scale;
  }
  return value;
}

/// Forward (and optionally backward) pass of a dense classifier with mean
/// cross-entropy. Examples are processed in index order so the reduction order
/// is fixed.
template <class T>
class DenseNet {
 public:
  explicit DenseNet(const ModelSpec& spec) : spec_(spec), n_layers_(spec.widths.size() - 1) {
    pre_.resize(n_layers_);
    post_.resize(n_layers_ + 1);
    delta_.resize(n_layers_);
    for (std::size_t l = 0; l <= n_layers_; ++l) post_[l].resize(spec.widths[l]);
    for (std::size_t l = 0; l < n_layers_; ++l) {
      pre_[l].resize(spec.widths[l + 1]);
      delta_[l].resize(spec.widths[l + 1]);
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers_; ++l) {
      offsets_.push_back(offset);
      offset += static_cast<std::size_t>(spec.widths[l]) * spec.widths[l + 1] + spec.widths[l + 1];
    }
  }

  /// Returns logits of example `r` (view into internal storage).
  const std::vector<T>& forward(const T* w, const Batch& batch, std::size_t r) {
    const auto x = batch.inputs.row(r);
    for (std::size_t i = 0; i < x.size(); ++i) post_[0][i] = static_cast<T>(x[i]);
    for (std::size_t l = 0; l < n_layers_; ++l) {
      const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
      const T* W = w + offsets_[l];
      const T* bias = W + in * out;
      const std::vector<T>& a = post_[l];
      const bool hidden = l + 1 < n_layers_;
      for (std::size_t o = 0; o < out; ++o) {
        T z = bias[o];
        const T* wrow = W + o * in;
        for (std::size_t i = 0; i < in; ++i) z += wrow[i] * a[i];
        pre_[l][o] = z;
        post_[l + 1][o] = hidden ? activate(spec_.activation, z) : z;
      }
    }
    return post_[n_layers_];
  }

  /// Cross-entropy of the last forward pass; fills softmax-minus-onehot into
  /// the output delta when `want_delta`.
  T cross_entropy(int label, bool want_delta) {
    const std::vector<T>& z = post_[n_layers_];
    const T m = *std::max_element(z.begin(), z.end());
    T sum = 0;
    for (T zi : z) sum += std::exp(zi - m);
    const T lse = m + std::log(sum);
    if (want_delta) {
      std::vector<T>& d = delta_[n_layers_ - 1];
      for (std::size_t k = 0; k < z.size(); ++k) d[k] = std::exp(z[k] - lse);
      d[static_cast<std::size_t>(label)] -= T(1);
    }
    return lse - z[static_cast<std::size_t>(label)];
  }

  void backward(const T* w, T* grad) {
    for (std::size_t l = n_layers_; l-- > 0;) {
      const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
      const T* W = w + offsets_[l];
      T* gW = grad + offsets_[l];
      T* gb = gW + in * out;
      const std::vector<T>& a = post_[l];
      const std::vector<T>& d = delta_[l];
      for (std::size_t o = 0; o < out; ++o) {
        const T dz = d[o];
        T* grow = gW + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += dz * a[i];
        gb[o] += dz;
      }
      if (l == 0) break;
      std::vector<T>& prev = delta_[l - 1];
      std::fill(prev.begin(), prev.end(), T(0));
      for (std::size_t o = 0; o < out; ++o) {
        const T dz = d[o];
        const T* wrow = W + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += wrow[i] * dz;
      }
      for (std::size_t i = 0; i < in; ++i)
        prev[i] *= activate_grad(spec_.activation, pre_[l - 1][i], post_[l][i]);
    }
  }

 private:
  const ModelSpec& spec_;
  std::size_t n_layers_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<T>> pre_, post_, delta_;
};

template <class T>
T dense_eval(const ModelSpec& spec, const T* w, const Batch& batch, T* grad) {
  const int classes = spec.widths.back();
  DenseNet<T> net(spec);
  T total = 0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const int y = batch.labels[r];
    if (y < 0 || y >= classes) throw ContractError("label " + std::to_string(y) + " out of range");
    net.forward(w, batch, r);
    total += net.cross_entropy(y, grad != nullptr);
    if (grad) net.backward(w, grad);
  }
  const T inv_n = T(spec.loss_scale) / static_cast<T>(batch.size());
  if (grad) {
    const std::size_t p = param_count(spec);
    for (std::size_t i = 0; i < p; ++i) grad[i] *= inv_n;
  }
  return total * inv_n;
}

void check_inputs(const ModelSpec& spec, std::size_t n_params, const Batch& batch) {
  if (n_params != param_count(spec))
    throw ContractError("parameter dimension " + std::to_string(n_params) + " does not match model dimension " +
                        std::to_string(param_count(spec)));
  if (spec.kind == ModelKind::quadratic) return;
  validate_batch(batch);
  if (batch.inputs.cols != static_cast<std::size_t>(spec.widths.front()))
    throw ContractError("batch feature count " + std::to_string(batch.inputs.cols) + " does not match input width " +
                        std::to_string(spec.widths.front()));
}

template <class T>
T evaluate(const ModelSpec& spec, const T* w, const Batch& batch, T* grad) {
  if (spec.kind == ModelKind::quadratic) return quadratic_eval(spec, w, grad);
  return dense_eval(spec, w, batch, grad);
}

template <class T>
double evaluate_as(const ModelSpec& spec, const ParamVector& params, const Batch& batch, ParamVector* grad) {
  std::vector<T> w(params.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(params[i]);
  std::vector<T> g(grad ? w.size() : 0, T(0));
  const T value = evaluate<T>(spec, w.data(), batch, grad ? g.data() : nullptr);
  if (grad) {
    *grad = ParamVector(w.size(), params.dtype());
    for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] = static_cast<double>(g[i]);
  }
  return static_cast<double>(value);
}

}  // namespace

double loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params.size(), batch);
  const double value = params.dtype() == Dtype::f32 ? evaluate_as<float>(spec, params, batch, nullptr)
                                                    : evaluate_as<double>(spec, params, batch, nullptr);
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  return value;
}

GradEval loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params.size(), batch);
  GradEval out;
  out.loss = params.dtype() == Dtype::f32 ? evaluate_as<float>(spec, params, batch, &out.grad)
                                          : evaluate_as<double>(spec, params, batch, &out.grad);
  if (!std::isfinite(out.loss)) throw NumericError("loss is not finite");
  if (!out.grad.all_finite()) throw NumericError("gradient is not finite");
  return out;
}

long double loss_extended(const ModelSpec& spec, std::span<const long double> params, const Batch& batch) {
  check_inputs(spec, params.size(), batch);
  const long double value = evaluate<long double>(spec, params.data(), batch, nullptr);
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  return value;
}

std::vector<int> predict(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  if (spec.kind == ModelKind::quadratic) throw ContractError("predict: quadratic models have no classes");
  check_inputs(spec, params.size(), batch);
  DenseNet<double> net(spec);
  std::vector<int> out(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& z = net.forward(params.values().data(), batch, r);
    out[r] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

SpecModel::SpecModel(ModelSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  dimension_ = param_count(spec_);
}

double SpecModel::loss(const ParamVector& params, const Batch& batch) const {
  return crsam::loss(spec_, params, batch);
}

GradEval SpecModel::loss_and_grad(const ParamVector& params, const Batch& batch) const {
  return crsam::loss_and_grad(spec_, params, batch);
}

long double SpecModel::loss_extended(std::span<const long double> params, const Batch& batch) const {
  return crsam::loss_extended(spec_, params, batch);
}

}  // namespace crsam
