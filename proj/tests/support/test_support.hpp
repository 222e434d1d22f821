// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the unit and acceptance tests: an independent reference
// MLP, random draws, finite differences and small filesystem utilities.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <unistd.h>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crsam/model.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

inline std::vector<double> unit(std::vector<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (auto& x : v) x /= s;
  return v;
}

inline crsam::DenseMatrix symmetric(Rng& rng, std::size_t d) {
  std::normal_distribution<double> normal;
  crsam::DenseMatrix A(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) A(i, j) = A(j, i) = normal(rng);
  return A;
}

inline crsam::DenseMatrix diag(std::initializer_list<double> values) {
  crsam::DenseMatrix A(values.size(), values.size());
  std::size_t i = 0;
  for (double v : values) A(i, i) = v, ++i;
  return A;
}

inline crsam::Batch random_batch(Rng& rng, int n, int features, int classes) {
  crsam::Batch b;
  b.inputs = crsam::DenseMatrix(n, features);
  for (auto& x : b.inputs.data) x = uniform(rng, -1.5, 1.5);
  b.labels.resize(n);
  for (auto& y : b.labels) y = uniform_int(rng, 0, classes - 1);
  return b;
}

// Straightforward per-example forward pass, written independently of the
// library kernels. Layout per layer: weights (out x in, row-major), biases.
inline double reference_mlp_loss(const std::vector<int>& widths, crsam::Activation act,
                                 const std::vector<double>& p, const crsam::Batch& batch) {
  double total = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::vector<double> h(batch.inputs.row(r).begin(), batch.inputs.row(r).end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const int in = widths[l], out = widths[l + 1];
      std::vector<double> z(out);
      for (int o = 0; o < out; ++o) {
        double s = 0.0;
        for (int i = 0; i < in; ++i) s += p[off + o * in + i] * h[i];
        z[o] = s + p[off + static_cast<std::size_t>(in) * out + o];
      }
      off += static_cast<std::size_t>(in) * out + out;
      if (l + 2 < widths.size())
        for (auto& v : z) v = act == crsam::Activation::tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
      h = std::move(z);
    }
    const double m = *std::max_element(h.begin(), h.end());
    double se = 0.0;
    for (double v : h) se += std::exp(v - m);
    total += m + std::log(se) - h[batch.labels[r]];
  }
  return total / static_cast<double>(batch.size());
}

// Smallest |pre-activation| of any hidden unit (ReLU kink distance).
inline double min_hidden_preactivation(const std::vector<int>& widths, const std::vector<double>& p,
                                       const crsam::Batch& batch) {
  double smallest = INFINITY;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::vector<double> h(batch.inputs.row(r).begin(), batch.inputs.row(r).end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 2 < widths.size(); ++l) {
      const int in = widths[l], out = widths[l + 1];
      std::vector<double> z(out);
      for (int o = 0; o < out; ++o) {
        double s = p[off + static_cast<std::size_t>(in) * out + o];
        for (int i = 0; i < in; ++i) s += p[off + o * in + i] * h[i];
        smallest = std::min(smallest, std::abs(s));
        z[o] = s > 0.0 ? s : 0.0;
      }
      off += static_cast<std::size_t>(in) * out + out;
      h = std::move(z);
    }
  }
  return smallest;
}

struct MlpDraw {
  crsam::ModelSpec spec;
  crsam::ParamVector params;
  crsam::Batch batch;
};

// Random small MLP with random (nonzero-bias) parameters. ReLU draws whose
// hidden pre-activations come within `kink_margin` of zero are redrawn.
inline MlpDraw random_mlp(Rng& rng, double kink_margin = 1e-3, int max_width = 8) {
  for (;;) {
    std::vector<int> widths{uniform_int(rng, 1, 4)};
    const int hidden = uniform_int(rng, 1, 3);
    for (int i = 0; i < hidden; ++i) widths.push_back(uniform_int(rng, 1, max_width));
    const int classes = uniform_int(rng, 2, 5);
    widths.push_back(classes);
    const auto act = uniform_int(rng, 0, 1) ? crsam::Activation::relu : crsam::Activation::tanh;
    MlpDraw d{crsam::make_mlp(widths, act), {}, random_batch(rng, uniform_int(rng, 1, 10), widths.front(), classes)};
    d.params = crsam::ParamVector(gaussian_vector(rng, crsam::param_count(d.spec), 0.8));
    if (act == crsam::Activation::tanh || min_hidden_preactivation(widths, d.params.values(), d.batch) > kink_margin)
      return d;
  }
}

inline std::vector<double> central_difference(const std::function<double(const crsam::ParamVector&)>& f,
                                              const crsam::ParamVector& w, double h) {
  std::vector<double> g(w.size());
  crsam::ParamVector p = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    p[i] = w[i] + h;
    const double fp = f(p);
    p[i] = w[i] - h;
    const double fm = f(p);
    p[i] = w[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_norm_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(std::max(na, nb)), 1e-300);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Counts gradient and loss evaluations of the wrapped model.
class CountingModel final : public crsam::Model {
 public:
  explicit CountingModel(const crsam::Model& inner) : inner_(inner) {}
  std::size_t dimension() const override { return inner_.dimension(); }
  std::vector<crsam::LayerSegment> layers() const override { return inner_.layers(); }
  double loss(const crsam::ParamVector& p, const crsam::Batch& b) const override {
    ++losses;
    return inner_.loss(p, b);
  }
  crsam::GradEval loss_and_grad(const crsam::ParamVector& p, const crsam::Batch& b) const override {
    ++grads;
    return inner_.loss_and_grad(p, b);
  }
  long double loss_extended(std::span<const long double> p, const crsam::Batch& b) const override {
    ++losses;
    return inner_.loss_extended(p, b);
  }
  mutable std::atomic<int> grads{0};
  mutable std::atomic<int> losses{0};

 private:
  const crsam::Model& inner_;
};

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("crsam_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testing
