// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/selfcheck.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "crsam/curvature.hpp"
#include "crsam/data.hpp"
#include "crsam/errors.hpp"
#include "crsam/optim.hpp"

namespace crsam {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform(rng, std::log(lo), std::log(hi))); }

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::vector<double> unit_vector(Rng& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  const double s = norm2(v);
  for (auto& x : v) x /= s;
  return v;
}

// SPD matrix 0.5 I + B B' / d.
DenseMatrix random_spd(Rng& rng, std::size_t d) {
  DenseMatrix B(d, d), A(d, d);
  for (auto& x : B.data) x = uniform(rng, -1.0, 1.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += B(i, k) * B(j, k);
      A(i, j) = s / static_cast<double>(d) + (i == j ? 0.5 : 0.0);
    }
  return A;
}

DenseMatrix random_symmetric(Rng& rng, std::size_t d) {
  std::normal_distribution<double> normal;
  DenseMatrix A(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) A(i, j) = A(j, i) = normal(rng);
  return A;
}

std::vector<double> matvec(const DenseMatrix& A, std::span<const double> x) {
  std::vector<double> y(A.rows, 0.0);
  for (std::size_t i = 0; i < A.rows; ++i) y[i] = dot(A.row(i), x);
  return y;
}

Batch random_batch(Rng& rng, int n, int features, int classes) {
  Batch b;
  b.inputs = DenseMatrix(n, features);
  for (auto& x : b.inputs.data) x = uniform(rng, -1.5, 1.5);
  b.labels.resize(n);
  for (auto& y : b.labels) y = uniform_int(rng, 0, classes - 1);
  return b;
}

ParamVector random_params(Rng& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  ParamVector p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = normal(rng);
  return p;
}

// Smallest |pre-activation| over every hidden unit and example.
double min_hidden_preactivation(const ModelSpec& spec, const ParamVector& p, const Batch& batch) {
  double smallest = INFINITY;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::vector<double> h(batch.inputs.row(r).begin(), batch.inputs.row(r).end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
      const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
      std::vector<double> z(out);
      for (std::size_t o = 0; o < out; ++o) {
        double s = p[off + in * out + o];
        for (std::size_t i = 0; i < in; ++i) s += p[off + o * in + i] * h[i];
        z[o] = s;
      }
      off += in * out + out;
      if (l + 2 == spec.widths.size()) break;
      for (double v : z) smallest = std::min(smallest, std::abs(v));
      for (auto& v : z) v = spec.activation == Activation::relu ? std::max(v, 0.0) : std::tanh(v);
      h = std::move(z);
    }
  }
  return smallest;
}

struct MlpDraw {
  ModelSpec spec;
  ParamVector params;
  Batch batch;
};

// Small random MLP away from ReLU kinks.
MlpDraw random_mlp(Rng& rng) {
  for (;;) {
    MlpDraw d;
    std::vector<int> widths{uniform_int(rng, 1, 4)};
    const int hidden = uniform_int(rng, 1, 3);
    for (int i = 0; i < hidden; ++i) widths.push_back(uniform_int(rng, 2, 8));
    const int classes = uniform_int(rng, 2, 4);
    widths.push_back(classes);
    d.spec = make_mlp(widths, uniform_int(rng, 0, 1) == 0 ? Activation::tanh : Activation::relu);
    d.params = random_params(rng, param_count(d.spec), 0.7);
    d.batch = random_batch(rng, uniform_int(rng, 1, 8), widths.front(), classes);
    if (d.spec.activation == Activation::tanh || min_hidden_preactivation(d.spec, d.params, d.batch) > 1e-3)
      return d;
  }
}

double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(num) / std::max(std::max(norm2(a), norm2(b)), 1e-300);
}

std::vector<double> central_difference(const std::function<double(const ParamVector&)>& f, const ParamVector& w,
                                       double h) {
  std::vector<double> g(w.size());
  ParamVector p = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double step = h * (1.0 + std::abs(w[i]));
    p[i] = w[i] + step;
    const double fp = f(p);
    p[i] = w[i] - step;
    const double fm = f(p);
    p[i] = w[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

class PerturbedGradient final : public Model {
 public:
  explicit PerturbedGradient(const Model& inner) : inner_(inner) {}
  std::size_t dimension() const override { return inner_.dimension(); }
  std::vector<LayerSegment> layers() const override { return inner_.layers(); }
  double loss(const ParamVector& p, const Batch& b) const override { return inner_.loss(p, b); }
  GradEval loss_and_grad(const ParamVector& p, const Batch& b) const override {
    GradEval e = inner_.loss_and_grad(p, b);
    e.grad[0] += 1e-2 * (1.0 + std::abs(e.grad[0]));
    return e;
  }
  long double loss_extended(std::span<const long double> p, const Batch& b) const override {
    return inner_.loss_extended(p, b);
  }

 private:
  const Model& inner_;
};

template <class F>
CheckResult timed(std::string name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  r.name = std::move(name);
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

CheckResult check_fd_exactness(std::uint64_t seed) {
  return timed("fd exactness", [&](CheckResult& r) {
    Rng rng(seed);
    double worst_dir = 0.0, worst_quad = 0.0;
    const Batch empty;
    for (int t = 0; t < 1000; ++t) {
      const std::size_t d = uniform_int(rng, 1, 32);
      DenseMatrix A = random_spd(rng, d);
      std::vector<double> b(d), w(d);
      for (auto& x : b) x = uniform(rng, -1.0, 1.0);
      for (auto& x : w) x = uniform(rng, -1.0, 1.0);
      const auto v = unit_vector(rng, d);
      const double rho = log_uniform(rng, 1e-4, 1e-1);
      const auto Aw = matvec(A, w);
      const auto Av = matvec(A, v);
      double dir_exact = 0.0;
      for (std::size_t i = 0; i < d; ++i) dir_exact += v[i] * (Aw[i] + b[i]);
      const double quad_exact = dot(v, Av);
      const SpecModel model(make_quadratic(std::move(A), std::move(b)));
      const ParamVector params(w);
      const double dir = directional_grad_fd(model, params, empty, v, rho).value;
      const double quad = quadratic_form_fd(model, params, empty, v, rho).value;
      worst_dir = std::max(worst_dir, std::abs(dir - dir_exact) / std::abs(dir_exact));
      worst_quad = std::max(worst_quad, std::abs(quad - quad_exact) / std::abs(quad_exact));
    }
    r.passed = worst_dir <= 1e-8 && worst_quad <= 1e-8;
    r.detail = fmt("max rel err directional %.3g, quadratic form %.3g (tol 1e-8)", worst_dir, worst_quad);
  });
}

CheckResult check_gradients(std::uint64_t seed, Fault fault) {
  return timed("gradient check", [&](CheckResult& r) {
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const MlpDraw d = random_mlp(rng);
      const SpecModel base(d.spec);
      const PerturbedGradient perturbed(base);
      const Model& model = fault == Fault::gradient ? static_cast<const Model&>(perturbed) : base;
      const auto analytic = model.loss_and_grad(d.params, d.batch).grad;
      const auto numeric =
          central_difference([&](const ParamVector& p) { return model.loss(p, d.batch); }, d.params, 1e-6);
      worst = std::max(worst, rel_err(analytic.span(), numeric));
    }
    r.passed = worst <= 1e-4;
    r.detail = fmt("max rel err %.3g over 100 MLP draws (tol 1e-4)", worst);
  });
}

CheckResult check_hutchinson(std::uint64_t seed) {
  return timed("hutchinson calibration", [&](CheckResult& r) {
    Rng rng(seed);
    const Batch empty;
    int inside = 0;
    for (int t = 0; t < 100; ++t) {
      const std::size_t d = uniform_int(rng, 2, 10);
      DenseMatrix A = random_symmetric(rng, d);
      double trace = 0.0;
      for (std::size_t i = 0; i < d; ++i) trace += A(i, i);
      std::vector<double> w(d);
      for (auto& x : w) x = uniform(rng, -1.0, 1.0);
      const SpecModel model(make_quadratic(std::move(A), std::vector<double>(d, 0.0)));
      const auto est = hutchinson_trace(model, ParamVector(w), empty, 1000, rng());
      inside += std::abs(est.estimate - trace) <= 3.0 * est.std_error;
    }
    double rad_err = 0.0, rad_se = 0.0;
    for (std::size_t d : {1, 3, 10, 32}) {
      DenseMatrix I(d, d);
      for (std::size_t i = 0; i < d; ++i) I(i, i) = 1.0;
      const SpecModel model(make_quadratic(std::move(I), std::vector<double>(d, 0.0)));
      HutchinsonOptions opts;
      opts.probe_kind = ProbeKind::rademacher;
      const auto est = hutchinson_trace(model, ParamVector(std::vector<double>(d, 0.5)), empty, 50, rng(), opts);
      rad_err = std::max(rad_err, std::abs(est.estimate - static_cast<double>(d)) / static_cast<double>(d));
      rad_se = std::max(rad_se, est.std_error / static_cast<double>(d));
    }
    r.passed = inside >= 99 && rad_err <= 1e-9 && rad_se <= 1e-9;
    r.detail = fmt("%.0f/100 trials within 3 stderr; ", inside) +
               fmt("rademacher on I: rel err %.3g, rel stderr %.3g", rad_err, rad_se);
  });
}

CheckResult check_reduction(std::uint64_t seed) {
  return timed("reduction identity", [&](CheckResult& r) {
    Rng rng(seed);
    int identical = 0;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const MlpDraw d = random_mlp(rng);
      const SpecModel model(d.spec);
      OptimizerConfig cfg;
      cfg.peak_lr = log_uniform(rng, 1e-3, 0.5);
      cfg.momentum = uniform(rng, 0.0, 0.95);
      cfg.weight_decay = uniform(rng, 0.0, 1e-2);
      cfg.rho = log_uniform(rng, 1e-3, 0.3);
      cfg.total_epochs = uniform_int(rng, 1, 300);
      cfg.alpha = cfg.beta = 0.0;
      OptimizerState state = make_state(d.params);
      state.momentum_buffer = random_params(rng, d.params.size(), 0.1);
      state.step_count = uniform_int(rng, 0, 1000);
      state.epoch = uniform_int(rng, 0, cfg.total_epochs);

      cfg.method = Method::sam;
      const StepOutcome sam = sam_step(model, d.params, d.batch, cfg, state);
      cfg.method = Method::crsam;
      const StepOutcome cr = crsam_step(model, d.params, d.batch, cfg, state);
      identical += sam.new_params == cr.new_params && sam.new_state == cr.new_state &&
                   sam.report.base_loss == cr.report.base_loss && sam.report.sam_loss == cr.report.sam_loss &&
                   sam.report.grad_norm == cr.report.grad_norm && sam.report.lr == cr.report.lr;

      cfg.method = Method::sam;
      cfg.rho = 1e-12;
      const StepOutcome tiny = sam_step(model, d.params, d.batch, cfg, state);
      cfg.method = Method::sgd;
      const StepOutcome sgd = sgd_step(model, d.params, d.batch, cfg, state);
      std::vector<double> da(d.params.size()), db(d.params.size());
      for (std::size_t i = 0; i < da.size(); ++i) {
        da[i] = tiny.new_params[i] - d.params[i];
        db[i] = sgd.new_params[i] - d.params[i];
      }
      worst = std::max(worst, rel_err(da, db));
    }
    r.passed = identical == 100 && worst <= 1e-8;
    r.detail = fmt("%.0f/100 crsam(0,0) steps bit-identical to sam; ", identical) +
               fmt("max sam(rho=1e-12) vs sgd rel displacement %.3g (tol 1e-8)", worst);
  });
}

CheckResult check_regularizer_gradient(std::uint64_t seed) {
  return timed("regularizer gradient", [&](CheckResult& r) {
    Rng rng(seed);
    double worst = 0.0;
    int draws = 0, rejected = 0;
    while (draws < 100) {
      const MlpDraw d = random_mlp(rng);
      const SpecModel model(d.spec);
      OptimizerConfig cfg;
      cfg.method = Method::crsam;
      cfg.rho = log_uniform(rng, 0.02, 0.2);
      cfg.beta = log_uniform(rng, 1e-3, 0.1);
      cfg.alpha = cfg.beta * uniform(rng, 1.5, 10.0);
      const auto g = model.loss_and_grad(d.params, d.batch).grad;
      if (norm2(g.span()) < 1e-6) {
        ++rejected;
        continue;
      }
      std::vector<double> v(g.values());
      const double gn = norm2(v);
      for (auto& x : v) x /= gn;
      const RegularizerResult reg = crsam_regularizer(model, d.params, d.batch, v, cfg);
      // Away from the clamp: both log arguments comfortably above the floor.
      const double margin = 1e3 * cfg.log_floor;
      if (reg.d1 < margin || reg.d2 < margin) {
        ++rejected;
        continue;
      }
      const auto numeric = central_difference(
          [&](const ParamVector& p) { return crsam_regularizer_value(model, p, d.batch, v, cfg); }, d.params, 1e-6);
      worst = std::max(worst, rel_err(reg.reg_grad.span(), numeric));
      ++draws;
    }
    r.passed = worst <= 1e-4;
    r.detail = fmt("max rel err %.3g over 100 MLP draws (tol 1e-4, %.0f near-clamp draws skipped)", worst, rejected);
  });
}

CheckResult check_scale_invariance(std::uint64_t seed) {
  return timed("scale invariance", [&](CheckResult& r) {
    const Dataset moons = gen_two_moons(128, 0.1, seed);
    const Batch batch = as_batch(moons);
    ModelSpec spec = make_mlp({2, 16, 16, 2}, Activation::tanh);
    const ParamVector params = init_params(spec, seed);
    GeometryOptions opts;
    opts.n_probes = 20;
    opts.power_iters = 20;
    opts.seed = seed;
    const CurvatureReport ref = geometry_report(SpecModel(spec), params, batch, opts);
    double worst_c = 0.0, worst_t = 0.0;
    for (double c : {0.1, 10.0}) {
      spec.loss_scale = c;
      const CurvatureReport scaled = geometry_report(SpecModel(spec), params, batch, opts);
      worst_c = std::max(worst_c, std::abs(scaled.normalized_trace / ref.normalized_trace - 1.0));
      worst_t = std::max(worst_t, std::abs(scaled.trace_estimate / (c * ref.trace_estimate) - 1.0));
    }
    r.passed = worst_c <= 1e-10 && worst_t <= 1e-6;
    r.detail = fmt("C(w) rel change %.3g (tol 1e-10), trace/c rel err %.3g (tol 1e-6)", worst_c, worst_t);
  });
}

CheckResult check_trust_region(std::uint64_t seed) {
  return timed("trust-region dominance", [&](CheckResult& r) {
    constexpr int kInstances = 1000;
    constexpr int kSamples = 1000000;
    constexpr int kMinDim = 2, kMaxDim = 6;
    Rng rng(seed);
    struct Instance {
      DenseMatrix A;
      std::vector<double> g;
      double rho;
    };
    std::vector<std::vector<Instance>> by_dim(kMaxDim + 1);
    std::normal_distribution<double> normal;
    for (int t = 0; t < kInstances; ++t) {
      const int d = uniform_int(rng, kMinDim, kMaxDim);
      Instance inst{random_symmetric(rng, d), std::vector<double>(d), uniform(rng, 0.1, 2.0)};
      for (auto& x : inst.g) x = normal(rng);
      by_dim[d].push_back(std::move(inst));
    }
    int below_one_step = 0, below_search = 0;
    double worst_gap = -INFINITY;
    for (int d = kMinDim; d <= kMaxDim; ++d) {
      // Sphere samples stored coordinate-major for a contiguous inner loop.
      std::vector<std::vector<double>> s(d, std::vector<double>(kSamples));
      for (int k = 0; k < kSamples; ++k) {
        double n2 = 0.0;
        for (int i = 0; i < d; ++i) n2 += (s[i][k] = normal(rng)) * s[i][k];
        const double inv = 1.0 / std::sqrt(n2);
        for (int i = 0; i < d; ++i) s[i][k] *= inv;
      }
      std::vector<double> value(kSamples);
      for (const Instance& inst : by_dim[d]) {
        const TrustRegionSolution sol = exact_worst_case_quadratic(inst.A, inst.g, inst.rho);
        const auto one = sam_perturbation(ParamVector(inst.g), inst.rho);
        const double one_step = quadratic_increase(inst.A, inst.g, one.span());
        if (sol.max_increase < one_step - 1e-12 * (1.0 + std::abs(one_step))) ++below_one_step;

        // The uniform sphere distribution is rotation invariant, so samples are
        // drawn directly in the eigenbasis of A.
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(inst.A.data.data(),
                                                                                                   d, d);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
        const Eigen::VectorXd gt = eig.eigenvectors().transpose() * Eigen::Map<const Eigen::VectorXd>(inst.g.data(), d);
        std::fill(value.begin(), value.end(), 0.0);
        for (int i = 0; i < d; ++i) {
          const double a = inst.rho * gt[i];
          const double c = 0.5 * inst.rho * inst.rho * eig.eigenvalues()[i];
          const double* si = s[i].data();
          for (int k = 0; k < kSamples; ++k) value[k] += si[k] * (a + c * si[k]);
        }
        const double best = *std::max_element(value.begin(), value.end());
        worst_gap = std::max(worst_gap, best - sol.max_increase);
        if (sol.max_increase < best - 1e-6) ++below_search;
      }
    }
    r.passed = below_one_step == 0 && below_search == 0;
    r.detail = fmt("%.0f below one-step, %.0f below sphere search; ", below_one_step, below_search) +
               fmt("max (search - oracle) %.3g", worst_gap);
  });
}

std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& options) {
  const std::uint64_t s = options.seed;
  return {check_fd_exactness(s),         check_gradients(s + 1, options.fault),
          check_hutchinson(s + 2),       check_reduction(s + 3),
          check_regularizer_gradient(s + 4), check_scale_invariance(s + 5),
          check_trust_region(s + 6)};
}

}  // namespace crsam
