// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crsam/errors.hpp"
#include "crsam/optim.hpp"
#include "crsam/parallel.hpp"

namespace crsam {

namespace {

std::vector<long double> shifted_extended(const ParamVector& params, std::span<const double> v, double rho,
                                          int sign) {
  std::vector<long double> out(params.size());
  const long double r = static_cast<long double>(rho) * sign;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<long double>(params[i]) + r * static_cast<long double>(v[i]);
  return out;
}

void check_probe(const ParamVector& params, std::span<const double> v, double rho) {
  if (!(rho > 0.0)) throw ContractError("probe radius must be > 0");
  if (v.size() != params.size()) throw ContractError("probe direction dimension mismatch");
}

double checked(long double value, const char* what) {
  const auto d = static_cast<double>(value);
  if (!std::isfinite(d)) throw NumericError(std::string(what) + " is not finite");
  return d;
}

}  // namespace

ProbeResult directional_grad_fd(const Model& model, const ParamVector& params, const Batch& batch,
                                std::span<const double> v, double rho) {
  check_probe(params, v, rho);
  const double vnorm = norm2(v);
  if (vnorm == 0.0) throw ContractError("directional_grad_fd: direction must be nonzero");
  const long double lp = model.loss_extended(shifted_extended(params, v, rho, +1), batch);
  const long double lm = model.loss_extended(shifted_extended(params, v, rho, -1), batch);
  return {checked((lp - lm) / (2.0L * rho), "directional derivative"), rho, vnorm};
}

ProbeResult quadratic_form_fd(const Model& model, const ParamVector& params, const Batch& batch,
                              std::span<const double> v, double rho) {
  check_probe(params, v, rho);
  const long double l0 = model.loss_extended(shifted_extended(params, v, 0.0, 0), batch);
  const long double lp = model.loss_extended(shifted_extended(params, v, rho, +1), batch);
  const long double lm = model.loss_extended(shifted_extended(params, v, rho, -1), batch);
  const long double r = rho;
  return {checked((lp + lm - 2.0L * l0) / (r * r), "quadratic form"), rho, norm2(v)};
}

double default_hvp_eps(const ParamVector& params) { return 1e-4 * (1.0 + norm_inf(params.span())); }

ParamVector hvp_fd(const Model& model, const ParamVector& params, const Batch& batch, std::span<const double> v,
                   double eps) {
  if (!(eps > 0.0)) throw ContractError("hvp_fd: eps must be > 0");
  if (v.size() != params.size()) throw ContractError("hvp_fd: direction dimension mismatch");
  const double vnorm = norm2(v);
  if (vnorm == 0.0) throw ContractError("hvp_fd: direction must be nonzero");
  ParamVector plus = params, minus = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double step = eps * (v[i] / vnorm);
    plus[i] = params[i] + step;
    minus[i] = params[i] - step;
  }
  const GradEval gp = model.loss_and_grad(plus, batch);
  const GradEval gm = model.loss_and_grad(minus, batch);
  ParamVector out(params.size());
  const double scale = vnorm / (2.0 * eps);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp.grad[i] - gm.grad[i]) * scale;
  if (!out.all_finite()) throw NumericError("Hessian-vector product is not finite");
  return out;
}

ProbeKind parse_probe_kind(const std::string& text) {
  if (text == "gaussian") return ProbeKind::gaussian;
  if (text == "rademacher") return ProbeKind::rademacher;
  throw ConfigError("unknown probe kind '" + text + "'");
}

TraceEstimate hutchinson_trace(const Model& model, const ParamVector& params, const Batch& batch, int n_probes,
                               std::uint64_t seed, const HutchinsonOptions& options) {
  if (n_probes < 2) throw ContractError("hutchinson_trace: n_probes must be >= 2");
  const double eps = options.hvp_eps > 0.0 ? options.hvp_eps : default_hvp_eps(params);
  const std::size_t n = params.size();

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> probes(static_cast<std::size_t>(n_probes), std::vector<double>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (auto& v : probes)
    for (auto& x : v) x = options.probe_kind == ProbeKind::gaussian ? normal(rng) : (coin(rng) ? 1.0 : -1.0);

  std::vector<double> samples(probes.size(), 0.0);
  parallel_for(probes.size(), options.workers, [&](std::size_t k) {
    if (norm2(probes[k]) == 0.0) return;  // v'Hv = 0 for the zero probe
    const ParamVector hv = hvp_fd(model, params, batch, probes[k], eps);
    samples[k] = dot(probes[k], hv.span());
  });

  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(samples.size())), n_probes};
}

EigenEstimate top_eigenvalue(const Model& model, const ParamVector& params, const Batch& batch, int max_iters,
                             double tol, std::uint64_t seed, double hvp_eps) {
  if (max_iters < 1) throw ContractError("top_eigenvalue: max_iters must be >= 1");
  if (!(tol > 0.0)) throw ContractError("top_eigenvalue: tol must be > 0");
  const double eps = hvp_eps > 0.0 ? hvp_eps : default_hvp_eps(params);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(params.size());
  for (auto& xi : x) xi = normal(rng);
  double xn = norm2(x);
  if (xn == 0.0) {
    x[0] = 1.0;
    xn = 1.0;
  }
  for (auto& xi : x) xi /= xn;

  EigenEstimate est;
  double previous = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    const ParamVector y = hvp_fd(model, params, batch, x, eps);
    const double lambda = dot(x, y.span());
    est.value = lambda;
    est.iterations = it;
    const double ynorm = norm2(y.span());
    if (ynorm == 0.0) {
      est.converged = true;
      break;
    }
    if (it > 1 && std::abs(lambda - previous) <= tol * std::abs(lambda)) {
      est.converged = true;
      break;
    }
    previous = lambda;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] / ynorm;
  }
  return est;
}

double normalized_trace(double trace, double grad_norm) {
  if (!(grad_norm > 0.0)) throw DegenerateInputError("normalized trace is undefined at zero gradient norm");
  return trace / grad_norm;
}

CurvatureReport geometry_report(const Model& model, const ParamVector& params, const Batch& dataset,
                                const GeometryOptions& options) {
  validate_batch(dataset);
  CurvatureReport r;
  r.dataset_tag = options.dataset_tag;
  r.grad_norm = norm2(model.loss_and_grad(params, dataset).grad.span());
  HutchinsonOptions hopts;
  hopts.probe_kind = options.probe_kind;
  hopts.workers = options.workers;
  const TraceEstimate tr = hutchinson_trace(model, params, dataset, options.n_probes, options.seed, hopts);
  r.trace_estimate = tr.estimate;
  r.trace_stderr = tr.std_error;
  r.n_probes = tr.n_probes;
  const EigenEstimate eig =
      top_eigenvalue(model, params, dataset, options.power_iters, options.power_tol, options.seed + 1);
  r.top_eigenvalue = eig.value;
  r.top_eigenvalue_converged = eig.converged;
  r.normalized_trace = normalized_trace(r.trace_estimate, r.grad_norm);
  return r;
}

namespace {

struct SampleAR {
  bool included = false;
  double value = 0.0;
};

SampleAR sample_ratio(const Model& model, const ParamVector& params, const Batch& example, const ARConfig& cfg) {
  const GradEval base = model.loss_and_grad(params, example);
  const ParamVector delta = sam_perturbation(base.grad, cfg.rho);

  auto at = [&](const std::vector<double>& d) {
    ParamVector p = params;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += d[i];
    p.round_to_dtype();
    return model.loss_and_grad(p, example);
  };

  std::vector<double> one_step(delta.values());
  const GradEval at_one_step = at(one_step);

  std::vector<double> d = cfg.init == AscentInit::one_step ? one_step : std::vector<double>(params.size(), 0.0);
  GradEval current = cfg.init == AscentInit::one_step ? at_one_step : base;
  double step = cfg.rho / cfg.k_steps;
  std::vector<double> candidate(d.size());
  for (int t = 0; t < cfg.k_steps; ++t) {
    const double gn = norm2(current.grad.span());
    if (gn == 0.0) break;
    for (std::size_t i = 0; i < d.size(); ++i) candidate[i] = d[i] + step * (current.grad[i] / gn);
    const double cn = norm2(candidate);
    if (cn > cfg.rho)
      for (auto& c : candidate) c *= cfg.rho / cn;
    GradEval next = at(candidate);
    if (next.loss >= current.loss) {
      d = candidate;
      current = std::move(next);
    } else {
      step *= 0.5;  // rejected: retry from the same point with a shorter step
    }
  }

  const double denominator = current.loss - base.loss;
  if (!(denominator >= cfg.log_floor)) return {};
  return {true, (at_one_step.loss - base.loss) / denominator};
}

}  // namespace

ARReport approximation_ratio(const Model& model, const ParamVector& params, const Batch& dataset,
                             const ARConfig& config) {
  validate_batch(dataset);
  if (config.k_steps < 1) throw ContractError("approximation_ratio: k_steps must be >= 1");
  if (config.n_samples < 1) throw ContractError("approximation_ratio: n_samples must be >= 1");
  if (!(config.rho > 0.0)) throw ContractError("approximation_ratio: rho must be > 0");

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min(order.size(), static_cast<std::size_t>(config.n_samples));
  if (take < order.size()) {
    std::mt19937_64 rng(config.seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(take);
  }

  std::vector<SampleAR> results(order.size());
  parallel_for(order.size(), config.workers, [&](std::size_t k) {
    const std::size_t idx[] = {order[k]};
    results[k] = sample_ratio(model, params, gather(dataset, idx), config);
  });

  ARReport report;
  report.k_steps = config.k_steps;
  report.rho = config.rho;
  for (const auto& r : results) {
    if (r.included)
      report.per_sample_values.push_back(r.value);
    else
      ++report.n_excluded;
  }
  const std::size_t m = report.per_sample_values.size();
  if (m == 0) throw EstimationError("approximation ratio: every sample was degenerate");
  report.n_samples = static_cast<int>(m);
  const auto& v = report.per_sample_values;
  report.ar_mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(m);
  if (m > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - report.ar_mean) * (x - report.ar_mean);
    report.ar_stderr = std::sqrt(ss / static_cast<double>(m - 1)) / std::sqrt(static_cast<double>(m));
  }
  return report;
}

}  // namespace crsam
