// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crsam/model.hpp"

namespace crsam {

struct ProbeResult {
  double value = 0.0;
  double probe_rho = 0.0;
  double direction_norm = 0.0;
};

/// (L(w + rho v) - L(w - rho v)) / (2 rho), an estimate of v'grad L.
ProbeResult directional_grad_fd(const Model& model, const ParamVector& params, const Batch& batch,
                                std::span<const double> v, double rho);

/// (L(w + rho v) + L(w - rho v) - 2 L(w)) / rho^2, an estimate of v'Hv.
ProbeResult quadratic_form_fd(const Model& model, const ParamVector& params, const Batch& batch,
                              std::span<const double> v, double rho);

/// Default central-difference step for Hessian-vector products: 1e-4 * (1 + ||w||_inf).
double default_hvp_eps(const ParamVector& params);

/// Central-difference Hessian-vector product along u = v/||v||, rescaled by ||v||:
///   ||v|| * (grad L(w + eps u) - grad L(w - eps u)) / (2 eps)
ParamVector hvp_fd(const Model& model, const ParamVector& params, const Batch& batch, std::span<const double> v,
                   double eps);

enum class ProbeKind { gaussian, rademacher };

ProbeKind parse_probe_kind(const std::string& text);

struct TraceEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  int n_probes = 0;
};

struct HutchinsonOptions {
  ProbeKind probe_kind = ProbeKind::gaussian;
  /// <= 0 selects default_hvp_eps.
  double hvp_eps = 0.0;
  unsigned workers = 1;
};

/// Mean of v'Hv over random probes (Hutchinson). Probe vectors are drawn up
/// front from `seed` and reduced in index order, so the estimate does not
/// depend on the worker count.
TraceEstimate hutchinson_trace(const Model& model, const ParamVector& params, const Batch& batch, int n_probes,
                               std::uint64_t seed, const HutchinsonOptions& options = {});

struct EigenEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Power iteration on H via hvp_fd. Returns the signed eigenvalue of largest
/// magnitude; stops when successive Rayleigh quotients agree to `tol` relative.
/// On non-convergence the last iterate is returned with converged = false.
EigenEstimate top_eigenvalue(const Model& model, const ParamVector& params, const Batch& batch, int max_iters,
                             double tol, std::uint64_t seed, double hvp_eps = 0.0);

/// C(w) = Tr(H) / ||grad L||. Throws DegenerateInputError for grad_norm <= 0.
double normalized_trace(double trace, double grad_norm);

struct CurvatureReport {
  double grad_norm = 0.0;
  double trace_estimate = 0.0;
  double trace_stderr = 0.0;
  int n_probes = 0;
  double top_eigenvalue = 0.0;
  bool top_eigenvalue_converged = false;
  double normalized_trace = 0.0;
  std::string dataset_tag;

  bool operator==(const CurvatureReport&) const = default;
};

struct GeometryOptions {
  int n_probes = 100;
  std::uint64_t seed = 0;
  ProbeKind probe_kind = ProbeKind::gaussian;
  int power_iters = 100;
  double power_tol = 1e-6;
  unsigned workers = 1;
  std::string dataset_tag = "train";
};

/// Full-batch gradient norm, Hutchinson trace, top eigenvalue and C(w).
CurvatureReport geometry_report(const Model& model, const ParamVector& params, const Batch& dataset,
                                const GeometryOptions& options);

enum class AscentInit { one_step, origin };

struct ARConfig {
  double rho = 0.05;
  int k_steps = 20;
  int n_samples = 5000;
  std::uint64_t seed = 0;
  AscentInit init = AscentInit::one_step;
  /// Samples whose reference increase falls below this are excluded.
  double log_floor = 1e-8;
  unsigned workers = 1;
};

struct ARReport {
  double ar_mean = 0.0;
  double ar_stderr = 0.0;
  int n_samples = 0;
  int n_excluded = 0;
  int k_steps = 0;
  double rho = 0.0;
  std::vector<double> per_sample_values;

  bool operator==(const ARReport&) const = default;
};

/// Per-example ratio of the one-step ascent increase to a k-step projected
/// ascent increase, averaged over up to n_samples examples drawn without
/// replacement. The k-step ascent starts from the one-step point (or the
/// origin), takes normalized gradient steps of length rho/k, projects onto the
/// rho-ball and only accepts steps that do not decrease the per-example loss.
ARReport approximation_ratio(const Model& model, const ParamVector& params, const Batch& dataset,
                             const ARConfig& config);

struct TrustRegionSolution {
  std::vector<double> delta;
  double max_increase = 0.0;
  bool hard_case = false;
};

/// Exact maximizer of g'd + 0.5 d'Ad over ||d|| <= rho (dimension <= 64), via
/// eigendecomposition and bisection on the secular equation.
TrustRegionSolution exact_worst_case_quadratic(const DenseMatrix& A, std::span<const double> g, double rho);

/// g'd + 0.5 d'Ad
double quadratic_increase(const DenseMatrix& A, std::span<const double> g, std::span<const double> d);

}  // namespace crsam
