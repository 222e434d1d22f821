// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "crsam/model.hpp"

namespace crsam {

enum class Method { sgd, sam, crsam };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct OptimizerConfig {
  Method method = Method::sgd;
  double peak_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Perturbation radius shared by the SAM ascent and the curvature probes.
  double rho = 0.05;
  /// Weight on log of the second-difference (trace) probe.
  double alpha = 0.0;
  /// Weight on log of the first-difference (gradient-norm) probe.
  double beta = 0.0;
  int total_epochs = 200;
  /// Lower clamp for the log arguments of the curvature regularizer.
  double log_floor = 1e-8;
  /// Below this gradient norm the ascent direction is taken as zero.
  double grad_eps = 1e-12;
  /// Evaluate the two probe points of a CR-SAM step on separate threads.
  bool parallel_probes = false;

  bool operator==(const OptimizerConfig&) const = default;
};

void validate(const OptimizerConfig& config);

struct OptimizerState {
  ParamVector momentum_buffer;
  std::int64_t step_count = 0;
  int epoch = 0;

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_state(const ParamVector& params);

struct StepReport {
  double base_loss = 0.0;
  /// Loss at the ascent point w + rho*v (SAM, CR-SAM).
  double sam_loss = 0.0;
  /// Curvature regularizer value, up to an additive constant (CR-SAM).
  double reg_value = 0.0;
  /// L(w+rho v) - L(w-rho v)
  double d1 = 0.0;
  /// L(w+rho v) + L(w-rho v) - 2 L(w)
  double d2 = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  bool d1_clamped = false;
  bool d2_clamped = false;
  int grad_evals = 0;

  bool operator==(const StepReport&) const = default;
};

struct StepOutcome {
  ParamVector new_params;
  OptimizerState new_state;
  StepReport report;
};

/// peak_lr * (1 + cos(pi * epoch / total_epochs)) / 2
double cosine_lr(int epoch, int total_epochs, double peak_lr);

/// rho * g / ||g||_2, or the zero vector when ||g|| < eps.
ParamVector sam_perturbation(const ParamVector& grad, double rho, double eps = 1e-12);

/// Momentum update shared by every method:
///   buffer <- momentum*buffer + descent_grad + weight_decay*params
///   params <- params - lr*buffer
/// with lr = cosine_lr(state.epoch, ...). Throws NumericError on a non-finite result.
StepOutcome apply_update(const ParamVector& params, const ParamVector& descent_grad, const OptimizerConfig& config,
                         const OptimizerState& state, StepReport report);

StepOutcome sgd_step(const Model& model, const ParamVector& params, const Batch& batch,
                     const OptimizerConfig& config, const OptimizerState& state);

StepOutcome sam_step(const Model& model, const ParamVector& params, const Batch& batch,
                     const OptimizerConfig& config, const OptimizerState& state);

/// SAM descent gradient plus the gradient of the finite-difference curvature
/// regularizer
///
///   R_c(w) = alpha*log(L(w+rho v) + L(w-rho v) - 2L(w)) + beta*log(L(w+rho v) - L(w-rho v))
///
/// with v = grad/||grad|| held constant during differentiation. The update is
/// grad L(w + rho v) + grad R_c(w) + weight_decay*w, fed through the momentum
/// rule. Exactly three gradient evaluations are made (w, w+rho v, w-rho v);
/// the last two are independent and may run concurrently with identical results.
StepOutcome crsam_step(const Model& model, const ParamVector& params, const Batch& batch,
                       const OptimizerConfig& config, const OptimizerState& state);

/// Dispatches on config.method.
StepOutcome optimizer_step(const Model& model, const ParamVector& params, const Batch& batch,
                           const OptimizerConfig& config, const OptimizerState& state);

struct RegularizerResult {
  ParamVector reg_grad;
  double reg_value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  bool d1_clamped = false;
  bool d2_clamped = false;
};

/// Combines loss/gradient evaluations at w, w+rho v, w-rho v into the
/// regularizer value and gradient. Terms whose log argument falls below
/// log_floor are clamped: their gradient contribution is zero.
RegularizerResult combine_regularizer(const GradEval& at_w, const GradEval& at_plus, const GradEval& at_minus,
                                      double alpha, double beta, double log_floor);

/// Evaluates the model at the probe points w +/- rho*v for a caller-supplied
/// direction v and returns the regularizer value and gradient.
RegularizerResult crsam_regularizer(const Model& model, const ParamVector& params, const Batch& batch,
                                    std::span<const double> v, const OptimizerConfig& config);

/// Scalar regularizer value alone (three loss evaluations), for gradient checks.
double crsam_regularizer_value(const Model& model, const ParamVector& params, const Batch& batch,
                               std::span<const double> v, const OptimizerConfig& config);

}  // namespace crsam
