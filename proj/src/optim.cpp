// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "crsam/errors.hpp"
#include "crsam/parallel.hpp"

namespace crsam {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::sgd: return "sgd";
    case Method::sam: return "sam";
    case Method::crsam: return "crsam";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "sgd") return Method::sgd;
  if (text == "sam") return Method::sam;
  if (text == "crsam" || text == "cr-sam") return Method::crsam;
  throw ConfigError("unknown optimizer method '" + std::string(text) + "'");
}

void validate(const OptimizerConfig& c) {
  if (!(c.peak_lr > 0.0)) throw ConfigError("optimizer.peak_lr must be > 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("optimizer.momentum must be in [0, 1)");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (c.method != Method::sgd && !(c.rho > 0.0)) throw ConfigError("optimizer.rho must be > 0");
  if (!(c.alpha >= 0.0) || !(c.beta >= 0.0)) throw ConfigError("optimizer.alpha and optimizer.beta must be >= 0");
  if (c.alpha > 0.0 && c.beta > 0.0 && !(c.alpha > c.beta))
    throw ConfigError("optimizer.alpha must exceed optimizer.beta when both are nonzero");
  if (c.total_epochs < 1) throw ConfigError("optimizer.total_epochs must be >= 1");
  if (!(c.log_floor > 0.0)) throw ConfigError("optimizer.log_floor must be > 0");
  if (!(c.grad_eps >= 0.0)) throw ConfigError("optimizer.grad_eps must be >= 0");
}

OptimizerState make_state(const ParamVector& params) {
  OptimizerState s;
  s.momentum_buffer = ParamVector(params.size(), params.dtype());
  return s;
}

double cosine_lr(int epoch, int total_epochs, double peak_lr) {
  if (total_epochs < 1 || epoch < 0 || epoch > total_epochs)
    throw ContractError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(total_epochs) + "]");
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

ParamVector sam_perturbation(const ParamVector& grad, double rho, double eps) {
  if (!(rho > 0.0)) throw ContractError("sam_perturbation: rho must be > 0");
  ParamVector out(grad.size(), grad.dtype());
  const double g = norm2(grad.span());
  if (!(g >= eps) || g == 0.0) return out;
  const double scale = rho / g;
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = grad[i] * scale;
  out.round_to_dtype();
  return out;
}

StepOutcome apply_update(const ParamVector& params, const ParamVector& descent_grad, const OptimizerConfig& config,
                         const OptimizerState& state, StepReport report) {
  if (descent_grad.size() != params.size() || state.momentum_buffer.size() != params.size())
    throw ContractError("optimizer update: dimension mismatch");
  const double lr = cosine_lr(state.epoch, config.total_epochs, config.peak_lr);
  StepOutcome out;
  out.new_state = state;
  out.new_state.step_count = state.step_count + 1;
  ParamVector& buf = out.new_state.momentum_buffer;
  out.new_params = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    buf[i] = config.momentum * buf[i] + (descent_grad[i] + config.weight_decay * params[i]);
    out.new_params[i] = params[i] - lr * buf[i];
  }
  buf.round_to_dtype();
  out.new_params.round_to_dtype();
  if (!out.new_params.all_finite() || !buf.all_finite())
    throw NumericError("optimizer produced non-finite parameters", state.step_count);
  report.lr = lr;
  out.report = report;
  return out;
}

namespace {

ParamVector offset_params(const ParamVector& params, const ParamVector& delta, double sign) {
  ParamVector out = params;
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = params[i] + sign * delta[i];
  out.round_to_dtype();
  return out;
}

GradEval eval_or_throw(const Model& model, const ParamVector& params, const Batch& batch, std::int64_t step) {
  try {
    return model.loss_and_grad(params, batch);
  } catch (const NumericError& e) {
    throw NumericError(e.what(), step);
  }
}

}  // namespace

StepOutcome sgd_step(const Model& model, const ParamVector& params, const Batch& batch,
                     const OptimizerConfig& config, const OptimizerState& state) {
  if (config.method != Method::sgd) throw ContractError("sgd_step called with a non-sgd config");
  const GradEval base = eval_or_throw(model, params, batch, state.step_count);
  StepReport report;
  report.base_loss = base.loss;
  report.grad_norm = norm2(base.grad.span());
  report.grad_evals = 1;
  return apply_update(params, base.grad, config, state, report);
}

StepOutcome sam_step(const Model& model, const ParamVector& params, const Batch& batch,
                     const OptimizerConfig& config, const OptimizerState& state) {
  if (config.method != Method::sam) throw ContractError("sam_step called with a non-sam config");
  const GradEval base = eval_or_throw(model, params, batch, state.step_count);
  const ParamVector eps = sam_perturbation(base.grad, config.rho, config.grad_eps);
  const GradEval ascent = eval_or_throw(model, offset_params(params, eps, 1.0), batch, state.step_count);
  StepReport report;
  report.base_loss = base.loss;
  report.sam_loss = ascent.loss;
  report.grad_norm = norm2(base.grad.span());
  report.grad_evals = 2;
  return apply_update(params, ascent.grad, config, state, report);
}

RegularizerResult combine_regularizer(const GradEval& at_w, const GradEval& at_plus, const GradEval& at_minus,
                                      double alpha, double beta, double log_floor) {
  const std::size_t n = at_w.grad.size();
  if (at_plus.grad.size() != n || at_minus.grad.size() != n)
    throw ContractError("regularizer: gradient dimension mismatch");
  RegularizerResult r;
  r.d2 = at_plus.loss + at_minus.loss - 2.0 * at_w.loss;
  r.d1 = at_plus.loss - at_minus.loss;
  if (!std::isfinite(r.d1) || !std::isfinite(r.d2)) throw NumericError("regularizer: non-finite probe losses");
  r.d2_clamped = r.d2 < log_floor;
  r.d1_clamped = r.d1 < log_floor;
  r.reg_value = alpha * std::log(std::max(r.d2, log_floor)) + beta * std::log(std::max(r.d1, log_floor));
  r.reg_grad = ParamVector(n, at_w.grad.dtype());
  if (alpha > 0.0 && !r.d2_clamped) {
    const double c = alpha / r.d2;
    for (std::size_t i = 0; i < n; ++i)
      r.reg_grad[i] += c * ((at_plus.grad[i] + at_minus.grad[i]) - 2.0 * at_w.grad[i]);
  }
  if (beta > 0.0 && !r.d1_clamped) {
    const double c = beta / r.d1;
    for (std::size_t i = 0; i < n; ++i) r.reg_grad[i] += c * (at_plus.grad[i] - at_minus.grad[i]);
  }
  r.reg_grad.round_to_dtype();
  return r;
}

namespace {

ParamVector probe_point(const ParamVector& params, std::span<const double> v, double rho, double sign) {
  if (v.size() != params.size()) throw ContractError("probe direction dimension mismatch");
  ParamVector out = params;
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = params[i] + sign * (rho * v[i]);
  out.round_to_dtype();
  return out;
}

}  // namespace

RegularizerResult crsam_regularizer(const Model& model, const ParamVector& params, const Batch& batch,
                                    std::span<const double> v, const OptimizerConfig& config) {
  if (!(config.rho > 0.0)) throw ContractError("crsam_regularizer: rho must be > 0");
  if (config.alpha < 0.0 || config.beta < 0.0) throw ContractError("crsam_regularizer: alpha, beta must be >= 0");
  const GradEval at_w = model.loss_and_grad(params, batch);
  auto [plus, minus] = fork_join([&] { return model.loss_and_grad(probe_point(params, v, config.rho, 1.0), batch); },
                                 [&] { return model.loss_and_grad(probe_point(params, v, config.rho, -1.0), batch); },
                                 config.parallel_probes);
  return combine_regularizer(at_w, plus, minus, config.alpha, config.beta, config.log_floor);
}

double crsam_regularizer_value(const Model& model, const ParamVector& params, const Batch& batch,
                               std::span<const double> v, const OptimizerConfig& config) {
  const double l0 = model.loss(params, batch);
  const double lp = model.loss(probe_point(params, v, config.rho, 1.0), batch);
  const double lm = model.loss(probe_point(params, v, config.rho, -1.0), batch);
  const double d2 = lp + lm - 2.0 * l0;
  const double d1 = lp - lm;
  return config.alpha * std::log(std::max(d2, config.log_floor)) +
         config.beta * std::log(std::max(d1, config.log_floor));
}

StepOutcome crsam_step(const Model& model, const ParamVector& params, const Batch& batch,
                       const OptimizerConfig& config, const OptimizerState& state) {
  if (config.method != Method::crsam) throw ContractError("crsam_step called with a non-crsam config");
  const std::int64_t step = state.step_count;
  const GradEval base = eval_or_throw(model, params, batch, step);
  const ParamVector eps = sam_perturbation(base.grad, config.rho, config.grad_eps);
  auto [plus, minus] = fork_join([&] { return eval_or_throw(model, offset_params(params, eps, 1.0), batch, step); },
                                 [&] { return eval_or_throw(model, offset_params(params, eps, -1.0), batch, step); },
                                 config.parallel_probes);
  const RegularizerResult reg =
      combine_regularizer(base, plus, minus, config.alpha, config.beta, config.log_floor);

  ParamVector descent = plus.grad;
  const bool reg_active = (config.alpha > 0.0 && !reg.d2_clamped) || (config.beta > 0.0 && !reg.d1_clamped);
  if (reg_active) {
    for (std::size_t i = 0; i < descent.size(); ++i) descent[i] = plus.grad[i] + reg.reg_grad[i];
    descent.round_to_dtype();
  }

  StepReport report;
  report.base_loss = base.loss;
  report.sam_loss = plus.loss;
  report.reg_value = reg.reg_value;
  report.d1 = reg.d1;
  report.d2 = reg.d2;
  report.d1_clamped = reg.d1_clamped;
  report.d2_clamped = reg.d2_clamped;
  report.grad_norm = norm2(base.grad.span());
  report.grad_evals = 3;
  return apply_update(params, descent, config, state, report);
}

StepOutcome optimizer_step(const Model& model, const ParamVector& params, const Batch& batch,
                           const OptimizerConfig& config, const OptimizerState& state) {
  switch (config.method) {
    case Method::sgd: return sgd_step(model, params, batch, config, state);
    case Method::sam: return sam_step(model, params, batch, config, state);
    case Method::crsam: return crsam_step(model, params, batch, config, state);
  }
  throw ContractError("unknown optimizer method");
}

}  // namespace crsam
