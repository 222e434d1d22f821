// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/serialize.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "crsam/errors.hpp"
#include "crsam/presets.hpp"

namespace crsam {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items())
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <class T>
void get_if(const Json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string get_string(const Json& j, const char* key, const std::string& fallback, const std::string& where) {
  std::string s = fallback;
  get_if(j, key, s, where);
  return s;
}

}  // namespace

Json to_json(const ModelSpec& spec) {
  Json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["dtype"] = std::string(to_string(spec.dtype));
  j["loss_scale"] = spec.loss_scale;
  if (spec.kind == ModelKind::quadratic) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < spec.A.rows; ++r) rows.push_back(std::vector<double>(spec.A.row(r).begin(), spec.A.row(r).end()));
    j["A"] = rows;
    j["b"] = spec.b;
    j["start"] = spec.start;
  } else {
    j["widths"] = spec.widths;
    j["activation"] = std::string(to_string(spec.activation));
  }
  return j;
}

ModelSpec model_spec_from_json(const Json& j) {
  const std::string where = "model";
  check_keys(j, {"kind", "dtype", "loss_scale", "A", "b", "start", "widths", "activation"}, where);
  ModelSpec spec;
  spec.kind = parse_model_kind(get_string(j, "kind", "mlp", where));
  spec.dtype = parse_dtype(get_string(j, "dtype", "f64", where));
  get_if(j, "loss_scale", spec.loss_scale, where);
  if (spec.kind == ModelKind::quadratic) {
    std::vector<std::vector<double>> rows;
    get_if(j, "A", rows, where);
    spec.A = DenseMatrix(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size()) throw ConfigError("model.A must be square");
      for (std::size_t c = 0; c < rows.size(); ++c) spec.A(r, c) = rows[r][c];
    }
    get_if(j, "b", spec.b, where);
    get_if(j, "start", spec.start, where);
  } else {
    get_if(j, "widths", spec.widths, where);
    spec.activation = parse_activation(get_string(j, "activation", "relu", where));
  }
  validate(spec);
  return spec;
}

Json to_json(const OptimizerConfig& c) {
  return Json{{"method", std::string(to_string(c.method))},
              {"peak_lr", c.peak_lr},
              {"momentum", c.momentum},
              {"weight_decay", c.weight_decay},
              {"rho", c.rho},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"total_epochs", c.total_epochs},
              {"log_floor", c.log_floor},
              {"grad_eps", c.grad_eps},
              {"parallel_probes", c.parallel_probes}};
}

OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig base) {
  const std::string where = "optimizer";
  check_keys(j,
             {"preset", "method", "peak_lr", "momentum", "weight_decay", "rho", "alpha", "beta", "total_epochs",
              "log_floor", "grad_eps", "parallel_probes"},
             where);
  OptimizerConfig c = base;
  if (j.contains("preset")) c = find_preset(get_string(j, "preset", "", where)).config;
  if (j.contains("method")) c.method = parse_method(get_string(j, "method", "", where));
  get_if(j, "peak_lr", c.peak_lr, where);
  get_if(j, "momentum", c.momentum, where);
  get_if(j, "weight_decay", c.weight_decay, where);
  get_if(j, "rho", c.rho, where);
  get_if(j, "alpha", c.alpha, where);
  get_if(j, "beta", c.beta, where);
  get_if(j, "total_epochs", c.total_epochs, where);
  get_if(j, "log_floor", c.log_floor, where);
  get_if(j, "grad_eps", c.grad_eps, where);
  get_if(j, "parallel_probes", c.parallel_probes, where);
  return c;
}

namespace {

Json optional_size(const std::optional<std::size_t>& v) { return v ? Json(*v) : Json(nullptr); }

void get_optional_size(const Json& j, const char* key, std::optional<std::size_t>& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  std::size_t v = 0;
  get_if(j, key, v, where);
  out = v;
}

Json to_json(const DatasetConfig& d) {
  return Json{{"source", std::string(to_string(d.source))},
              {"n", d.n},
              {"noise", d.noise},
              {"sigma", d.sigma},
              {"centers", d.centers},
              {"turns", d.turns},
              {"n_arms", d.n_arms},
              {"seed", d.seed},
              {"images", d.images},
              {"labels", d.labels},
              {"limit", optional_size(d.limit)},
              {"test_images", d.test_images},
              {"test_labels", d.test_labels},
              {"test_limit", optional_size(d.test_limit)},
              {"train_fraction", d.split.train_fraction},
              {"split_seed", d.split.seed},
              {"center", d.center}};
}

DatasetConfig dataset_config_from_json(const Json& j) {
  const std::string where = "dataset";
  check_keys(j,
             {"source", "n", "noise", "sigma", "centers", "turns", "n_arms", "seed", "images", "labels", "limit",
              "test_images", "test_labels", "test_limit", "train_fraction", "split_seed", "center"},
             where);
  DatasetConfig d;
  if (j.contains("source")) d.source = parse_data_source(get_string(j, "source", "", where));
  get_if(j, "n", d.n, where);
  get_if(j, "noise", d.noise, where);
  get_if(j, "sigma", d.sigma, where);
  get_if(j, "centers", d.centers, where);
  get_if(j, "turns", d.turns, where);
  get_if(j, "n_arms", d.n_arms, where);
  get_if(j, "seed", d.seed, where);
  get_if(j, "images", d.images, where);
  get_if(j, "labels", d.labels, where);
  get_optional_size(j, "limit", d.limit, where);
  get_if(j, "test_images", d.test_images, where);
  get_if(j, "test_labels", d.test_labels, where);
  get_optional_size(j, "test_limit", d.test_limit, where);
  get_if(j, "train_fraction", d.split.train_fraction, where);
  get_if(j, "split_seed", d.split.seed, where);
  get_if(j, "center", d.center, where);
  return d;
}

Json to_json(const DiagnosticsConfig& d) {
  return Json{{"geometry_every", d.geometry_every},
              {"ar_every", d.ar_every},
              {"ar_k", d.ar_k},
              {"ar_samples", d.ar_samples},
              {"ar_rho", d.ar_rho},
              {"probes", d.probes},
              {"power_iters", d.power_iters},
              {"final_geometry", d.final_geometry},
              {"landscape", d.landscape},
              {"landscape_resolution", d.landscape_resolution},
              {"landscape_extent", d.landscape_extent},
              {"record_wall_time", d.record_wall_time}};
}

DiagnosticsConfig diagnostics_from_json(const Json& j) {
  const std::string where = "diagnostics";
  check_keys(j,
             {"geometry_every", "ar_every", "ar_k", "ar_samples", "ar_rho", "probes", "power_iters",
              "final_geometry", "landscape", "landscape_resolution", "landscape_extent", "record_wall_time"},
             where);
  DiagnosticsConfig d;
  get_if(j, "geometry_every", d.geometry_every, where);
  get_if(j, "ar_every", d.ar_every, where);
  get_if(j, "ar_k", d.ar_k, where);
  get_if(j, "ar_samples", d.ar_samples, where);
  get_if(j, "ar_rho", d.ar_rho, where);
  get_if(j, "probes", d.probes, where);
  get_if(j, "power_iters", d.power_iters, where);
  get_if(j, "final_geometry", d.final_geometry, where);
  get_if(j, "landscape", d.landscape, where);
  get_if(j, "landscape_resolution", d.landscape_resolution, where);
  get_if(j, "landscape_extent", d.landscape_extent, where);
  get_if(j, "record_wall_time", d.record_wall_time, where);
  return d;
}

}  // namespace

Json to_json(const TrainConfig& c) {
  return Json{{"model", to_json(c.model)},
              {"dataset", to_json(c.dataset)},
              {"optimizer", to_json(c.optimizer)},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"diagnostics", to_json(c.diagnostics)},
              {"output_dir", c.output_dir}};
}

TrainConfig train_config_from_json(const Json& j) {
  const std::string where = "config";
  check_keys(j, {"model", "dataset", "optimizer", "epochs", "batch_size", "seed", "diagnostics", "output_dir"},
             where);
  TrainConfig c;
  if (!j.contains("model")) throw ConfigError("config is missing 'model'");
  c.model = model_spec_from_json(j.at("model"));
  if (j.contains("dataset")) c.dataset = dataset_config_from_json(j.at("dataset"));
  get_if(j, "epochs", c.epochs, where);
  get_if(j, "batch_size", c.batch_size, where);
  get_if(j, "seed", c.seed, where);
  get_if(j, "output_dir", c.output_dir, where);
  if (j.contains("diagnostics")) c.diagnostics = diagnostics_from_json(j.at("diagnostics"));
  OptimizerConfig base;
  base.total_epochs = c.epochs;
  if (j.contains("optimizer")) {
    const Json& o = j.at("optimizer");
    c.optimizer = optimizer_config_from_json(o, base);
    if (!o.contains("total_epochs")) c.optimizer.total_epochs = c.epochs;
  } else {
    c.optimizer = base;
  }
  return c;
}

Json to_json(const CurvatureReport& r) {
  return Json{{"grad_norm", r.grad_norm},
              {"trace_estimate", r.trace_estimate},
              {"trace_stderr", r.trace_stderr},
              {"n_probes", r.n_probes},
              {"top_eigenvalue", r.top_eigenvalue},
              {"top_eigenvalue_converged", r.top_eigenvalue_converged},
              {"normalized_trace", r.normalized_trace},
              {"dataset_tag", r.dataset_tag}};
}

CurvatureReport curvature_report_from_json(const Json& j) {
  CurvatureReport r;
  const std::string where = "curvature report";
  get_if(j, "grad_norm", r.grad_norm, where);
  get_if(j, "trace_estimate", r.trace_estimate, where);
  get_if(j, "trace_stderr", r.trace_stderr, where);
  get_if(j, "n_probes", r.n_probes, where);
  get_if(j, "top_eigenvalue", r.top_eigenvalue, where);
  get_if(j, "top_eigenvalue_converged", r.top_eigenvalue_converged, where);
  get_if(j, "normalized_trace", r.normalized_trace, where);
  get_if(j, "dataset_tag", r.dataset_tag, where);
  return r;
}

Json to_json(const ARReport& r) {
  return Json{{"ar_mean", r.ar_mean},
              {"ar_stderr", r.ar_stderr},
              {"n_samples", r.n_samples},
              {"n_excluded", r.n_excluded},
              {"k_steps", r.k_steps},
              {"rho", r.rho},
              {"per_sample_values", r.per_sample_values}};
}

Json checkpoint_to_json(const ModelSpec& spec, const Checkpoint& checkpoint) {
  return Json{{"epoch", checkpoint.epoch},
              {"model", to_json(spec)},
              {"dtype", std::string(to_string(checkpoint.params.dtype()))},
              {"params", checkpoint.params.values()}};
}

std::pair<ModelSpec, Checkpoint> checkpoint_from_json(const Json& j) {
  const std::string where = "checkpoint";
  check_keys(j, {"epoch", "model", "dtype", "params"}, where);
  if (!j.contains("model") || !j.contains("params")) throw ConfigError("checkpoint needs 'model' and 'params'");
  ModelSpec spec = model_spec_from_json(j.at("model"));
  Checkpoint cp;
  get_if(j, "epoch", cp.epoch, where);
  std::vector<double> values;
  get_if(j, "params", values, where);
  cp.params = ParamVector(std::move(values), parse_dtype(get_string(j, "dtype", "f64", where)));
  if (cp.params.size() != param_count(spec))
    throw ConfigError("checkpoint parameter count does not match its model");
  return {std::move(spec), std::move(cp)};
}

void apply_override(Json& config, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  std::string pointer;
  std::stringstream ss(dotted_key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("malformed override key '" + dotted_key + "'");
    pointer += "/" + part;
  }
  Json parsed = Json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  try {
    config[Json::json_pointer(pointer)] = parsed;
  } catch (const Json::exception& e) {
    throw ConfigError("cannot apply override '" + dotted_key + "': " + e.what());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("'" + path.string() + "' is not valid JSON");
  return j;
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TrainConfig load_train_config(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  Json j = read_json_file(path);
  for (const auto& [key, value] : overrides) apply_override(j, key, value);
  TrainConfig c = train_config_from_json(j);
  validate(c);
  return c;
}

}  // namespace crsam
