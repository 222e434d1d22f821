// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/presets.hpp"

#include "crsam/errors.hpp"

namespace crsam {

namespace {

OptimizerPreset make(std::string name, Method method, double lr, double wd, int epochs, double rho, double alpha,
                     double beta, bool desk, std::string note) {
  OptimizerPreset p;
  p.name = std::move(name);
  p.config.method = method;
  p.config.peak_lr = lr;
  p.config.momentum = 0.9;
  p.config.weight_decay = wd;
  p.config.total_epochs = epochs;
  p.config.rho = rho;
  p.config.alpha = alpha;
  p.config.beta = beta;
  p.desk_reproducible = desk;
  p.note = std::move(note);
  return p;
}

std::vector<OptimizerPreset> build() {
  std::vector<OptimizerPreset> v;
  const std::string ref = "published large-scale setting; reference only";
  // Small synthetic two-moons runs.
  v.push_back(make("moons-sgd", Method::sgd, 0.05, 5e-4, 200, 0.0, 0.0, 0.0, true, "two-moons MLP baseline"));
  v.push_back(make("moons-sam", Method::sam, 0.05, 5e-4, 200, 0.05, 0.0, 0.0, true, "two-moons MLP"));
  v.push_back(make("moons-crsam", Method::crsam, 0.05, 5e-4, 200, 0.05, 5e-3, 5e-4, true, "two-moons MLP"));

  v.push_back(make("cifar10-resnet18-sgd", Method::sgd, 0.05, 5e-3, 200, 0.0, 0.0, 0.0, false, ref));
  v.push_back(make("cifar10-resnet18-sam", Method::sam, 0.05, 5e-3, 200, 0.05, 0.0, 0.0, false, ref));
  v.push_back(make("cifar10-resnet18-crsam", Method::crsam, 0.05, 5e-3, 200, 0.10, 0.1, 0.01, false, ref));
  v.push_back(make("cifar100-resnet18-sgd", Method::sgd, 0.05, 5e-3, 200, 0.0, 0.0, 0.0, false, ref));
  v.push_back(make("cifar100-resnet18-sam", Method::sam, 0.05, 5e-3, 200, 0.10, 0.0, 0.0, false, ref));
  v.push_back(make("cifar100-resnet18-crsam", Method::crsam, 0.05, 5e-3, 200, 0.15, 0.5, 0.01, false, ref));
  v.push_back(make("cifar10-resnet101-sam", Method::sam, 0.05, 5e-3, 200, 0.05, 0.0, 0.0, false, ref));
  v.push_back(make("cifar10-resnet101-crsam", Method::crsam, 0.05, 5e-3, 200, 0.10, 0.2, 0.05, false, ref));
  v.push_back(make("cifar100-resnet101-sam", Method::sam, 0.05, 5e-3, 200, 0.10, 0.0, 0.0, false, ref));
  v.push_back(make("cifar100-resnet101-crsam", Method::crsam, 0.05, 5e-3, 200, 0.15, 0.5, 0.05, false, ref));
  v.push_back(make("cifar10-wrn28-10-sam", Method::sam, 0.05, 1e-3, 200, 0.10, 0.0, 0.0, false, ref));
  v.push_back(make("cifar10-wrn28-10-crsam", Method::crsam, 0.05, 1e-3, 200, 0.10, 0.5, 0.1, false, ref));
  v.push_back(make("cifar100-wrn28-10-sam", Method::sam, 0.05, 1e-3, 200, 0.10, 0.0, 0.0, false, ref));
  v.push_back(make("cifar100-wrn28-10-crsam", Method::crsam, 0.05, 1e-3, 200, 0.15, 0.5, 0.1, false, ref));
  v.push_back(make("cifar10-pyramidnet110-sam", Method::sam, 0.05, 5e-3, 200, 0.15, 0.0, 0.0, false, ref));
  v.push_back(make("cifar10-pyramidnet110-crsam", Method::crsam, 0.05, 5e-3, 200, 0.20, 0.5, 0.1, false, ref));
  v.push_back(make("imagenet-resnet50-sgd", Method::sgd, 1.3, 3e-5, 90, 0.0, 0.0, 0.0, false, ref));
  v.push_back(make("imagenet-resnet50-sam", Method::sam, 1.3, 3e-5, 90, 0.10, 0.0, 0.0, false, ref));
  v.push_back(make("imagenet-resnet50-crsam", Method::crsam, 1.3, 3e-5, 90, 0.15, 0.1, 0.01, false, ref));
  v.push_back(make("imagenet-resnet101-crsam", Method::crsam, 1.3, 3e-5, 90, 0.15, 0.2, 0.01, false, ref));
  return v;
}

}  // namespace

const std::vector<OptimizerPreset>& optimizer_presets() {
  static const std::vector<OptimizerPreset> presets = build();
  return presets;
}

const OptimizerPreset& find_preset(std::string_view name) {
  for (const auto& p : optimizer_presets())
    if (p.name == name) return p;
  throw ConfigError("unknown optimizer preset '" + std::string(name) + "'");
}

}  // namespace crsam
