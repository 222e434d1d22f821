// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/errors.hpp"
#include "crsam/presets.hpp"
#include "crsam/serialize.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace crsam;

namespace {

TrainConfig base() {
  TrainConfig c;
  c.model = make_mlp({2, 4, 2});
  return c;
}

}  // namespace

TEST_CASE("format_double round-trips") {
  testing::Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const double x = testing::gaussian_vector(rng, 1, testing::log_uniform(rng, 1e-200, 1e200))[0];
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("train config round trip") {
  TrainConfig c;
  c.model = make_mlp({2, 5, 3}, Activation::tanh, Dtype::f32);
  c.dataset.source = DataSource::spiral;
  c.dataset.n = 300;
  c.dataset.turns = 2.25;
  c.dataset.split = {0.7, 9};
  c.dataset.center = true;
  c.optimizer = find_preset("moons-crsam").config;
  c.optimizer.rho = 0.123456789012345;
  c.optimizer.parallel_probes = true;
  c.epochs = 17;
  c.batch_size = 33;
  c.seed = 1234567890123ULL;
  c.diagnostics.geometry_every = 5;
  c.diagnostics.landscape = true;
  c.output_dir = "somewhere";
  const auto back = train_config_from_json(to_json(c));
  CHECK(back == c);
  CHECK(train_config_from_json(Json::parse(to_json(c).dump())) == c);

  TrainConfig q;
  q.model = make_quadratic(testing::diag({1.0, 2.0}), {0.5, -0.5});
  CHECK(model_spec_from_json(to_json(q.model)) == q.model);
}

TEST_CASE("unknown keys and bad values are config errors") {
  Json j = to_json(base());
  CHECK_NOTHROW(train_config_from_json(j));
  j["optimizer"]["lr"] = 0.1;
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(base());
  j["epochs"] = "many";
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(base());
  j["typo"] = 1;
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(base());
  j.erase("model");
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(base());
  j["optimizer"]["preset"] = "nope";
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
}

TEST_CASE("optimizer preset key with explicit overrides") {
  const Json j = Json::parse(R"({"preset": "moons-sam", "rho": 0.2})");
  const auto c = optimizer_config_from_json(j);
  const auto& p = find_preset("moons-sam").config;
  CHECK(c.method == Method::sam);
  CHECK(c.rho == 0.2);
  CHECK(c.peak_lr == p.peak_lr);
  CHECK(c.weight_decay == p.weight_decay);
}

TEST_CASE("dotted overrides") {
  Json j = to_json(base());
  apply_override(j, "optimizer.rho", "0.07");
  apply_override(j, "model.activation", "relu");
  apply_override(j, "diagnostics.landscape", "true");
  const auto c = train_config_from_json(j);
  CHECK(c.optimizer.rho == 0.07);
  CHECK(c.model.activation == Activation::relu);
  CHECK(c.diagnostics.landscape);
  CHECK_THROWS_AS(apply_override(j, "", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "a..b", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "epochs.x", "1"), ConfigError);
}

TEST_CASE("config files") {
  testing::TempDir dir("cfg");
  TrainConfig c = base();
  c.epochs = 3;
  c.optimizer.total_epochs = 3;
  write_json_file(to_json(c), dir / "c.json");
  const auto back = load_train_config(dir / "c.json", {{"seed", "9"}});
  CHECK(back.seed == 9);
  CHECK(back.epochs == 3);
  testing::spit(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_train_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_train_config(dir / "absent.json"), ConfigError);
}

TEST_CASE("reports and checkpoints") {
  CurvatureReport r;
  r.grad_norm = 0.1;
  r.trace_estimate = 1.0 / 3.0;
  r.trace_stderr = 1e-300;
  r.n_probes = 7;
  r.top_eigenvalue = -2.5;
  r.top_eigenvalue_converged = true;
  r.normalized_trace = 10.0 / 3.0;
  r.dataset_tag = "train";
  CHECK(curvature_report_from_json(to_json(r)) == r);

  const ModelSpec spec = make_mlp({2, 3, 2});
  Checkpoint cp{12, ParamVector(std::vector<double>(param_count(spec), 0.1))};
  const auto [s2, c2] = checkpoint_from_json(checkpoint_to_json(spec, cp));
  CHECK(s2 == spec);
  CHECK(c2.epoch == 12);
  CHECK(c2.params == cp.params);
  Json bad = checkpoint_to_json(spec, cp);
  bad["params"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(bad), ConfigError);
}

TEST_CASE("presets") {
  CHECK_THROWS_AS(find_preset("resnet-9000"), ConfigError);
  for (const auto& p : optimizer_presets()) {
    CHECK_NOTHROW(validate(p.config));
    if (p.desk_reproducible) CHECK(p.name.rfind("moons-", 0) == 0);
  }
  CHECK(find_preset("moons-crsam").config.method == Method::crsam);
  CHECK_FALSE(find_preset("cifar10-resnet18-crsam").desk_reproducible);
}

TEST_CASE("published reference settings") {
  struct Row {
    const char* name;
    double rho, alpha, beta, wd;
  };
  for (const Row& r : {Row{"cifar10-resnet18-crsam", 0.10, 0.1, 0.01, 5e-3},
                       Row{"cifar100-resnet18-crsam", 0.15, 0.5, 0.01, 5e-3},
                       Row{"cifar10-resnet18-sam", 0.05, 0.0, 0.0, 5e-3},
                       Row{"cifar100-resnet18-sam", 0.10, 0.0, 0.0, 5e-3},
                       Row{"cifar10-resnet101-crsam", 0.10, 0.2, 0.05, 5e-3},
                       Row{"cifar100-resnet101-crsam", 0.15, 0.5, 0.05, 5e-3}}) {
    const auto& p = find_preset(r.name);
    INFO(r.name);
    CHECK(p.config.rho == r.rho);
    CHECK(p.config.alpha == r.alpha);
    CHECK(p.config.beta == r.beta);
    CHECK(p.config.weight_decay == r.wd);
    CHECK(p.config.peak_lr == 0.05);
    CHECK(p.config.total_epochs == 200);
  }
}
