// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

// crsam: train, inspect and self-check sharpness-aware optimizers.
//
// Exit codes: 0 success, 1 runtime failure or failed self-check, 2 bad
// configuration or arguments, 3 numeric divergence during training.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "crsam/errors.hpp"
#include "crsam/harness.hpp"
#include "crsam/selfcheck.hpp"
#include "crsam/serialize.hpp"

namespace {

using namespace crsam;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kDiverged = 3;

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Leftover "--dotted.key value" pairs become config overrides.
Overrides parse_overrides(const std::vector<std::string>& extras) {
  Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& flag = extras[i];
    if (flag.rfind("--", 0) != 0 || flag.size() <= 2) throw ConfigError("unexpected argument '" + flag + "'");
    std::string key = flag.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("override '" + flag + "' is missing a value");
      value = extras[++i];
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

struct Loaded {
  ModelSpec spec;
  Checkpoint checkpoint;
};

Loaded load_checkpoint(const std::string& path) {
  auto [spec, cp] = checkpoint_from_json(read_json_file(path));
  return {std::move(spec), std::move(cp)};
}

Batch pick_split(const Split& split, const std::string& which) {
  if (which == "train") return as_batch(split.train);
  if (which == "test") return as_batch(split.test);
  throw ConfigError("--split must be 'train' or 'test'");
}

int cmd_train(const std::string& config_path, const Overrides& overrides) {
  TrainConfig config = load_train_config(config_path, overrides);
  if (const char* env = std::getenv("CRSAM_OUTPUT_DIR"); env && *env) config.output_dir = env;
  try {
    const RunResult result = run_training(config);
    write_run(result, config.output_dir);
    const MetricRecord& last = result.records.back();
    std::printf("epochs=%d train_loss=%s test_acc=%s output=%s\n", last.epoch, format_double(last.train_loss).c_str(),
                format_double(last.test_acc).c_str(), config.output_dir.c_str());
  } catch (const DivergenceError& e) {
    write_run(e.partial(), config.output_dir);
    throw;
  }
  return kOk;
}

struct GeometryArgs {
  std::string checkpoint, config, out = "geometry.json";
  std::vector<std::string> splits{"train", "test"};
  int probes = 100, power_iters = 100;
  std::uint64_t seed = 0;
  std::string probe_kind = "gaussian";
};

int cmd_geometry(const GeometryArgs& a, const Overrides& overrides) {
  const TrainConfig config = load_train_config(a.config, overrides);
  const Loaded ck = load_checkpoint(a.checkpoint);
  const Split data = build_datasets(config.dataset);
  const SpecModel model(ck.spec);
  GeometryOptions opts;
  opts.n_probes = a.probes;
  opts.power_iters = a.power_iters;
  opts.seed = a.seed;
  opts.probe_kind = parse_probe_kind(a.probe_kind);
  Json out = {{"epoch", ck.checkpoint.epoch}};
  for (const std::string& s : a.splits) {
    opts.dataset_tag = s;
    const CurvatureReport r = geometry_report(model, ck.checkpoint.params, pick_split(data, s), opts);
    out[s] = to_json(r);
    std::printf("%s grad_norm=%s trace=%s top_eig=%s C=%s\n", s.c_str(), format_double(r.grad_norm).c_str(),
                format_double(r.trace_estimate).c_str(), format_double(r.top_eigenvalue).c_str(),
                format_double(r.normalized_trace).c_str());
  }
  write_json_file(out, a.out);
  return kOk;
}

struct LandscapeArgs {
  std::string checkpoint, config, out = "landscape.csv", split = "train";
  int resolution = 25;
  double extent = 1.0;
  std::uint64_t seed = 0;
};

int cmd_landscape(const LandscapeArgs& a, const Overrides& overrides) {
  const TrainConfig config = load_train_config(a.config, overrides);
  const Loaded ck = load_checkpoint(a.checkpoint);
  const Split data = build_datasets(config.dataset);
  LandscapeOptions opts;
  opts.resolution = a.resolution;
  opts.extent = a.extent;
  opts.seed = a.seed;
  const LandscapeGrid grid = landscape_grid(SpecModel(ck.spec), ck.checkpoint.params, pick_split(data, a.split), opts);
  write_landscape_csv(grid, a.out);
  for (const auto& name : grid.unnormalized_layers)
    std::fprintf(stderr, "warning: layer %s has zero norm; direction left unnormalized\n", name.c_str());
  std::printf("cells=%zu output=%s\n", grid.cells.size(), a.out.c_str());
  return kOk;
}

struct ArArgs {
  std::vector<std::string> checkpoints;
  std::string config, out = "ar.json", init = "one_step";
  double rho = 0.05;
  int k = 20, samples = 500;
  std::uint64_t seed = 0;
};

int cmd_ar(const ArArgs& a, const Overrides& overrides) {
  const TrainConfig config = load_train_config(a.config, overrides);
  const Split data = build_datasets(config.dataset);
  const Batch train = as_batch(data.train);
  ARConfig ar;
  ar.rho = a.rho;
  ar.k_steps = a.k;
  ar.n_samples = a.samples;
  ar.seed = a.seed;
  ar.log_floor = config.optimizer.log_floor;
  if (a.init == "one_step") ar.init = AscentInit::one_step;
  else if (a.init == "origin") ar.init = AscentInit::origin;
  else throw ConfigError("--init must be 'one_step' or 'origin'");

  std::vector<Checkpoint> cps;
  ModelSpec spec;
  for (const auto& path : a.checkpoints) {
    Loaded ck = load_checkpoint(path);
    if (!cps.empty() && !(ck.spec == spec)) throw ConfigError("checkpoints describe different models");
    spec = std::move(ck.spec);
    cps.push_back(std::move(ck.checkpoint));
  }
  const SpecModel model(spec);
  std::vector<EpochAR> curve;
  if (cps.size() >= 2) curve = ar_curve(model, cps, train, ar);
  else curve.push_back({cps.front().epoch, approximation_ratio(model, cps.front().params, train, ar)});
  Json rows = Json::array();
  for (const auto& e : curve) {
    Json j = to_json(e.report);
    j["epoch"] = e.epoch;
    rows.push_back(std::move(j));
    std::printf("epoch=%d ar_mean=%s ar_stderr=%s n=%d excluded=%d\n", e.epoch, format_double(e.report.ar_mean).c_str(),
                format_double(e.report.ar_stderr).c_str(), e.report.n_samples, e.report.n_excluded);
  }
  write_json_file(Json{{"curve", rows}}, a.out);
  return kOk;
}

struct GenArgs {
  std::string source = "two_moons", images, labels;
  int n = 2000, arms = 2;
  double noise = 0.2, sigma = 0.5, turns = 1.5;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenArgs& a) {
  DatasetConfig c;
  c.source = parse_data_source(a.source);
  if (c.source == DataSource::idx) throw ConfigError("gen-data needs a synthetic source");
  Dataset d;
  switch (c.source) {
    case DataSource::two_moons: d = gen_two_moons(a.n, a.noise, a.seed); break;
    case DataSource::gaussian_blobs: d = gen_gaussian_blobs(a.n, c.centers, a.sigma, a.seed); break;
    case DataSource::spiral: d = gen_spiral(a.n, a.turns, a.noise, a.seed, a.arms); break;
    case DataSource::idx: break;
  }
  write_idx(min_max_scale(d), a.images, a.labels);
  std::printf("n=%zu features=%zu classes=%d images=%s labels=%s\n", d.labels.size(), d.inputs.cols, d.n_classes,
              a.images.c_str(), a.labels.c_str());
  return kOk;
}

int cmd_selfcheck(std::uint64_t seed, const std::string& fault) {
  SelfcheckOptions opts;
  opts.seed = seed;
  if (fault == "gradient") opts.fault = Fault::gradient;
  else if (!fault.empty() && fault != "none") throw ConfigError("unknown fault '" + fault + "'");
  const auto results = run_selfcheck(opts);
  bool ok = true;
  double total = 0.0;
  for (const auto& r : results) {
    std::printf("%-4s %-24s %7.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    ok = ok && r.passed;
    total += r.seconds;
  }
  std::printf("%s total %.2fs\n", ok ? "all checks passed" : "selfcheck failed", total);
  if (!ok)
    for (const auto& r : results)
      if (!r.passed) std::fprintf(stderr, "failed: %s\n", r.name.c_str());
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharpness-aware training and loss-geometry diagnostics"};
  app.require_subcommand(1);

  std::string train_config;
  auto* train = app.add_subcommand("train", "Train a model; extra --dotted.key value flags override the config");
  train->add_option("--config,-c", train_config, "JSON run config")->required();
  train->allow_extras();

  GeometryArgs geo;
  auto* geometry = app.add_subcommand("geometry", "Gradient norm, Hessian trace and top eigenvalue of a checkpoint");
  geometry->add_option("--checkpoint", geo.checkpoint)->required();
  geometry->add_option("--config,-c", geo.config, "run config naming the dataset")->required();
  geometry->add_option("--split", geo.splits, "train and/or test")->expected(1, 2);
  geometry->add_option("--probes", geo.probes);
  geometry->add_option("--power-iters", geo.power_iters);
  geometry->add_option("--probe-kind", geo.probe_kind);
  geometry->add_option("--seed", geo.seed);
  geometry->add_option("--out,-o", geo.out);
  geometry->allow_extras();

  LandscapeArgs land;
  auto* landscape = app.add_subcommand("landscape", "Loss on a 2-D grid of per-layer normalized directions");
  landscape->add_option("--checkpoint", land.checkpoint)->required();
  landscape->add_option("--config,-c", land.config)->required();
  landscape->add_option("--split", land.split);
  landscape->add_option("--resolution", land.resolution);
  landscape->add_option("--extent", land.extent);
  landscape->add_option("--seed", land.seed);
  landscape->add_option("--out,-o", land.out);
  landscape->allow_extras();

  ArArgs ara;
  auto* ar = app.add_subcommand("ar", "Approximation ratio of one-step vs multi-step ascent");
  ar->add_option("--checkpoint", ara.checkpoints, "repeat for a curve")->required();
  ar->add_option("--config,-c", ara.config)->required();
  ar->add_option("--rho", ara.rho);
  ar->add_option("--k", ara.k);
  ar->add_option("--samples", ara.samples);
  ar->add_option("--init", ara.init, "one_step or origin");
  ar->add_option("--seed", ara.seed);
  ar->add_option("--out,-o", ara.out);
  ar->allow_extras();

  GenArgs gen;
  auto* gen_data = app.add_subcommand("gen-data", "Write a synthetic dataset as an IDX image/label pair");
  gen_data->add_option("--source", gen.source, "two_moons, gaussian_blobs or spiral");
  gen_data->add_option("--n", gen.n);
  gen_data->add_option("--noise", gen.noise);
  gen_data->add_option("--sigma", gen.sigma);
  gen_data->add_option("--turns", gen.turns);
  gen_data->add_option("--arms", gen.arms);
  gen_data->add_option("--seed", gen.seed);
  gen_data->add_option("--images", gen.images)->required();
  gen_data->add_option("--labels", gen.labels)->required();

  std::uint64_t check_seed = 0;
  std::string fault;
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the analytic oracle suite");
  selfcheck->add_option("--seed", check_seed);
  selfcheck->add_option("--inject-fault", fault, "test fixture: 'gradient'")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(train_config, parse_overrides(train->remaining()));
    if (*geometry) return cmd_geometry(geo, parse_overrides(geometry->remaining()));
    if (*landscape) return cmd_landscape(land, parse_overrides(landscape->remaining()));
    if (*ar) return cmd_ar(ara, parse_overrides(ar->remaining()));
    if (*gen_data) return cmd_gen_data(gen);
    if (*selfcheck) return cmd_selfcheck(check_seed, fault);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kConfigError;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
