// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "crsam/errors.hpp"
#include "crsam/serialize.hpp"

namespace crsam {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kGeometryStream = 2;
constexpr std::uint64_t kArStream = 3;
constexpr std::uint64_t kLandscapeStream = 4;
constexpr std::uint64_t kEpochStreamBase = 1u << 20;

}  // namespace

std::string_view to_string(DataSource source) {
  switch (source) {
    case DataSource::two_moons: return "two_moons";
    case DataSource::gaussian_blobs: return "gaussian_blobs";
    case DataSource::spiral: return "spiral";
    case DataSource::idx: return "idx";
  }
  return "?";
}

DataSource parse_data_source(std::string_view text) {
  if (text == "two_moons" || text == "two-moons") return DataSource::two_moons;
  if (text == "gaussian_blobs" || text == "blobs") return DataSource::gaussian_blobs;
  if (text == "spiral") return DataSource::spiral;
  if (text == "idx") return DataSource::idx;
  throw ConfigError("unknown dataset source '" + std::string(text) + "'");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

void validate(const TrainConfig& c) {
  validate(c.model);
  if (c.model.kind == ModelKind::quadratic) throw ConfigError("training needs a classifier model (mlp or linear-softmax)");
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  validate(c.optimizer);
  if (c.optimizer.total_epochs < c.epochs) throw ConfigError("optimizer.total_epochs must be >= epochs");
  const auto& d = c.diagnostics;
  if (d.geometry_every < 0 || d.ar_every < 0) throw ConfigError("diagnostic cadences must be >= 0");
  if (d.ar_k < 1 || d.ar_samples < 1) throw ConfigError("diagnostics.ar_k and ar_samples must be >= 1");
  if (d.probes < 2) throw ConfigError("diagnostics.probes must be >= 2");
  if (d.power_iters < 1) throw ConfigError("diagnostics.power_iters must be >= 1");
  if (d.landscape_resolution < 1 || d.landscape_resolution % 2 == 0)
    throw ConfigError("diagnostics.landscape_resolution must be odd");
  if (!(d.landscape_extent > 0.0)) throw ConfigError("diagnostics.landscape_extent must be > 0");
  if (c.dataset.source == DataSource::idx && (c.dataset.images.empty() || c.dataset.labels.empty()))
    throw ConfigError("idx dataset needs 'images' and 'labels' paths");
}

Split build_datasets(const DatasetConfig& c) {
  Split s;
  bool need_split = true;
  Dataset full;
  switch (c.source) {
    case DataSource::two_moons: full = gen_two_moons(c.n, c.noise, c.seed); break;
    case DataSource::gaussian_blobs: full = gen_gaussian_blobs(c.n, c.centers, c.sigma, c.seed); break;
    case DataSource::spiral: full = gen_spiral(c.n, c.turns, c.noise, c.seed, c.n_arms); break;
    case DataSource::idx:
      full = load_idx(c.images, c.labels, c.limit);
      if (!c.test_images.empty()) {
        s.train = std::move(full);
        s.test = load_idx(c.test_images, c.test_labels, c.test_limit);
        s.test.n_classes = s.train.n_classes = std::max(s.train.n_classes, s.test.n_classes);
        need_split = false;
      }
      break;
  }
  if (need_split) s = split_dataset(full, c.split);
  if (c.center) {
    const Dataset reference = s.train;
    center_features(s.train, reference);
    center_features(s.test, reference);
  }
  return s;
}

namespace {

double accuracy(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  const auto pred = predict(spec, params, batch);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == batch.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

bool on_cadence(int epoch, int every) { return every > 0 && epoch % every == 0; }

}  // namespace

RunResult run_training(const TrainConfig& config) {
  validate(config);
  const Split data = build_datasets(config.dataset);
  if (data.train.inputs.cols != static_cast<std::size_t>(config.model.widths.front()))
    throw ConfigError("model input width " + std::to_string(config.model.widths.front()) +
                      " does not match dataset feature count " + std::to_string(data.train.inputs.cols));
  if (n_classes(config.model) < data.train.n_classes)
    throw ConfigError("model has fewer outputs than the dataset has classes");

  const SpecModel model(config.model);
  const Batch train = as_batch(data.train);
  const Batch test = as_batch(data.test);
  const auto& diag = config.diagnostics;

  auto result = std::make_shared<RunResult>();
  result->config_echo = config;
  ParamVector params = init_params(config.model, derive_seed(config.seed, kInitStream));
  OptimizerState state = make_state(params);

  for (int e = 0; e < config.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    state.epoch = e;
    MetricRecord rec;
    rec.epoch = e + 1;
    rec.lr = cosine_lr(e, config.optimizer.total_epochs, config.optimizer.peak_lr);
    try {
      const auto batches = batch_iter(data.train, config.batch_size, derive_seed(config.seed, kEpochStreamBase + e));
      std::size_t clamped = 0;
      for (const Batch& b : batches) {
        StepOutcome out = optimizer_step(model, params, b, config.optimizer, state);
        params = std::move(out.new_params);
        state = std::move(out.new_state);
        rec.mean_d1 += out.report.d1;
        rec.mean_d2 += out.report.d2;
        clamped += (out.report.d1_clamped || out.report.d2_clamped) ? 1 : 0;
      }
      const auto steps = static_cast<double>(batches.size());
      if (config.optimizer.method == Method::crsam) {
        rec.mean_d1 /= steps;
        rec.mean_d2 /= steps;
        rec.clamp_rate = static_cast<double>(clamped) / steps;
      }
      rec.train_loss = model.loss(params, train);
      rec.test_loss = model.loss(params, test);
    } catch (const NumericError& err) {
      result->diverged = true;
      result->final_params = params;
      throw DivergenceError("training diverged in epoch " + std::to_string(e + 1) + ": " + err.what(), result);
    }
    rec.train_acc = accuracy(config.model, params, train);
    rec.test_acc = accuracy(config.model, params, test);
    if (diag.record_wall_time)
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result->records.push_back(rec);

    const int epoch = e + 1;
    if (on_cadence(epoch, diag.geometry_every) || on_cadence(epoch, diag.ar_every) || epoch == config.epochs)
      result->checkpoints.push_back({epoch, params});
  }
  result->final_params = params;

  // Diagnostics read checkpoints only; training above never consults them.
  GeometryOptions gopts;
  gopts.n_probes = diag.probes;
  gopts.seed = derive_seed(config.seed, kGeometryStream);
  gopts.power_iters = diag.power_iters;
  auto geometry_pair = [&](const ParamVector& p, CurvatureReport& tr, CurvatureReport& te) {
    gopts.dataset_tag = "train";
    tr = geometry_report(model, p, train, gopts);
    gopts.dataset_tag = "test";
    te = geometry_report(model, p, test, gopts);
  };
  for (const auto& cp : result->checkpoints) {
    if (!on_cadence(cp.epoch, diag.geometry_every)) continue;
    EpochGeometry g;
    g.epoch = cp.epoch;
    geometry_pair(cp.params, g.train, g.test);
    result->geometry_curve.push_back(std::move(g));
  }
  if (diag.final_geometry) {
    if (!result->geometry_curve.empty() && result->geometry_curve.back().epoch == config.epochs) {
      result->final_train = result->geometry_curve.back().train;
      result->final_test = result->geometry_curve.back().test;
    } else {
      CurvatureReport tr, te;
      geometry_pair(params, tr, te);
      result->final_train = tr;
      result->final_test = te;
    }
  }

  if (diag.ar_every > 0) {
    ARConfig ar;
    ar.rho = diag.ar_rho > 0.0 ? diag.ar_rho : config.optimizer.rho;
    ar.k_steps = diag.ar_k;
    ar.n_samples = diag.ar_samples;
    ar.seed = derive_seed(config.seed, kArStream);
    ar.log_floor = config.optimizer.log_floor;
    std::vector<Checkpoint> selected;
    for (const auto& cp : result->checkpoints)
      if (on_cadence(cp.epoch, diag.ar_every)) selected.push_back(cp);
    if (selected.size() >= 2) {
      result->ar_curve = ar_curve(model, selected, train, ar);
    } else {
      for (const auto& cp : selected) result->ar_curve.push_back({cp.epoch, approximation_ratio(model, cp.params, train, ar)});
    }
  }

  if (diag.landscape) {
    LandscapeOptions lopts;
    lopts.extent = diag.landscape_extent;
    lopts.resolution = diag.landscape_resolution;
    lopts.seed = derive_seed(config.seed, kLandscapeStream);
    result->landscape = landscape_grid(model, params, train, lopts);
  }
  return std::move(*result);
}

std::vector<EpochAR> ar_curve(const Model& model, const std::vector<Checkpoint>& checkpoints, const Batch& dataset,
                              const ARConfig& config) {
  if (checkpoints.size() < 2) throw ContractError("ar_curve: need at least 2 checkpoints");
  std::vector<EpochAR> out;
  out.reserve(checkpoints.size());
  for (const auto& cp : checkpoints) out.push_back({cp.epoch, approximation_ratio(model, cp.params, dataset, config)});
  return out;
}

LandscapeGrid landscape_grid(const Model& model, const ParamVector& params, const Batch& dataset,
                             const LandscapeOptions& options) {
  if (options.resolution < 1 || options.resolution % 2 == 0)
    throw ContractError("landscape_grid: resolution must be odd");
  if (!(options.extent > 0.0)) throw ContractError("landscape_grid: extent must be > 0");
  const std::size_t n = params.size();
  LandscapeGrid grid;
  grid.resolution = options.resolution;
  grid.extent = options.extent;
  grid.direction1.resize(n);
  grid.direction2.resize(n);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& x : grid.direction1) x = normal(rng);
  for (auto& x : grid.direction2) x = normal(rng);

  for (const LayerSegment& seg : model.layers()) {
    std::span<double> d1(grid.direction1.data() + seg.offset, seg.size);
    std::span<double> d2(grid.direction2.data() + seg.offset, seg.size);
    const double d11 = dot(d1, d1);
    if (d11 > 0.0) {
      const double proj = dot(d1, d2) / d11;
      for (std::size_t k = 0; k < seg.size; ++k) d2[k] -= proj * d1[k];
    }
    const double wn = norm2(params.span().subspan(seg.offset, seg.size));
    if (wn == 0.0) {
      grid.unnormalized_layers.push_back(seg.name);
      continue;
    }
    for (std::span<double> d : {d1, d2}) {
      const double dn = norm2(d);
      if (dn > 0.0)
        for (auto& x : d) x *= wn / dn;
    }
  }

  const int res = options.resolution;
  auto coord = [&](int i) { return res == 1 ? 0.0 : options.extent * (2 * i - (res - 1)) / (res - 1); };
  ParamVector point = params;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const double a = coord(i), b = coord(j);
      for (std::size_t k = 0; k < n; ++k) point[k] = params[k] + a * grid.direction1[k] + b * grid.direction2[k];
      grid.cells.push_back({i, j, a, b, model.loss(point, dataset)});
    }
  }
  return grid;
}

void write_landscape_csv(const LandscapeGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "i,j,a,b,loss\n";
  for (const auto& c : grid.cells)
    out << c.i << ',' << c.j << ',' << format_double(c.a) << ',' << format_double(c.b) << ','
        << format_double(c.loss) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,train_loss,train_acc,test_loss,test_acc,lr,mean_d1,mean_d2,clamp_rate,wall_ms\n";
  for (const auto& r : records) {
    out << r.epoch;
    for (double v : {r.train_loss, r.train_acc, r.test_loss, r.test_acc, r.lr, r.mean_d1, r.mean_d2, r.clamp_rate,
                     r.wall_ms})
      out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_run(const RunResult& result, const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir / "checkpoints", ec);
  if (ec) throw IoError("cannot create '" + output_dir.string() + "': " + ec.message());

  write_metrics_csv(result.records, output_dir / "metrics.csv");

  Json geometry;
  geometry["final"] = nullptr;
  if (result.final_train && result.final_test)
    geometry["final"] = Json{{"train", to_json(*result.final_train)}, {"test", to_json(*result.final_test)}};
  geometry["curve"] = Json::array();
  for (const auto& g : result.geometry_curve)
    geometry["curve"].push_back(Json{{"epoch", g.epoch}, {"train", to_json(g.train)}, {"test", to_json(g.test)}});
  write_json_file(geometry, output_dir / "geometry.json");

  Json ar = Json::array();
  for (const auto& a : result.ar_curve) {
    Json rec = to_json(a.report);
    rec["epoch"] = a.epoch;
    ar.push_back(std::move(rec));
  }
  write_json_file(Json{{"curve", ar}}, output_dir / "ar.json");
  write_json_file(to_json(result.config_echo), output_dir / "config.json");

  for (const auto& cp : result.checkpoints) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04d.json", cp.epoch);
    write_json_file(checkpoint_to_json(result.config_echo.model, cp), output_dir / "checkpoints" / name);
  }
  if (result.landscape) write_landscape_csv(*result.landscape, output_dir / "landscape.csv");
}

}  // namespace crsam
