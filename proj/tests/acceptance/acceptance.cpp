// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Oracles live here, not in the library.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <ctime>
#include <functional>
#include <string>
#include <vector>

#include "crsam/curvature.hpp"
#include "crsam/data.hpp"
#include "crsam/harness.hpp"
#include "crsam/optim.hpp"
#include "crsam/presets.hpp"
#include "crsam/serialize.hpp"
#include "test_support.hpp"

using namespace crsam;
using testing::Rng;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> matvec(const DenseMatrix& A, std::span<const double> x) {
  std::vector<double> y(A.rows, 0.0);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) y[i] += A(i, j) * x[j];
  return y;
}

DenseMatrix random_spd(Rng& rng, std::size_t d) {
  const DenseMatrix B = testing::symmetric(rng, d);
  DenseMatrix A(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += B(i, k) * B(j, k);
      A(i, j) = s / static_cast<double>(d) + (i == j ? 0.5 : 0.0);
    }
  return A;
}

// 1. Probe exactness on quadratics.
Verdict oracle_exactness() {
  const double t0 = cpu_seconds();
  Rng rng(101);
  double worst_g = 0.0, worst_h = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = testing::uniform_int(rng, 1, 32);
    const DenseMatrix A = random_spd(rng, d);
    const auto b = testing::gaussian_vector(rng, d);
    const auto w = testing::gaussian_vector(rng, d);
    const auto v = testing::unit(testing::gaussian_vector(rng, d));
    const double rho = testing::log_uniform(rng, 1e-4, 1e-1);
    const SpecModel m(make_quadratic(A, b));
    const Batch none;
    auto grad = matvec(A, w);
    for (std::size_t i = 0; i < d; ++i) grad[i] += b[i];
    const double vg = dot(v, grad), vav = dot(v, matvec(A, v));
    worst_g = std::max(worst_g, testing::rel_err(directional_grad_fd(m, ParamVector(w), none, v, rho).value, vg));
    worst_h = std::max(worst_h, testing::rel_err(quadratic_form_fd(m, ParamVector(w), none, v, rho).value, vav));
  }
  const double secs = cpu_seconds() - t0;
  return {worst_g <= 1e-8 && worst_h <= 1e-8 && secs < 5.0,
          fmt("max rel err directional %.2e, quadratic form %.2e (tol 1e-8); %.2f s (< 5 s)", worst_g, worst_h, secs)};
}

// 2. Gradients against central differences of an independent forward pass.
Verdict gradient_correctness() {
  const double t0 = cpu_seconds();
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto d = testing::random_mlp(rng, 1e-3, 16);
    const auto g = SpecModel(d.spec).loss_and_grad(d.params, d.batch).grad;
    std::vector<double> fd(d.params.size());
    std::vector<double> p = d.params.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double w = p[i], h = 1e-6 * (1.0 + std::abs(w));
      p[i] = w + h;
      const double up = testing::reference_mlp_loss(d.spec.widths, d.spec.activation, p, d.batch);
      p[i] = w - h;
      const double down = testing::reference_mlp_loss(d.spec.widths, d.spec.activation, p, d.batch);
      p[i] = w;
      fd[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, testing::rel_norm_err(g.span(), fd));
  }
  const double secs = cpu_seconds() - t0;
  return {worst <= 1e-4 && secs < 30.0, fmt("max rel err %.2e (tol 1e-4); %.2f s (< 30 s)", worst, secs)};
}

// 3. Hutchinson calibration against known traces.
Verdict hutchinson_calibration() {
  const double t0 = cpu_seconds();
  Rng rng(303);
  int inside = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = testing::uniform_int(rng, 2, 10);
    const DenseMatrix A = testing::symmetric(rng, d);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += A(i, i);
    const SpecModel m(make_quadratic(A, std::vector<double>(d, 0.0)));
    const auto est = hutchinson_trace(m, ParamVector(testing::gaussian_vector(rng, d)), Batch{}, 1000, rng());
    if (std::abs(est.estimate - trace) <= 3.0 * est.std_error) ++inside;
  }
  double worst_rad = 0.0;
  HutchinsonOptions rad;
  rad.probe_kind = ProbeKind::rademacher;
  for (int d : {1, 3, 10, 32}) {
    DenseMatrix I(d, d);
    for (int i = 0; i < d; ++i) I(i, i) = 1.0;
    const SpecModel m(make_quadratic(I, std::vector<double>(d, 0.0)));
    const auto est = hutchinson_trace(m, ParamVector(testing::gaussian_vector(rng, d)), Batch{}, 50, rng(), rad);
    worst_rad = std::max(worst_rad, testing::rel_err(est.estimate, d));
  }
  const double secs = cpu_seconds() - t0;
  return {inside >= 99 && worst_rad <= 1e-9 && secs < 60.0,
          fmt("%d/100 trials within 3 stderr (need 99); rademacher on I rel err %.2e; %.2f s (< 60 s)", inside,
              worst_rad, secs)};
}

// 4. CR-SAM with zero weights is SAM; SAM with a vanishing radius is SGD.
Verdict reduction_identity() {
  Rng rng(404);
  int identical = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto d = testing::random_mlp(rng);
    const SpecModel m(d.spec);
    OptimizerConfig c;
    c.peak_lr = testing::log_uniform(rng, 1e-3, 0.5);
    c.momentum = testing::uniform(rng, 0.0, 0.95);
    c.weight_decay = testing::uniform(rng, 0.0, 1e-2);
    c.rho = testing::log_uniform(rng, 1e-3, 0.3);
    c.total_epochs = 10;
    OptimizerState s = make_state(d.params);
    s.momentum_buffer = ParamVector(testing::gaussian_vector(rng, d.params.size(), 0.1));
    s.epoch = testing::uniform_int(rng, 0, 9);
    c.method = Method::sam;
    const auto sam = sam_step(m, d.params, d.batch, c, s);
    c.method = Method::crsam;
    const auto cr = crsam_step(m, d.params, d.batch, c, s);
    if (sam.new_params == cr.new_params && sam.new_state == cr.new_state) ++identical;

    c.method = Method::sam;
    c.rho = 1e-12;
    const auto tiny = sam_step(m, d.params, d.batch, c, s);
    c.method = Method::sgd;
    const auto sgd = sgd_step(m, d.params, d.batch, c, s);
    std::vector<double> da(d.params.size()), db(d.params.size());
    for (std::size_t i = 0; i < da.size(); ++i) {
      da[i] = tiny.new_params[i] - d.params[i];
      db[i] = sgd.new_params[i] - d.params[i];
    }
    worst = std::max(worst, testing::rel_norm_err(da, db));
  }
  return {identical == 100 && worst <= 1e-8,
          fmt("%d/100 bit-identical; rho=1e-12 vs sgd max rel displacement %.2e (tol 1e-8)", identical, worst)};
}

// 5. Regularizer gradient against finite differences of its value, v frozen.
Verdict regularizer_gradient() {
  Rng rng(505);
  double worst = 0.0;
  int done = 0, skipped = 0;
  while (done < 100) {
    const auto d = testing::random_mlp(rng);
    const SpecModel m(d.spec);
    OptimizerConfig c;
    c.method = Method::crsam;
    c.rho = testing::log_uniform(rng, 0.01, 0.2);
    c.beta = testing::log_uniform(rng, 1e-3, 0.1);
    c.alpha = c.beta * testing::uniform(rng, 1.5, 10.0);
    const auto g = m.loss_and_grad(d.params, d.batch).grad;
    const double gn = norm2(g.span());
    if (gn < 1e-8) {
      ++skipped;
      continue;
    }
    std::vector<double> v(g.values());
    for (auto& x : v) x /= gn;
    const auto r = crsam_regularizer(m, d.params, d.batch, v, c);
    // Stay away from the clamp, where log(max(x, floor)) is not differentiable.
    if (r.d1 < 1e3 * c.log_floor || r.d2 < 1e3 * c.log_floor) {
      ++skipped;
      continue;
    }
    std::vector<double> fd(d.params.size());
    ParamVector p = d.params;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double w = p[i], h = 1e-6 * (1.0 + std::abs(w));
      p[i] = w + h;
      const double up = crsam_regularizer_value(m, p, d.batch, v, c);
      p[i] = w - h;
      const double down = crsam_regularizer_value(m, p, d.batch, v, c);
      p[i] = w;
      fd[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, testing::rel_norm_err(r.reg_grad.span(), fd));
    ++done;
  }
  return {worst <= 1e-4, fmt("max rel err %.2e over 100 draws (tol 1e-4); %d near-clamp draws skipped", worst, skipped)};
}

// Shared two-moons runs for criteria 6 and 7.
struct MoonsRun {
  RunResult result;
  CurvatureReport test_geometry;
  double cpu = 0.0;
};

TrainConfig moons_config(Method method, std::uint64_t seed, bool with_ar) {
  TrainConfig c;
  c.model = make_mlp({2, 64, 64, 2}, Activation::tanh);
  c.dataset.source = DataSource::two_moons;
  c.dataset.n = 2500;
  c.dataset.noise = 0.2;
  c.dataset.seed = seed;
  c.dataset.split.train_fraction = 0.8;
  c.optimizer = find_preset(method == Method::sgd ? "moons-sgd" : method == Method::sam ? "moons-sam" : "moons-crsam")
                    .config;
  c.epochs = 200;
  c.batch_size = 128;
  c.seed = seed;
  c.diagnostics.geometry_every = 0;
  c.diagnostics.final_geometry = false;
  c.diagnostics.ar_every = with_ar ? 20 : 0;
  c.diagnostics.ar_k = 20;
  c.diagnostics.ar_samples = 500;
  c.diagnostics.ar_rho = 0.05;
  c.diagnostics.probes = 100;
  c.diagnostics.power_iters = 100;
  return c;
}

MoonsRun moons_run(Method method, std::uint64_t seed, bool with_ar, bool geometry) {
  const double t0 = cpu_seconds();
  const TrainConfig c = moons_config(method, seed, with_ar);
  MoonsRun r{run_training(c), {}, 0.0};
  if (geometry) {
    const Split data = build_datasets(c.dataset);
    GeometryOptions g;
    g.n_probes = c.diagnostics.probes;
    g.power_iters = c.diagnostics.power_iters;
    g.seed = derive_seed(c.seed, 2);
    g.dataset_tag = "test";
    r.test_geometry = geometry_report(SpecModel(c.model), r.result.final_params, as_batch(data.test), g);
  }
  r.cpu = cpu_seconds() - t0;
  return r;
}

double ar_at(const RunResult& r, int epoch) {
  for (const auto& e : r.ar_curve)
    if (e.epoch == epoch) return e.report.ar_mean;
  throw std::runtime_error("no AR entry for epoch " + std::to_string(epoch));
}

// 6. Approximation ratio falls during SAM training.
Verdict ar_mechanism(const std::vector<MoonsRun>& sam) {
  double early = 0.0, late = 0.0, cpu = 0.0;
  for (const auto& r : sam) {
    early += ar_at(r.result, 20) / sam.size();
    late += ar_at(r.result, 200) / sam.size();
    cpu += r.cpu;
  }
  return {late < early && cpu < 300.0,
          fmt("mean AR epoch 20 = %.6f, epoch 200 = %.6f over %zu seeds; %.1f s CPU (< 300 s)", early, late, sam.size(),
              cpu)};
}

// 7. Curvature and accuracy ordering across optimizers.
Verdict geometry_ordering(const std::vector<MoonsRun>& sgd, const std::vector<MoonsRun>& sam,
                          const std::vector<MoonsRun>& cr) {
  struct Means {
    double trace = 0.0, grad = 0.0, acc = 0.0, cpu = 0.0;
  };
  auto means = [](const std::vector<MoonsRun>& runs) {
    Means m;
    for (const auto& r : runs) {
      m.trace += r.test_geometry.trace_estimate / runs.size();
      m.grad += r.test_geometry.grad_norm / runs.size();
      m.acc += r.result.records.back().test_acc / runs.size();
      m.cpu += r.cpu;
    }
    return m;
  };
  const Means a = means(sgd), b = means(sam), c = means(cr);
  const double tie = 0.003;
  const bool curvature = c.trace < b.trace && b.trace < a.trace && c.grad < b.grad && b.grad < a.grad;
  const bool accuracy = c.acc >= b.acc - tie && b.acc >= a.acc - tie;
  const double cpu = a.cpu + b.cpu + c.cpu;
  return {curvature && accuracy && cpu < 900.0,
          fmt("trace %.3f < %.3f < %.3f, grad_norm %.4f < %.4f < %.4f, test acc %.4f / %.4f / %.4f "
              "(crsam/sam/sgd, 0.3pp ties); %.1f s CPU (< 900 s)",
              c.trace, b.trace, a.trace, c.grad, b.grad, a.grad, c.acc, b.acc, a.acc, cpu)};
}

// 8. C(w) is invariant to scaling the loss.
Verdict scale_invariance() {
  const Dataset moons = gen_two_moons(256, 0.15, 808);
  const Batch batch = as_batch(moons);
  ModelSpec spec = make_mlp({2, 16, 16, 2}, Activation::tanh);
  const ParamVector params = init_params(spec, 808);
  GeometryOptions o;
  o.n_probes = 30;
  o.power_iters = 30;
  o.seed = 8;
  const auto ref = geometry_report(SpecModel(spec), params, batch, o);
  double worst_c = 0.0, worst_t = 0.0;
  for (double c : {0.1, 10.0}) {
    spec.loss_scale = c;
    const auto s = geometry_report(SpecModel(spec), params, batch, o);
    worst_c = std::max(worst_c, testing::rel_err(s.normalized_trace, ref.normalized_trace));
    worst_t = std::max(worst_t, testing::rel_err(s.trace_estimate, c * ref.trace_estimate));
  }
  return {worst_c <= 1e-10 && worst_t <= 1e-6,
          fmt("C(w) rel change %.2e (tol 1e-10); trace vs c*trace rel err %.2e (tol 1e-6)", worst_c, worst_t)};
}

// 9. The exact trust-region value dominates the one-step point and a dense
// random search, evaluated directly in the original basis.
Verdict trust_region_dominance() {
  constexpr int kInstances = 1000, kSamples = 1000000, kMinDim = 2, kMaxDim = 6;
  Rng rng(909);
  struct Instance {
    DenseMatrix A;
    std::vector<double> g;
    double rho;
  };
  std::vector<std::vector<Instance>> by_dim(kMaxDim + 1);
  for (int t = 0; t < kInstances; ++t) {
    const int d = testing::uniform_int(rng, kMinDim, kMaxDim);
    by_dim[d].push_back({testing::symmetric(rng, d), testing::gaussian_vector(rng, d, testing::log_uniform(rng, 1e-2, 1.0)),
                         testing::log_uniform(rng, 1e-2, 1.0)});
  }
  int below_one_step = 0, below_search = 0;
  double worst_margin = INFINITY;
  std::normal_distribution<double> normal;
  for (int d = kMinDim; d <= kMaxDim; ++d) {
    if (by_dim[d].empty()) continue;
    std::vector<double> pool(static_cast<std::size_t>(kSamples) * d);
    for (int s = 0; s < kSamples; ++s) {
      double n = 0.0;
      double* u = &pool[static_cast<std::size_t>(s) * d];
      for (int i = 0; i < d; ++i) n += (u[i] = normal(rng)) * u[i];
      n = std::sqrt(n);
      for (int i = 0; i < d; ++i) u[i] /= n;
    }
    for (const auto& inst : by_dim[d]) {
      const auto sol = exact_worst_case_quadratic(inst.A, inst.g, inst.rho);
      const double gn = norm2(inst.g);
      std::vector<double> step(d);
      for (int i = 0; i < d; ++i) step[i] = inst.rho * inst.g[i] / gn;
      const auto As = matvec(inst.A, step);
      const double one_step = dot(inst.g, step) + 0.5 * dot(step, As);
      if (sol.max_increase < one_step - 1e-12 * (1.0 + std::abs(one_step))) ++below_one_step;
      double best = -INFINITY;
      for (int s = 0; s < kSamples; ++s) {
        const double* u = &pool[static_cast<std::size_t>(s) * d];
        double lin = 0.0, quad = 0.0;
        for (int i = 0; i < d; ++i) {
          lin += inst.g[i] * u[i];
          double row = 0.0;
          for (int j = 0; j < d; ++j) row += inst.A(i, j) * u[j];
          quad += u[i] * row;
        }
        best = std::max(best, inst.rho * lin + 0.5 * inst.rho * inst.rho * quad);
      }
      if (sol.max_increase < best - 1e-6) ++below_search;
      worst_margin = std::min(worst_margin, sol.max_increase - best);
    }
  }
  return {below_one_step == 0 && below_search == 0,
          fmt("%d below one-step, %d below best of 1e6 sphere samples - 1e-6; min margin %.2e", below_one_step,
              below_search, worst_margin)};
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" CRSAM_CLI_PATH "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 10. Determinism of output files and of concurrent probe evaluation.
Verdict determinism() {
  testing::TempDir dir("accept_det");
  TrainConfig c = moons_config(Method::crsam, 3, false);
  c.dataset.n = 600;
  c.epochs = 10;
  c.optimizer.total_epochs = 10;
  write_json_file(to_json(c), dir / "c.json");
  const std::string cfg = (dir / "c.json").string();
  const int r1 = run_cli("train -c '" + cfg + "'", "CRSAM_OUTPUT_DIR='" + (dir / "a").string() + "'");
  const int r2 = run_cli("train -c '" + cfg + "'", "CRSAM_OUTPUT_DIR='" + (dir / "b").string() + "'");
  const std::string ma = testing::slurp(dir / "a" / "metrics.csv"), mb = testing::slurp(dir / "b" / "metrics.csv");
  const bool files = r1 == 0 && r2 == 0 && !ma.empty() && ma == mb;

  Rng rng(1010);
  int same = 0;
  for (int t = 0; t < 50; ++t) {
    const auto d = testing::random_mlp(rng);
    const SpecModel m(d.spec);
    OptimizerConfig o = find_preset("moons-crsam").config;
    o.alpha = 0.05;
    o.beta = 0.005;
    const auto s = make_state(d.params);
    o.parallel_probes = false;
    const auto a = crsam_step(m, d.params, d.batch, o, s);
    o.parallel_probes = true;
    const auto b = crsam_step(m, d.params, d.batch, o, s);
    if (a.new_params == b.new_params && a.new_state == b.new_state && a.report == b.report) ++same;
  }
  c.optimizer.parallel_probes = false;
  const auto serial = run_training(c);
  c.optimizer.parallel_probes = true;
  const auto pooled = run_training(c);
  const bool runs = serial.records == pooled.records && serial.final_params == pooled.final_params;
  return {files && same == 50 && runs,
          fmt("metrics.csv rerun %s; %d/50 steps identical serial vs concurrent; full run %s",
              files ? "byte-identical" : "DIFFERS", same, runs ? "identical" : "DIFFERS")};
}

// 11. The selfcheck subcommand passes within a minute.
Verdict selfcheck_subcommand() {
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_cli("selfcheck");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {code == 0 && secs < 60.0, fmt("exit %d in %.1f s (< 60 s)", code, secs)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %2d %-28s %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "oracle exactness", oracle_exactness);
  report(2, "gradient correctness", gradient_correctness);
  report(3, "hutchinson calibration", hutchinson_calibration);
  report(4, "reduction identity", reduction_identity);
  report(5, "regularizer gradient", regularizer_gradient);

  std::vector<MoonsRun> sgd, sam, cr;
  std::string moons_error;
  try {
    for (std::uint64_t s = 0; s < 5; ++s) {
      sgd.push_back(moons_run(Method::sgd, s, false, true));
      sam.push_back(moons_run(Method::sam, s, true, true));
      cr.push_back(moons_run(Method::crsam, s, false, true));
    }
  } catch (const std::exception& e) {
    moons_error = e.what();
  }
  auto guarded = [&](auto fn) {
    return [&, fn]() -> Verdict {
      if (!moons_error.empty()) return {false, "training failed: " + moons_error};
      return fn();
    };
  };
  report(6, "AR mechanism", guarded([&] { return ar_mechanism(sam); }));
  report(7, "geometry ordering", guarded([&] { return geometry_ordering(sgd, sam, cr); }));

  report(8, "scale invariance", scale_invariance);
  report(9, "trust-region dominance", trust_region_dominance);
  report(10, "determinism", determinism);
  report(11, "selfcheck subcommand", selfcheck_subcommand);

  std::printf("%s: %d of 11 criteria failed\n", failed ? "FAILED" : "OK", failed);
  return failed ? 1 : 0;
}
