// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>

#include "crsam/errors.hpp"

namespace crsam {

void validate(const Dataset& d) {
  if (d.n_classes < 2) throw ContractError("dataset '" + d.name + "' needs at least 2 classes");
  if (d.inputs.rows != d.labels.size()) throw ContractError("dataset '" + d.name + "': row/label count mismatch");
  if (d.inputs.data.size() != d.inputs.rows * d.inputs.cols)
    throw ContractError("dataset '" + d.name + "': input storage does not match shape");
  for (int y : d.labels)
    if (y < 0 || y >= d.n_classes) throw ContractError("dataset '" + d.name + "': label out of range");
  for (double x : d.inputs.data)
    if (!std::isfinite(x)) throw ContractError("dataset '" + d.name + "': non-finite input");
}

Batch as_batch(const Dataset& dataset) { return Batch{dataset.inputs, dataset.labels}; }

Dataset gen_two_moons(int n, double noise, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw ContractError("gen_two_moons: n must be even and >= 2");
  if (!(noise >= 0.0)) throw ContractError("gen_two_moons: noise must be >= 0");
  const int m = n / 2;
  Dataset d;
  d.name = "two_moons";
  d.n_classes = 2;
  d.inputs = DenseMatrix(static_cast<std::size_t>(n), 2);
  d.labels.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise > 0.0 ? noise : 1.0);
  for (int i = 0; i < m; ++i) {
    const double t = m > 1 ? std::numbers::pi * i / (m - 1) : 0.0;
    d.inputs(i, 0) = std::cos(t);
    d.inputs(i, 1) = std::sin(t);
    d.labels[i] = 0;
    d.inputs(m + i, 0) = 1.0 - std::cos(t);
    d.inputs(m + i, 1) = 1.0 - std::sin(t) - 0.5;
    d.labels[m + i] = 1;
  }
  if (noise > 0.0)
    for (auto& x : d.inputs.data) x += normal(rng);
  return d;
}

Dataset gen_gaussian_blobs(int n, const std::vector<std::vector<double>>& centers, double sigma,
                           std::uint64_t seed) {
  if (n < 1) throw ContractError("gen_gaussian_blobs: n must be >= 1");
  if (centers.size() < 2) throw ContractError("gen_gaussian_blobs: need at least 2 centers");
  if (!(sigma >= 0.0)) throw ContractError("gen_gaussian_blobs: sigma must be >= 0");
  const std::size_t dim = centers.front().size();
  if (dim == 0) throw ContractError("gen_gaussian_blobs: centers must be non-empty");
  for (const auto& c : centers)
    if (c.size() != dim) throw ContractError("gen_gaussian_blobs: centers differ in dimension");
  Dataset d;
  d.name = "gaussian_blobs";
  d.n_classes = static_cast<int>(centers.size());
  d.inputs = DenseMatrix(static_cast<std::size_t>(n), dim);
  d.labels.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma > 0.0 ? sigma : 1.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t c = i % centers.size();
    d.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dim; ++j) d.inputs(i, j) = centers[c][j] + (sigma > 0.0 ? normal(rng) : 0.0);
  }
  return d;
}

Dataset gen_spiral(int n, double turns, double noise, std::uint64_t seed, int n_arms) {
  if (n_arms < 2) throw ContractError("gen_spiral: need at least 2 arms");
  if (n < n_arms) throw ContractError("gen_spiral: n must be >= number of arms");
  if (!(turns > 0.0)) throw ContractError("gen_spiral: turns must be > 0");
  if (!(noise >= 0.0)) throw ContractError("gen_spiral: noise must be >= 0");
  Dataset d;
  d.name = "spiral";
  d.n_classes = n_arms;
  d.inputs = DenseMatrix(static_cast<std::size_t>(n), 2);
  d.labels.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise > 0.0 ? noise : 1.0);
  for (int i = 0; i < n; ++i) {
    const int arm = i % n_arms;
    const int j = i / n_arms;
    const int arm_count = n / n_arms + (arm < n % n_arms ? 1 : 0);
    const double t = static_cast<double>(j + 1) / arm_count;
    const double angle = 2.0 * std::numbers::pi * (turns * t + static_cast<double>(arm) / n_arms);
    d.inputs(i, 0) = t * std::cos(angle);
    d.inputs(i, 1) = t * std::sin(angle);
    d.labels[i] = arm;
  }
  if (noise > 0.0)
    for (auto& x : d.inputs.data) x += normal(rng);
  return d;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& what) {
  if (bytes.size() < offset + 4) throw FormatError(what + ": truncated header", std::min(bytes.size(), offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::optional<std::size_t> limit) {
  const auto img = read_bytes(images_path);
  const auto lab = read_bytes(labels_path);
  const std::string img_name = "image file '" + images_path.string() + "'";
  const std::string lab_name = "label file '" + labels_path.string() + "'";

  if (read_be32(img, 0, img_name) != kImageMagic) throw FormatError(img_name + ": bad magic number", 0);
  const std::size_t n_images = read_be32(img, 4, img_name);
  const std::size_t rows = read_be32(img, 8, img_name);
  const std::size_t cols = read_be32(img, 12, img_name);
  const std::size_t pixels = rows * cols;
  const std::size_t img_end = 16 + n_images * pixels;
  if (img.size() < img_end) throw FormatError(img_name + ": truncated pixel data", img.size());
  if (img.size() > img_end) throw FormatError(img_name + ": trailing bytes after pixel data", img_end);

  if (read_be32(lab, 0, lab_name) != kLabelMagic) throw FormatError(lab_name + ": bad magic number", 0);
  const std::size_t n_labels = read_be32(lab, 4, lab_name);
  if (lab.size() < 8 + n_labels) throw FormatError(lab_name + ": truncated label data", lab.size());
  if (lab.size() > 8 + n_labels) throw FormatError(lab_name + ": trailing bytes after label data", 8 + n_labels);
  if (n_labels != n_images)
    throw FormatError(lab_name + ": holds " + std::to_string(n_labels) + " labels but " + img_name + " holds " +
                          std::to_string(n_images) + " images",
                      4);

  const std::size_t n = limit ? std::min(*limit, n_images) : n_images;
  Dataset d;
  d.name = images_path.filename().string();
  d.inputs = DenseMatrix(n, pixels);
  d.labels.resize(n);
  int max_label = 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) d.inputs(i, p) = img[16 + i * pixels + p] / 255.0;
    d.labels[i] = lab[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.n_classes = max_label + 1;
  return d;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  validate(dataset);
  if (dataset.n_classes > 256) throw ContractError("write_idx: labels must fit in one byte");
  for (double x : dataset.inputs.data)
    if (x < 0.0 || x > 1.0) throw ContractError("write_idx: inputs must lie in [0, 1]");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot write '" + images_path.string() + "'");
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(dataset.size()));
  write_be32(img, 1);
  write_be32(img, static_cast<std::uint32_t>(dataset.inputs.cols));
  for (double x : dataset.inputs.data) img.put(static_cast<char>(std::lround(x * 255.0)));
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot write '" + labels_path.string() + "'");
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(dataset.size()));
  for (int y : dataset.labels) lab.put(static_cast<char>(y));
  if (!img || !lab) throw IoError("write failed for IDX pair '" + images_path.string() + "'");
}

Dataset min_max_scale(const Dataset& dataset) {
  Dataset out = dataset;
  for (std::size_t c = 0; c < out.inputs.cols; ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t r = 0; r < out.inputs.rows; ++r) {
      lo = std::min(lo, out.inputs(r, c));
      hi = std::max(hi, out.inputs(r, c));
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < out.inputs.rows; ++r)
      out.inputs(r, c) = span > 0.0 ? std::clamp((out.inputs(r, c) - lo) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

namespace {

Dataset subset(const Dataset& d, std::span<const std::size_t> idx) {
  Dataset out;
  out.name = d.name;
  out.n_classes = d.n_classes;
  Batch b = gather(as_batch(d), idx);
  out.inputs = std::move(b.inputs);
  out.labels = std::move(b.labels);
  return out;
}

}  // namespace

Split split_dataset(const Dataset& dataset, const SplitSpec& spec) {
  validate(dataset);
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("split: train_fraction must be in (0, 1)");
  const std::size_t n = dataset.size();
  if (n < 2) throw ContractError("split: need at least 2 examples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Split s;
  s.train = subset(dataset, std::span(order).first(n_train));
  s.test = subset(dataset, std::span(order).subspan(n_train));
  return s;
}

void center_features(Dataset& target, const Dataset& reference) {
  if (target.inputs.cols != reference.inputs.cols) throw ContractError("center_features: feature count mismatch");
  for (std::size_t c = 0; c < reference.inputs.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < reference.inputs.rows; ++r) mean += reference.inputs(r, c);
    mean /= static_cast<double>(std::max<std::size_t>(reference.inputs.rows, 1));
    for (std::size_t r = 0; r < target.inputs.rows; ++r) target.inputs(r, c) -= mean;
  }
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t epoch_seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<Batch> batch_iter(const Dataset& dataset, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 1) throw ContractError("batch_iter: batch_size must be >= 1");
  if (dataset.size() == 0) throw ContractError("batch_iter: dataset is empty");
  const auto order = epoch_permutation(dataset.size(), epoch_seed);
  const Batch all = as_batch(dataset);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    out.push_back(gather(all, std::span(order).subspan(start, len)));
  }
  return out;
}

}  // namespace crsam
