// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/dataset.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

std::string_view dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::spiral: return "spiral";
    case DatasetKind::blobs: return "blobs";
    case DatasetKind::images: return "images";
  }
  return "?";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "spiral") return DatasetKind::spiral;
  if (name == "blobs") return DatasetKind::blobs;
  if (name == "images") return DatasetKind::images;
  throw Error("bad_dataset", "unknown dataset kind '" + std::string(name) + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kImageNoise = 1.5;

void spiral_sample(StreamEngine& eng, std::uint32_t c, std::uint32_t classes,
                   std::vector<float>& out) {
  const double t = eng.uniform();
  const double r = 0.1 + 0.9 * t;
  const double theta = kTwoPi * c / classes + 3.0 * t + 0.15 * eng.normal();
  out.push_back(static_cast<float>(2.0 * r * std::cos(theta)));
  out.push_back(static_cast<float>(2.0 * r * std::sin(theta)));
}

void blob_sample(StreamEngine& eng, std::uint32_t c, std::uint32_t classes,
                 std::vector<float>& out) {
  constexpr double kCut = 1.2;
  // Adjacent centres sit 2 * (kCut + 0.1) apart, so truncated blobs lie
  // strictly inside the Voronoi cell of their centre.
  const double radius =
      classes <= 2 ? kCut + 0.1 : (kCut + 0.1) / std::sin(std::numbers::pi / classes);
  const double angle = kTwoPi * c / classes;
  double dx, dy;
  do {
    dx = 0.5 * eng.normal();
    dy = 0.5 * eng.normal();
  } while (dx * dx + dy * dy > kCut * kCut);
  out.push_back(static_cast<float>(radius * std::cos(angle) + dx));
  out.push_back(static_cast<float>(radius * std::sin(angle) + dy));
}

void image_sample(StreamEngine& eng, const std::vector<std::vector<double>>& protos,
                  std::uint32_t c, std::vector<float>& out) {
  for (double v : protos[c]) out.push_back(static_cast<float>(v + kImageNoise * eng.normal()));
}

}  // namespace

Dataset make_synthetic_dataset(std::size_t n, std::uint32_t classes, std::uint64_t seed,
                               DatasetKind kind) {
  if (classes < 2) throw Error("bad_dataset", "need at least two classes");
  if (n < classes) throw Error("bad_dataset", "need at least one sample per class");
  Dataset ds;
  ds.kind = kind;
  ds.classes = classes;
  ds.seed = seed;
  ds.features = kind == DatasetKind::images ? 64 : 2;

  StreamEngine eng(derive_seed(seed, "dataset-samples"));
  std::vector<std::vector<double>> protos;
  if (kind == DatasetKind::images) {
    StreamEngine proto_eng(derive_seed(seed, "dataset-prototypes"));
    for (std::uint32_t c = 0; c < classes; ++c) {
      std::vector<double> p(64);
      for (auto& v : p) v = proto_eng.uniform() < 0.5 ? -1.0 : 1.0;
      protos.push_back(std::move(p));
    }
  }

  std::vector<float> x;
  std::vector<std::uint32_t> y;
  x.reserve(n * ds.features);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::uint32_t>(i % classes);
    switch (kind) {
      case DatasetKind::spiral: spiral_sample(eng, c, classes, x); break;
      case DatasetKind::blobs: blob_sample(eng, c, classes, x); break;
      case DatasetKind::images: image_sample(eng, protos, c, x); break;
    }
    y.push_back(c);
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  StreamEngine shuffle(derive_seed(seed, "dataset-shuffle"));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[shuffle.below(i)]);
  }

  const std::size_t n_train = n * 4 / 5;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    auto& xs = k < n_train ? ds.train_x : ds.val_x;
    auto& ys = k < n_train ? ds.train_y : ds.val_y;
    xs.insert(xs.end(), x.begin() + i * ds.features, x.begin() + (i + 1) * ds.features);
    ys.push_back(y[i]);
  }
  return ds;
}

}  // namespace dramtol
