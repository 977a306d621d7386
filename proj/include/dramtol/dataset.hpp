// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace dramtol {

enum class DatasetKind {
  spiral,  // interleaved 2-D spiral arms
  blobs,   // 2-D Gaussian blobs truncated so classes are linearly separable
  images,  // 1x8x8 noisy class prototypes (conv topology)
};

std::string_view dataset_kind_name(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

struct Dataset {
  DatasetKind kind = DatasetKind::spiral;
  std::uint32_t classes = 0;
  std::uint32_t features = 0;  // values per sample
  std::uint64_t seed = 0;
  std::vector<float> train_x;  // row-major, features per row
  std::vector<std::uint32_t> train_y;
  std::vector<float> val_x;
  std::vector<std::uint32_t> val_y;

  std::size_t train_size() const { return train_y.size(); }
  std::size_t val_size() const { return val_y.size(); }
};

/// Deterministic labelled set, shuffled and split 80/20 into
/// train/validation. Samples are spread evenly over the classes.
Dataset make_synthetic_dataset(std::size_t n, std::uint32_t classes, std::uint64_t seed,
                               DatasetKind kind = DatasetKind::spiral);

}  // namespace dramtol
