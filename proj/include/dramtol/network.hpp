// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dramtol/numerics.hpp"

namespace dramtol {

enum class LayerKind { dense, conv2d, relu, maxpool };

std::string_view layer_kind_name(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// Shapes are explicit so a layer list can be checked without running it.
/// dense: `in` -> `out`. conv2d: channels x height x width input, `out`
/// filters of kernel x kernel, stride 1, no padding. maxpool: 2x2, stride 2
/// over channels x height x width. relu: `in` == `out`.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t kernel = 0;

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t weight_count() const;
  std::size_t bias_count() const;
  bool has_parameters() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// One weight tensor (weights and bias of a parameterised layer) or one
/// IFM (the input of a parameterised layer). `layer` counts parameterised
/// layers only.
struct DataTypeId {
  enum class Kind : std::uint8_t { weight = 0, ifm = 1 };
  Kind kind = Kind::weight;
  std::uint32_t layer = 0;

  std::string name() const;  // "w0", "ifm1", ...
  static DataTypeId parse(std::string_view name);

  friend auto operator<=>(const DataTypeId&, const DataTypeId&) = default;
};

struct Network {
  std::vector<LayerSpec> layers;
  std::vector<std::vector<double>> weights;  // per layer; empty when unparameterised
  std::vector<std::vector<double>> biases;
  /// Storage type of weights and IFMs in memory.
  Dtype dtype = kFp32;

  std::size_t input_size() const { return layers.front().input_size(); }
  std::size_t output_size() const { return layers.back().output_size(); }
  std::size_t parameter_count() const;

  /// Layer index of every parameterised layer, shallow to deep.
  std::vector<std::size_t> parameterized_layers() const;
  /// Weights first, then IFMs, each shallow to deep.
  std::vector<DataTypeId> data_types() const;
  /// Elements of a weight data type, or of one sample of an IFM.
  std::size_t elements(const DataTypeId& id) const;

  void validate() const;
};

/// inputs -> hidden... -> classes with ReLU between dense layers.
Network make_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden,
                 std::size_t classes, std::uint64_t seed);
/// 1x8x8 -> conv3x3x8 -> relu -> maxpool -> dense(classes).
Network make_conv_net(std::size_t classes, std::uint64_t seed);

/// Called for every weight or IFM load with the values about to be used;
/// may rewrite them (storage rounding, injection, correction).
using LoadFn = std::function<void(const DataTypeId&, std::span<double>)>;

struct ForwardTrace {
  std::size_t batch = 0;
  /// acts[i] is the input of layer i as used; acts.back() holds the logits.
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> weights;  // loaded weights per layer
  std::vector<std::vector<double>> biases;

  std::span<const double> logits() const { return acts.back(); }
};

ForwardTrace forward(const Network& net, std::span<const double> x, std::size_t batch,
                     const LoadFn& load = {});

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

/// Mean softmax cross-entropy over the batch; fills dlogits when given.
double softmax_cross_entropy(std::span<const double> logits,
                             std::span<const std::uint32_t> labels, std::size_t classes,
                             std::vector<double>* dlogits);

/// Gradients of the loss with respect to the loaded weights; loads are
/// treated as identity (straight-through).
Gradients backward(const Network& net, const ForwardTrace& trace,
                   std::span<const double> dlogits);

struct Bounds {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  bool empty() const { return lo > hi; }
  void include(double v) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  void include(const Bounds& b) {
    if (!b.empty()) {
      include(b.lo);
      include(b.hi);
    }
  }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// Value ranges observed during baseline training, per data type.
struct Thresholds {
  double margin = 1.1;
  std::map<DataTypeId, Bounds> observed;

  void observe(const DataTypeId& id, std::span<const double> values);
  /// Observed range widened by `margin` away from zero (0 stays 0).
  Bounds bounds(const DataTypeId& id) const;
  bool has(const DataTypeId& id) const { return observed.count(id) != 0; }
};

enum class Correction { off, zero, saturate };

std::string_view correction_name(Correction c);
Correction parse_correction(std::string_view name);

/// In range and finite -> x; otherwise 0 (zero) or the nearest bound
/// (saturate). NaN is never in range; saturating NaN gives the bound
/// nearest to 0.
double bound_correct(double x, const Bounds& b, Correction mode);

/// Sign-and-exponent check of an fp32 value: out of range when NaN/Inf,
/// when negative below a non-negative bound (or positive above a
/// non-positive one), or when its binary exponent exceeds that of the bound
/// on its side.
bool exponent_out_of_range(float x, const Bounds& b);

/// Rounds values to what storage in `dtype` keeps: fp32 casts, integer
/// types quantize with one per-tensor scale and dequantize.
void storage_round(Dtype dtype, std::span<double> values);

}  // namespace dramtol
