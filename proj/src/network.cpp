// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "dense") return LayerKind::dense;
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "relu") return LayerKind::relu;
  if (name == "maxpool") return LayerKind::maxpool;
  throw Error("bad_layer", "unknown layer kind '" + std::string(name) + "'");
}

std::size_t LayerSpec::input_size() const {
  switch (kind) {
    case LayerKind::dense:
    case LayerKind::relu: return in;
    case LayerKind::conv2d:
    case LayerKind::maxpool: return std::size_t{channels} * height * width;
  }
  return 0;
}

std::size_t LayerSpec::output_size() const {
  switch (kind) {
    case LayerKind::dense:
    case LayerKind::relu: return out;
    case LayerKind::conv2d:
      return std::size_t{out} * (height - kernel + 1) * (width - kernel + 1);
    case LayerKind::maxpool: return std::size_t{channels} * (height / 2) * (width / 2);
  }
  return 0;
}

std::size_t LayerSpec::weight_count() const {
  switch (kind) {
    case LayerKind::dense: return std::size_t{in} * out;
    case LayerKind::conv2d: return std::size_t{out} * channels * kernel * kernel;
    default: return 0;
  }
}

std::size_t LayerSpec::bias_count() const { return has_parameters() ? out : 0; }

std::string DataTypeId::name() const {
  return (kind == Kind::weight ? "w" : "ifm") + std::to_string(layer);
}

DataTypeId DataTypeId::parse(std::string_view name) {
  DataTypeId id;
  std::string_view digits;
  if (name.starts_with("ifm")) {
    id.kind = Kind::ifm;
    digits = name.substr(3);
  } else if (name.starts_with("w")) {
    id.kind = Kind::weight;
    digits = name.substr(1);
  }
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                     [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error("bad_data_type", "unknown data type '" + std::string(name) + "'");
  }
  id.layer = static_cast<std::uint32_t>(std::stoul(std::string(digits)));
  return id;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight_count() + l.bias_count();
  return n;
}

std::vector<std::size_t> Network::parameterized_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_parameters()) out.push_back(i);
  }
  return out;
}

std::vector<DataTypeId> Network::data_types() const {
  const auto n = static_cast<std::uint32_t>(parameterized_layers().size());
  std::vector<DataTypeId> out;
  for (std::uint32_t k = 0; k < n; ++k) out.push_back({DataTypeId::Kind::weight, k});
  for (std::uint32_t k = 0; k < n; ++k) out.push_back({DataTypeId::Kind::ifm, k});
  return out;
}

std::size_t Network::elements(const DataTypeId& id) const {
  const auto p = parameterized_layers();
  if (id.layer >= p.size()) {
    throw Error("bad_data_type", "no parameterised layer " + std::to_string(id.layer));
  }
  const auto& l = layers[p[id.layer]];
  return id.kind == DataTypeId::Kind::weight ? l.weight_count() + l.bias_count()
                                             : l.input_size();
}

void Network::validate() const {
  if (layers.empty()) throw Error("bad_network", "network has no layers");
  if (parameterized_layers().size() < 2) {
    throw Error("bad_network", "network needs at least two parameterised layers");
  }
  if (weights.size() != layers.size() || biases.size() != layers.size()) {
    throw Error("bad_network", "parameter arrays do not match the layer list");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.input_size() == 0 || l.output_size() == 0) {
      throw Error("bad_network", "layer " + std::to_string(i) + " has an empty shape");
    }
    if (l.kind == LayerKind::conv2d && (l.kernel == 0 || l.kernel > l.height ||
                                        l.kernel > l.width)) {
      throw Error("bad_network", "conv kernel does not fit layer " + std::to_string(i));
    }
    if (i + 1 < layers.size() && l.output_size() != layers[i + 1].input_size()) {
      throw Error("bad_network", "layer " + std::to_string(i) + " output does not feed layer " +
                                     std::to_string(i + 1));
    }
    if (weights[i].size() != l.weight_count() || biases[i].size() != l.bias_count()) {
      throw Error("bad_network", "parameter count mismatch in layer " + std::to_string(i));
    }
  }
}

namespace {

void init_parameters(Network& net, std::uint64_t seed) {
  net.weights.assign(net.layers.size(), {});
  net.biases.assign(net.layers.size(), {});
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (!l.has_parameters()) continue;
    const double fan_in = l.kind == LayerKind::dense
                              ? static_cast<double>(l.in)
                              : static_cast<double>(l.channels) * l.kernel * l.kernel;
    const double sd = std::sqrt(2.0 / fan_in);
    StreamEngine eng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    net.weights[i].resize(l.weight_count());
    for (auto& w : net.weights[i]) w = sd * eng.normal();
    net.biases[i].assign(l.bias_count(), 0.0);
  }
}

}  // namespace

Network make_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden,
                 std::size_t classes, std::uint64_t seed) {
  Network net;
  std::size_t prev = inputs;
  for (std::size_t h : hidden) {
    net.layers.push_back({LayerKind::dense, static_cast<std::uint32_t>(prev),
                          static_cast<std::uint32_t>(h)});
    net.layers.push_back({LayerKind::relu, static_cast<std::uint32_t>(h),
                          static_cast<std::uint32_t>(h)});
    prev = h;
  }
  net.layers.push_back({LayerKind::dense, static_cast<std::uint32_t>(prev),
                        static_cast<std::uint32_t>(classes)});
  init_parameters(net, derive_seed(seed, "init"));
  net.validate();
  return net;
}

Network make_conv_net(std::size_t classes, std::uint64_t seed) {
  Network net;
  LayerSpec conv{LayerKind::conv2d};
  conv.channels = 1;
  conv.height = conv.width = 8;
  conv.kernel = 3;
  conv.out = 8;
  net.layers.push_back(conv);
  const auto n = static_cast<std::uint32_t>(conv.output_size());
  net.layers.push_back({LayerKind::relu, n, n});
  LayerSpec pool{LayerKind::maxpool};
  pool.channels = 8;
  pool.height = pool.width = 6;
  net.layers.push_back(pool);
  net.layers.push_back({LayerKind::dense, static_cast<std::uint32_t>(pool.output_size()),
                        static_cast<std::uint32_t>(classes)});
  init_parameters(net, derive_seed(seed, "init"));
  net.validate();
  return net;
}

namespace {

void dense_forward(const LayerSpec& l, const double* w, const double* b, const double* x,
                   double* y, std::size_t batch) {
  for (std::size_t s = 0; s < batch; ++s) {
    const double* xs = x + s * l.in;
    double* ys = y + s * l.out;
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* wo = w + o * l.in;
      double acc = b[o];
      for (std::size_t i = 0; i < l.in; ++i) acc += wo[i] * xs[i];
      ys[o] = acc;
    }
  }
}

void conv_forward(const LayerSpec& l, const double* w, const double* b, const double* x,
                  double* y, std::size_t batch) {
  const std::size_t oh = l.height - l.kernel + 1, ow = l.width - l.kernel + 1;
  const std::size_t in_sz = l.input_size(), out_sz = l.output_size();
  for (std::size_t s = 0; s < batch; ++s) {
    const double* xs = x + s * in_sz;
    double* ys = y + s * out_sz;
    for (std::size_t f = 0; f < l.out; ++f) {
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
          double acc = b[f];
          for (std::size_t ch = 0; ch < l.channels; ++ch) {
            const double* wk = w + (f * l.channels + ch) * l.kernel * l.kernel;
            const double* xc = xs + ch * l.height * l.width;
            for (std::size_t i = 0; i < l.kernel; ++i) {
              for (std::size_t j = 0; j < l.kernel; ++j) {
                acc += wk[i * l.kernel + j] * xc[(r + i) * l.width + (c + j)];
              }
            }
          }
          ys[(f * oh + r) * ow + c] = acc;
        }
      }
    }
  }
}

// Index (within one sample) of the maximum of pooling window (ch, r, c).
std::size_t pool_argmax(const LayerSpec& l, const double* xs, std::size_t ch, std::size_t r,
                        std::size_t c) {
  std::size_t best = (ch * l.height + 2 * r) * l.width + 2 * c;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const std::size_t k = (ch * l.height + 2 * r + i) * l.width + 2 * c + j;
      // NaN never wins, so a window with a finite value stays finite.
      if (xs[k] > xs[best] || std::isnan(xs[best])) best = k;
    }
  }
  return best;
}

void pool_forward(const LayerSpec& l, const double* x, double* y, std::size_t batch) {
  const std::size_t oh = l.height / 2, ow = l.width / 2;
  for (std::size_t s = 0; s < batch; ++s) {
    const double* xs = x + s * l.input_size();
    double* ys = y + s * l.output_size();
    for (std::size_t ch = 0; ch < l.channels; ++ch) {
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
          ys[(ch * oh + r) * ow + c] = xs[pool_argmax(l, xs, ch, r, c)];
        }
      }
    }
  }
}

}  // namespace

ForwardTrace forward(const Network& net, std::span<const double> x, std::size_t batch,
                     const LoadFn& load) {
  if (x.size() != batch * net.input_size()) {
    throw Error("size_mismatch", "input batch does not match the network input size");
  }
  ForwardTrace t;
  t.batch = batch;
  t.acts.resize(net.layers.size() + 1);
  t.weights.resize(net.layers.size());
  t.biases.resize(net.layers.size());
  t.acts[0].assign(x.begin(), x.end());
  std::uint32_t k = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    auto& in = t.acts[i];
    auto& out = t.acts[i + 1];
    out.assign(batch * l.output_size(), 0.0);
    if (l.has_parameters()) {
      std::vector<double> packed(net.weights[i]);
      packed.insert(packed.end(), net.biases[i].begin(), net.biases[i].end());
      if (load) {
        load({DataTypeId::Kind::weight, k}, packed);
        load({DataTypeId::Kind::ifm, k}, in);
      }
      t.weights[i].assign(packed.begin(), packed.begin() + l.weight_count());
      t.biases[i].assign(packed.begin() + l.weight_count(), packed.end());
      if (l.kind == LayerKind::dense) {
        dense_forward(l, t.weights[i].data(), t.biases[i].data(), in.data(), out.data(), batch);
      } else {
        conv_forward(l, t.weights[i].data(), t.biases[i].data(), in.data(), out.data(), batch);
      }
      ++k;
    } else if (l.kind == LayerKind::relu) {
      for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] > 0.0 ? in[j] : 0.0;
    } else {
      pool_forward(l, in.data(), out.data(), batch);
    }
  }
  return t;
}

double softmax_cross_entropy(std::span<const double> logits,
                             std::span<const std::uint32_t> labels, std::size_t classes,
                             std::vector<double>* dlogits) {
  const std::size_t batch = labels.size();
  if (logits.size() != batch * classes) {
    throw Error("size_mismatch", "logits do not match the label count");
  }
  if (dlogits != nullptr) dlogits->assign(logits.size(), 0.0);
  double loss = 0.0;
  for (std::size_t s = 0; s < batch; ++s) {
    const double* z = logits.data() + s * classes;
    const double m = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - m);
    const double lse = m + std::log(sum);
    loss += lse - z[labels[s]];
    if (dlogits != nullptr) {
      for (std::size_t c = 0; c < classes; ++c) {
        (*dlogits)[s * classes + c] =
            (std::exp(z[c] - lse) - (c == labels[s] ? 1.0 : 0.0)) / static_cast<double>(batch);
      }
    }
  }
  return loss / static_cast<double>(batch);
}

Gradients backward(const Network& net, const ForwardTrace& t, std::span<const double> dlogits) {
  Gradients g;
  g.weights.resize(net.layers.size());
  g.biases.resize(net.layers.size());
  const std::size_t batch = t.batch;
  std::vector<double> dy(dlogits.begin(), dlogits.end());
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& l = net.layers[i];
    const auto& x = t.acts[i];
    std::vector<double> dx(x.size(), 0.0);
    if (l.kind == LayerKind::dense) {
      auto& dw = g.weights[i];
      auto& db = g.biases[i];
      dw.assign(l.weight_count(), 0.0);
      db.assign(l.out, 0.0);
      const double* w = t.weights[i].data();
      for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = x.data() + s * l.in;
        const double* ds = dy.data() + s * l.out;
        double* dxs = dx.data() + s * l.in;
        for (std::size_t o = 0; o < l.out; ++o) {
          const double d = ds[o];
          if (d == 0.0) continue;
          db[o] += d;
          double* dwo = dw.data() + o * l.in;
          const double* wo = w + o * l.in;
          for (std::size_t j = 0; j < l.in; ++j) {
            dwo[j] += d * xs[j];
            dxs[j] += d * wo[j];
          }
        }
      }
    } else if (l.kind == LayerKind::conv2d) {
      auto& dw = g.weights[i];
      auto& db = g.biases[i];
      dw.assign(l.weight_count(), 0.0);
      db.assign(l.out, 0.0);
      const double* w = t.weights[i].data();
      const std::size_t oh = l.height - l.kernel + 1, ow = l.width - l.kernel + 1;
      for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = x.data() + s * l.input_size();
        const double* ds = dy.data() + s * l.output_size();
        double* dxs = dx.data() + s * l.input_size();
        for (std::size_t f = 0; f < l.out; ++f) {
          for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
              const double d = ds[(f * oh + r) * ow + c];
              if (d == 0.0) continue;
              db[f] += d;
              for (std::size_t ch = 0; ch < l.channels; ++ch) {
                const std::size_t wbase = (f * l.channels + ch) * l.kernel * l.kernel;
                const std::size_t xbase = ch * l.height * l.width;
                for (std::size_t a = 0; a < l.kernel; ++a) {
                  for (std::size_t b = 0; b < l.kernel; ++b) {
                    const std::size_t xi = xbase + (r + a) * l.width + (c + b);
                    dw[wbase + a * l.kernel + b] += d * xs[xi];
                    dxs[xi] += d * w[wbase + a * l.kernel + b];
                  }
                }
              }
            }
          }
        }
      }
    } else if (l.kind == LayerKind::relu) {
      for (std::size_t j = 0; j < x.size(); ++j) dx[j] = x[j] > 0.0 ? dy[j] : 0.0;
    } else {
      const std::size_t oh = l.height / 2, ow = l.width / 2;
      for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = x.data() + s * l.input_size();
        const double* ds = dy.data() + s * l.output_size();
        double* dxs = dx.data() + s * l.input_size();
        for (std::size_t ch = 0; ch < l.channels; ++ch) {
          for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
              dxs[pool_argmax(l, xs, ch, r, c)] += ds[(ch * oh + r) * ow + c];
            }
          }
        }
      }
    }
    dy = std::move(dx);
  }
  return g;
}

void Thresholds::observe(const DataTypeId& id, std::span<const double> values) {
  auto& b = observed[id];
  for (double v : values) {
    if (std::isfinite(v)) b.include(v);
  }
}

Bounds Thresholds::bounds(const DataTypeId& id) const {
  const auto it = observed.find(id);
  if (it == observed.end() || it->second.empty()) return {0.0, 0.0};
  const Bounds& b = it->second;
  return {b.lo < 0.0 ? b.lo * margin : b.lo / margin, b.hi > 0.0 ? b.hi * margin : b.hi / margin};
}

std::string_view correction_name(Correction c) {
  switch (c) {
    case Correction::off: return "off";
    case Correction::zero: return "zero";
    case Correction::saturate: return "saturate";
  }
  return "?";
}

Correction parse_correction(std::string_view name) {
  if (name == "off") return Correction::off;
  if (name == "zero") return Correction::zero;
  if (name == "saturate") return Correction::saturate;
  throw Error("bad_correction", "unknown correction mode '" + std::string(name) + "'");
}

double bound_correct(double x, const Bounds& b, Correction mode) {
  if (mode == Correction::off) return x;
  if (x >= b.lo && x <= b.hi) return x;  // false for NaN
  if (mode == Correction::zero) return 0.0;
  if (std::isnan(x)) return std::clamp(0.0, b.lo, b.hi);
  return x < b.lo ? b.lo : b.hi;
}

namespace {

// Unbiased binary exponent field of a finite float; -1 for zero.
int exponent_field(float v) {
  if (v == 0.0f) return -1;
  return static_cast<int>((std::bit_cast<std::uint32_t>(v) >> 23) & 0xFF);
}

}  // namespace

bool exponent_out_of_range(float x, const Bounds& b) {
  if (!std::isfinite(x)) return true;
  if (x == 0.0f) return false;
  const double bound = x > 0.0f ? b.hi : b.lo;
  if (x > 0.0f ? bound <= 0.0 : bound >= 0.0) return true;  // no room on this side
  return exponent_field(x) > exponent_field(static_cast<float>(bound));
}

void storage_round(Dtype dtype, std::span<double> values) {
  if (!dtype.is_integer()) {
    for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
    return;
  }
  const std::size_t n = values.size();
  std::vector<float> f(values.begin(), values.end());
  const Tensor q = quantize(Tensor::from_floats({n}, std::move(f)), dtype);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = q.real(i);
}

}  // namespace dramtol
