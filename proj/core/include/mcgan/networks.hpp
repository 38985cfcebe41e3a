#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcgan/nn.hpp"
#include "mcgan/ops.hpp"

namespace mcgan {

inline int64_t log2_exact(int64_t v, const char* what) {
  int64_t n = 0, x = v;
  while (x > 1) {
    if (x % 2 != 0)
      throw ConfigError(std::string(what) + " must be a power of two, got " +
                        std::to_string(v));
    x /= 2;
    ++n;
  }
  return n;
}

// Default stage widths: 64,128,256,... capped at 512.
inline std::vector<int64_t> default_stage_channels(int64_t n_stages) {
  std::vector<int64_t> ch;
  for (int64_t i = 0; i < n_stages; ++i)
    ch.push_back(std::min<int64_t>(64ll << i, 512));
  return ch;
}

// Task label injected as one-hot constant planes appended to the image.
struct TaskLabel {
  int64_t index = 0;
  int64_t n_tasks = 2;
};

// x: [n, c, h, w]; labels: one per batch item -> [n, c + n_tasks, h, w].
template <class T>
TensorT<T> condition_input(TensorT<T> x, const std::vector<int64_t>& labels,
                           int64_t n_tasks) {
  if (x.rank() != 4)
    throw ShapeError("condition_input: expects NCHW, got " + shape_str(x.shape()));
  const int64_t n = x.shape()[0], h = x.shape()[2], w = x.shape()[3];
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeError("condition_input: got " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(n));
  TensorT<T> planes = TensorT<T>::zeros({n, n_tasks, h, w});
  for (int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= n_tasks)
      throw ContractError("condition_input: task index " +
                          std::to_string(labels[i]) + " out of range [0," +
                          std::to_string(n_tasks) + ")");
    T* p = planes.data().data() + (i * n_tasks + labels[i]) * h * w;
    std::fill(p, p + h * w, T(1));
  }
  return concat(x, planes, 1);
}

// U-Net generator: strided 4x4 encoder to a 1x1 bottleneck, mirrored
// transposed-conv decoder with skip connections and dropout in the first
// decoder stages, tanh output in (-1, 1).
template <class T>
struct GeneratorNetT {
  int64_t size = 0, in_ch = 0, n_stages = 0;
  std::vector<int64_t> enc_ch;
  std::vector<Conv2dT<T>> enc;
  std::vector<BatchNorm2dT<T>> enc_bn;  // enc_bn[0] unused (no BN on stage 0)
  std::vector<Conv2dT<T>> dec;
  std::vector<BatchNorm2dT<T>> dec_bn;
  Conv2dT<T> final_up;
  int64_t n_dropout_stages = 3;
  T dropout_rate = T(0.5);

  GeneratorNetT() = default;
  GeneratorNetT(int64_t input_size, int64_t input_channels, Rng& rng,
                std::vector<int64_t> stage_channels = {})
      : size(input_size), in_ch(input_channels) {
    n_stages = log2_exact(input_size, "generator input size");
    if (n_stages < 2)
      throw ConfigError("generator input size must be at least 4");
    enc_ch = stage_channels.empty() ? default_stage_channels(n_stages)
                                    : std::move(stage_channels);
    if (static_cast<int64_t>(enc_ch.size()) != n_stages)
      throw ConfigError("generator: expected " + std::to_string(n_stages) +
                        " stage channels, got " + std::to_string(enc_ch.size()));
    int64_t prev = in_ch;
    for (int64_t i = 0; i < n_stages; ++i) {
      enc.emplace_back(prev, enc_ch[i], ConvDir::down, rng);
      enc_bn.emplace_back(enc_ch[i]);
      prev = enc_ch[i];
    }
    // decoder stage i consumes the previous decoder output (concatenated with
    // its skip) and produces enc_ch[n-2-i] channels at doubled resolution
    int64_t d_in = enc_ch[n_stages - 1];
    for (int64_t i = 0; i + 1 < n_stages; ++i) {
      const int64_t d_out = enc_ch[n_stages - 2 - i];
      dec.emplace_back(d_in, d_out, ConvDir::up, rng);
      dec_bn.emplace_back(d_out);
      d_in = d_out + enc_ch[n_stages - 2 - i];  // after skip concat
    }
    final_up = Conv2dT<T>(d_in, 1, ConvDir::up, rng);
    n_dropout_stages = std::min<int64_t>(3, n_stages - 1);
  }

  // taps, when given, receives each conv stage output (encoder stages first,
  // then decoder stages, then the final layer) for activation export.
  TensorT<T> forward(TensorT<T> x, bool train, bool dropout_on, Rng& rng,
                     std::vector<TensorT<T>>* taps = nullptr) {
    if (x.rank() != 4 || x.shape()[2] != size || x.shape()[3] != size)
      throw ShapeError("generator: expected input spatial size " +
                       std::to_string(size) + ", got " + shape_str(x.shape()));
    if (x.shape()[1] != in_ch)
      throw ShapeError("generator: expected " + std::to_string(in_ch) +
                       " input channels, got " + shape_str(x.shape()));
    std::vector<TensorT<T>> skips;
    TensorT<T> h = x;
    for (int64_t i = 0; i < n_stages; ++i) {
      h = enc[i].forward(h);
      if (taps) taps->push_back(h);
      if (i > 0) h = enc_bn[i].forward(h, train);
      h = relu(h);
      skips.push_back(h);
    }
    TensorT<T> d = skips[n_stages - 1];
    for (int64_t i = 0; i + 1 < n_stages; ++i) {
      d = dec[i].forward(d);
      if (taps) taps->push_back(d);
      d = dec_bn[i].forward(d, train);
      if (i < n_dropout_stages) d = dropout(d, dropout_rate, rng, dropout_on);
      d = relu(d);
      d = concat(d, skips[n_stages - 2 - i], 1);
    }
    TensorT<T> o = tanh_(final_up.forward(d));
    if (taps) taps->push_back(o);
    return o;
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    for (size_t i = 0; i < enc.size(); ++i) {
      enc[i].collect(prefix + ".enc" + std::to_string(i), out);
      if (i > 0) enc_bn[i].collect(prefix + ".enc_bn" + std::to_string(i), out);
    }
    for (size_t i = 0; i < dec.size(); ++i) {
      dec[i].collect(prefix + ".dec" + std::to_string(i), out);
      dec_bn[i].collect(prefix + ".dec_bn" + std::to_string(i), out);
    }
    final_up.collect(prefix + ".final", out);
  }
  std::vector<TensorT<T>> params() const {
    std::vector<TensorT<T>> p;
    for (size_t i = 0; i < enc.size(); ++i) {
      for (auto& t : enc[i].params()) p.push_back(t);
      if (i > 0)
        for (auto& t : enc_bn[i].params()) p.push_back(t);
    }
    for (size_t i = 0; i < dec.size(); ++i) {
      for (auto& t : dec[i].params()) p.push_back(t);
      for (auto& t : dec_bn[i].params()) p.push_back(t);
    }
    for (auto& t : final_up.params()) p.push_back(t);
    return p;
  }
};

// Convolutional discriminator: strided 4x4 stages, a 1-channel 1x1 head,
// sigmoid patch scores averaged to one score per batch item.
template <class T>
struct DiscriminatorNetT {
  int64_t size = 0, in_ch = 0, n_stages = 0;
  std::vector<int64_t> stage_ch;
  std::vector<Conv2dT<T>> stages;
  std::vector<BatchNorm2dT<T>> bns;  // bns[0] unused
  TensorT<T> head_w, head_b;         // 1x1 conv over channels

  DiscriminatorNetT() = default;
  DiscriminatorNetT(int64_t input_size, int64_t input_channels, Rng& rng,
                    std::vector<int64_t> channels = {})
      : size(input_size), in_ch(input_channels) {
    const int64_t depth = log2_exact(input_size, "discriminator input size");
    n_stages = std::min<int64_t>(6, depth);
    stage_ch = channels.empty() ? default_stage_channels(n_stages)
                                : std::move(channels);
    if (static_cast<int64_t>(stage_ch.size()) != n_stages)
      throw ConfigError("discriminator: expected " + std::to_string(n_stages) +
                        " stage channels, got " + std::to_string(stage_ch.size()));
    int64_t prev = in_ch;
    for (int64_t i = 0; i < n_stages; ++i) {
      stages.emplace_back(prev, stage_ch[i], ConvDir::down, rng);
      bns.emplace_back(stage_ch[i]);
      prev = stage_ch[i];
    }
    head_w = TensorT<T>::randn({1, prev}, rng, T(0.02)).set_requires_grad();
    head_b = TensorT<T>::zeros({1}).set_requires_grad();
  }

  // x_cond: conditioned image planes, y: the (gated) map; concatenated on
  // channels. Returns one score in (0,1) per batch item, shape [n].
  TensorT<T> forward(TensorT<T> x_cond, TensorT<T> y, bool train) {
    if (x_cond.shape()[0] != y.shape()[0] ||
        x_cond.shape()[2] != y.shape()[2] || x_cond.shape()[3] != y.shape()[3])
      throw ShapeError("discriminator: condition " + shape_str(x_cond.shape()) +
                       " and map " + shape_str(y.shape()) +
                       " are not spatially congruent");
    TensorT<T> h = concat(x_cond, y, 1);
    if (h.shape()[1] != in_ch)
      throw ShapeError("discriminator: expected " + std::to_string(in_ch) +
                       " channels, got " + shape_str(h.shape()));
    for (int64_t i = 0; i < n_stages; ++i) {
      h = stages[i].forward(h);
      if (i > 0) h = bns[i].forward(h, train);
      h = relu(h);
    }
    // 1x1 conv to one patch-score channel, sigmoid, spatial mean
    const int64_t n = h.shape()[0], c = h.shape()[1];
    const int64_t hw = h.shape()[2] * h.shape()[3];
    std::vector<TensorT<T>> scored;
    for (int64_t i = 0; i < n; ++i) {
      TensorT<T> hi = reshape(slice0(h, i), {c, hw});
      TensorT<T> s = add(matmul(head_w, hi), reshape(head_b, {1, 1}));
      scored.push_back(reshape(sigmoid(s), {1, h.shape()[2], h.shape()[3]}));
    }
    return reshape(spatial_mean(stack0(scored)), {n});
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    for (size_t i = 0; i < stages.size(); ++i) {
      stages[i].collect(prefix + ".stage" + std::to_string(i), out);
      if (i > 0) bns[i].collect(prefix + ".bn" + std::to_string(i), out);
    }
    out.emplace_back(prefix + ".head_w", head_w);
    out.emplace_back(prefix + ".head_b", head_b);
  }
  std::vector<TensorT<T>> params() const {
    std::vector<TensorT<T>> p;
    for (size_t i = 0; i < stages.size(); ++i) {
      for (auto& t : stages[i].params()) p.push_back(t);
      if (i > 0)
        for (auto& t : bns[i].params()) p.push_back(t);
    }
    p.push_back(head_w);
    p.push_back(head_b);
    return p;
  }
};

// Learned projection of the 100-dim memory gate to a full-resolution plane.
// The bias starts high so the tanh plane is near-transparent at init.
template <class T>
struct GateProjectionT {
  TensorT<T> w, b;
  int64_t h = 0, wd = 0;

  GateProjectionT() = default;
  GateProjectionT(int64_t height, int64_t width, int64_t gate_width, Rng& rng,
                  T bias_init = T(2))
      : h(height), wd(width) {
    w = TensorT<T>::randn({h * wd, gate_width}, rng, T(0.02)).set_requires_grad();
    b = TensorT<T>::filled({h * wd}, bias_init).set_requires_grad();
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
  std::vector<TensorT<T>> params() const { return {w, b}; }
};

// gated = o .* tanh(proj(gate)); o is a single item [1, h, w].
template <class T>
TensorT<T> apply_memory_gate(TensorT<T> o, TensorT<T> gate,
                             const GateProjectionT<T>& proj) {
  if (o.rank() != 3 || o.shape()[1] != proj.h || o.shape()[2] != proj.wd)
    throw ShapeError("apply_memory_gate: map " + shape_str(o.shape()) +
                     " does not match projection " + std::to_string(proj.h) +
                     "x" + std::to_string(proj.wd));
  TensorT<T> plane = tanh_(reshape(linear(gate, proj.w, proj.b), {1, proj.h, proj.wd}));
  return mul(o, plane);
}

// Channel-mean absolute activation of one conv layer, min-max normalized to
// [0,1] and upsampled (nearest) to the input resolution. `layer` is 1-based
// over all conv layers in forward order.
template <class T>
std::vector<T> export_activation(GeneratorNetT<T>& g, TensorT<T> x_cond,
                                 int64_t layer, Rng& rng) {
  NoGradGuard ng;
  std::vector<TensorT<T>> taps;
  g.forward(x_cond, /*train=*/false, /*dropout_on=*/false, rng, &taps);
  if (layer < 1 || layer > static_cast<int64_t>(taps.size()))
    throw ContractError("export_activation: invalid layer id " +
                        std::to_string(layer) + ", have " +
                        std::to_string(taps.size()) + " conv layers");
  TensorT<T> t = taps[layer - 1];  // [n, c, h, w]; first batch item used
  const int64_t c = t.shape()[1], th = t.shape()[2], tw = t.shape()[3];
  std::vector<T> heat(th * tw, T(0));
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < th * tw; ++i)
      heat[i] += std::abs(t.data()[ch * th * tw + i]);
  T lo = heat[0], hi = heat[0];
  for (T v : heat) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (T& v : heat) v = hi > lo ? (v - lo) / (hi - lo) : T(0);
  // nearest-neighbour upsample to the generator input size
  const int64_t s = g.size;
  std::vector<T> up(s * s);
  for (int64_t y = 0; y < s; ++y)
    for (int64_t x = 0; x < s; ++x)
      up[y * s + x] = heat[(y * th / s) * tw + (x * tw / s)];
  return up;
}

using GeneratorNet = GeneratorNetT<float>;
using DiscriminatorNet = DiscriminatorNetT<float>;
using GateProjection = GateProjectionT<float>;

}  // namespace mcgan
