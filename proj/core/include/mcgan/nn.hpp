#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mcgan/ops.hpp"
#include "mcgan/rng.hpp"
#include "mcgan/tensor.hpp"

namespace mcgan {

template <class T>
using NamedTensorsT = std::vector<std::pair<std::string, TensorT<T>>>;

namespace detail {

// im2col for the fixed 4x4 / stride 2 / pad 1 kernel.
// x: [c, h, w] contiguous -> col: [c*16, oh*ow] with oh=h/2, ow=w/2.
template <class T>
void im2col(const T* x, int64_t c, int64_t h, int64_t w, T* col) {
  const int64_t oh = h / 2, ow = w / 2, ohw = oh * ow;
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t kh = 0; kh < 4; ++kh) {
      for (int64_t kw = 0; kw < 4; ++kw) {
        T* dst = col + ((ch * 16 + kh * 4 + kw) * ohw);
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * 2 + kh - 1;
          if (iy < 0 || iy >= h) {
            for (int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = T(0);
            continue;
          }
          const T* src = x + (ch * h + iy) * w;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * 2 + kw - 1;
            dst[oy * ow + ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add col back into the [c, h, w] image.
template <class T>
void col2im(const T* col, int64_t c, int64_t h, int64_t w, T* x) {
  const int64_t oh = h / 2, ow = w / 2, ohw = oh * ow;
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t kh = 0; kh < 4; ++kh) {
      for (int64_t kw = 0; kw < 4; ++kw) {
        const T* src = col + ((ch * 16 + kh * 4 + kw) * ohw);
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * 2 + kh - 1;
          if (iy < 0 || iy >= h) continue;
          T* dst = x + (ch * h + iy) * w;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * 2 + kw - 1;
            if (ix >= 0 && ix < w) dst[ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Strided 4x4 convolution, halving spatial dims.
// x: [n, ic, h, w], w: [oc, ic, 4, 4], b: [oc] -> [n, oc, h/2, w/2].
template <class T>
TensorT<T> conv2d_down(TensorT<T> x, TensorT<T> w, TensorT<T> b) {
  if (x.rank() != 4 || w.rank() != 4 || w.shape()[2] != 4 || w.shape()[3] != 4)
    throw ShapeError("conv2d_down: expects NCHW input and [oc,ic,4,4] weights, got " +
                     shape_str(x.shape()) + " / " + shape_str(w.shape()));
  const int64_t n = x.shape()[0], ic = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  const int64_t oc = w.shape()[0];
  if (w.shape()[1] != ic)
    throw ShapeError("conv2d_down: channel mismatch: input " + shape_str(x.shape()) +
                     " vs weights " + shape_str(w.shape()));
  if (h < 2 || wd < 2 || h % 2 != 0 || wd % 2 != 0)
    throw ShapeError("conv2d_down: spatial dims must be even and >= 2, got " +
                     shape_str(x.shape()));
  const int64_t oh = h / 2, ow = wd / 2, ohw = oh * ow, k = ic * 16;
  TensorT<T> out = detail::make_result<T>({n, oc, oh, ow}, {x, w, b});
  std::vector<T> col(k * ohw);
  for (int64_t i = 0; i < n; ++i) {
    detail::im2col(x.data().data() + i * ic * h * wd, ic, h, wd, col.data());
    T* y = out.data().data() + i * oc * ohw;
    gemm(false, false, oc, ohw, k, T(1), w.data().data(), k, col.data(), ohw,
         T(0), y, ohw);
    for (int64_t c = 0; c < oc; ++c)
      for (int64_t j = 0; j < ohw; ++j) y[c * ohw + j] += b.data()[c];
  }
  // Raw node capture: an owning tensor capture would cycle through the node's
  // own closure and leak the graph (see ops.hpp).
  detail::attach_backward(out, [x, w, b, on = out.node().get(), n, ic, oc, h,
                                wd, oh, ow]() mutable {
    const int64_t ohw = oh * ow, k = ic * 16;
    std::vector<T> col(k * ohw), dcol(k * ohw);
    const auto& g = on->grad;
    for (int64_t i = 0; i < n; ++i) {
      const T* gy = g.data() + i * oc * ohw;
      if (w.requires_grad() || b.requires_grad()) {
        detail::im2col(x.data().data() + i * ic * h * wd, ic, h, wd, col.data());
        if (w.requires_grad())
          gemm(false, true, oc, k, ohw, T(1), gy, ohw, col.data(), ohw, T(1),
               w.grad().data(), k);
        if (b.requires_grad())
          for (int64_t c = 0; c < oc; ++c) {
            T s = 0;
            for (int64_t j = 0; j < ohw; ++j) s += gy[c * ohw + j];
            b.grad()[c] += s;
          }
      }
      if (x.requires_grad()) {
        gemm(true, false, k, ohw, oc, T(1), w.data().data(), k, gy, ohw, T(0),
             dcol.data(), ohw);
        detail::col2im(dcol.data(), ic, h, wd, x.grad().data() + i * ic * h * wd);
      }
    }
  });
  return out;
}

// Transposed 4x4 convolution, doubling spatial dims: the exact adjoint of
// conv2d_down under shared weights.
// x: [n, cc, h, w], w: [cc, fc, 4, 4], b: [fc] -> [n, fc, 2h, 2w].
template <class T>
TensorT<T> conv2d_up(TensorT<T> x, TensorT<T> w, TensorT<T> b) {
  if (x.rank() != 4 || w.rank() != 4 || w.shape()[2] != 4 || w.shape()[3] != 4)
    throw ShapeError("conv2d_up: expects NCHW input and [cc,fc,4,4] weights, got " +
                     shape_str(x.shape()) + " / " + shape_str(w.shape()));
  const int64_t n = x.shape()[0], cc = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  const int64_t fc = w.shape()[1];
  if (w.shape()[0] != cc)
    throw ShapeError("conv2d_up: channel mismatch: input " + shape_str(x.shape()) +
                     " vs weights " + shape_str(w.shape()));
  const int64_t uh = 2 * h, uw = 2 * wd, hw = h * wd, k = fc * 16;
  TensorT<T> out = detail::make_result<T>({n, fc, uh, uw}, {x, w, b});
  std::vector<T> z(k * hw);
  for (int64_t i = 0; i < n; ++i) {
    // z = W^T * x_mat, then scatter with col2im
    gemm(true, false, k, hw, cc, T(1), w.data().data(), k,
         x.data().data() + i * cc * hw, hw, T(0), z.data(), hw);
    T* y = out.data().data() + i * fc * uh * uw;
    detail::col2im(z.data(), fc, uh, uw, y);
    for (int64_t c = 0; c < fc; ++c)
      for (int64_t j = 0; j < uh * uw; ++j) y[c * uh * uw + j] += b.data()[c];
  }
  detail::attach_backward(out, [x, w, b, on = out.node().get(), n, cc, fc, h,
                                wd, uh, uw]() mutable {
    const int64_t hw = h * wd, k = fc * 16;
    std::vector<T> dz(k * hw);
    const auto& g = on->grad;
    for (int64_t i = 0; i < n; ++i) {
      const T* gy = g.data() + i * fc * uh * uw;
      detail::im2col(gy, fc, uh, uw, dz.data());
      if (x.requires_grad())
        gemm(false, false, cc, hw, k, T(1), w.data().data(), k, dz.data(), hw,
             T(1), x.grad().data() + i * cc * hw, hw);
      if (w.requires_grad())
        gemm(false, true, cc, k, hw, T(1), x.data().data() + i * cc * hw, hw,
             dz.data(), hw, T(1), w.grad().data(), k);
      if (b.requires_grad())
        for (int64_t c = 0; c < fc; ++c) {
          T s = 0;
          for (int64_t j = 0; j < uh * uw; ++j) s += gy[c * uh * uw + j];
          b.grad()[c] += s;
        }
    }
  });
  return out;
}

enum class ConvDir { down, up };

// Convolution-layer bundle: 4x4 kernel, stride 2, pad 1, either direction.
template <class T>
struct Conv2dT {
  TensorT<T> w;  // down: [out, in, 4, 4]; up: [in, out, 4, 4]
  TensorT<T> b;  // [out]
  ConvDir dir = ConvDir::down;

  Conv2dT() = default;
  Conv2dT(int64_t in_ch, int64_t out_ch, ConvDir d, Rng& rng, T wstd = T(0.02))
      : dir(d) {
    Shape ws = d == ConvDir::down ? Shape{out_ch, in_ch, 4, 4}
                                  : Shape{in_ch, out_ch, 4, 4};
    w = TensorT<T>::randn(ws, rng, wstd).set_requires_grad();
    b = TensorT<T>::zeros({out_ch}).set_requires_grad();
  }

  TensorT<T> forward(TensorT<T> x) const {
    return dir == ConvDir::down ? conv2d_down(x, w, b) : conv2d_up(x, w, b);
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
  std::vector<TensorT<T>> params() const { return {w, b}; }
};

// Per-channel batch normalization over NCHW.
template <class T>
struct BatchNorm2dT {
  TensorT<T> gamma, beta;
  TensorT<T> running_mean, running_var;  // buffers, not trained
  T momentum = T(0.1);
  T eps = T(1e-5);

  BatchNorm2dT() = default;
  explicit BatchNorm2dT(int64_t channels) {
    gamma = TensorT<T>::filled({channels}, T(1)).set_requires_grad();
    beta = TensorT<T>::zeros({channels}).set_requires_grad();
    running_mean = TensorT<T>::zeros({channels});
    running_var = TensorT<T>::filled({channels}, T(1));
  }

  TensorT<T> forward(TensorT<T> x, bool train) {
    if (x.rank() != 4)
      throw ShapeError("batchnorm: expects NCHW, got " + shape_str(x.shape()));
    const int64_t n = x.shape()[0], c = x.shape()[1];
    const int64_t hw = x.shape()[2] * x.shape()[3];
    if (c != gamma.numel())
      throw ShapeError("batchnorm: channel mismatch: input " +
                       shape_str(x.shape()) + " vs " + shape_str(gamma.shape()));
    if (train && n < 2)
      throw ContractError("batchnorm: train mode requires batch >= 2");
    const int64_t m = n * hw;
    TensorT<T> out = detail::make_result<T>(x.shape(), {x, gamma, beta});
    auto xhat = std::make_shared<std::vector<T>>(x.numel());
    auto invstd = std::make_shared<std::vector<T>>(c);
    for (int64_t ch = 0; ch < c; ++ch) {
      T mu, var;
      if (train) {
        T s = 0;
        for (int64_t i = 0; i < n; ++i) {
          const T* p = x.data().data() + (i * c + ch) * hw;
          for (int64_t j = 0; j < hw; ++j) s += p[j];
        }
        mu = s / static_cast<T>(m);
        T s2 = 0;
        for (int64_t i = 0; i < n; ++i) {
          const T* p = x.data().data() + (i * c + ch) * hw;
          for (int64_t j = 0; j < hw; ++j) s2 += (p[j] - mu) * (p[j] - mu);
        }
        var = s2 / static_cast<T>(m);
        running_mean.data()[ch] =
            (T(1) - momentum) * running_mean.data()[ch] + momentum * mu;
        running_var.data()[ch] =
            (T(1) - momentum) * running_var.data()[ch] + momentum * var;
      } else {
        mu = running_mean.data()[ch];
        var = running_var.data()[ch];
      }
      const T is = T(1) / std::sqrt(var + eps);
      (*invstd)[ch] = is;
      const T gm = gamma.data()[ch], bt = beta.data()[ch];
      for (int64_t i = 0; i < n; ++i) {
        const T* p = x.data().data() + (i * c + ch) * hw;
        T* xh = xhat->data() + (i * c + ch) * hw;
        T* y = out.data().data() + (i * c + ch) * hw;
        for (int64_t j = 0; j < hw; ++j) {
          xh[j] = (p[j] - mu) * is;
          y[j] = gm * xh[j] + bt;
        }
      }
    }
    TensorT<T> x_ = x;
    TensorT<T> gamma_ = gamma, beta_ = beta;
    detail::attach_backward(
        out, [x_, gamma_, beta_, on = out.node().get(), xhat, invstd, n, c, hw,
              m, train]() mutable {
          const auto& g = on->grad;
          for (int64_t ch = 0; ch < c; ++ch) {
            T sum_g = 0, sum_gx = 0;
            for (int64_t i = 0; i < n; ++i) {
              const T* gp = g.data() + (i * c + ch) * hw;
              const T* xh = xhat->data() + (i * c + ch) * hw;
              for (int64_t j = 0; j < hw; ++j) {
                sum_g += gp[j];
                sum_gx += gp[j] * xh[j];
              }
            }
            if (gamma_.requires_grad()) gamma_.grad()[ch] += sum_gx;
            if (beta_.requires_grad()) beta_.grad()[ch] += sum_g;
            if (x_.requires_grad()) {
              const T gm = gamma_.data()[ch], is = (*invstd)[ch];
              T* gx_base = x_.grad().data();
              for (int64_t i = 0; i < n; ++i) {
                const T* gp = g.data() + (i * c + ch) * hw;
                const T* xh = xhat->data() + (i * c + ch) * hw;
                T* gx = gx_base + (i * c + ch) * hw;
                if (train) {
                  const T inv_m = T(1) / static_cast<T>(m);
                  for (int64_t j = 0; j < hw; ++j)
                    gx[j] += gm * is * (gp[j] - inv_m * sum_g - xh[j] * inv_m * sum_gx);
                } else {
                  for (int64_t j = 0; j < hw; ++j) gx[j] += gm * is * gp[j];
                }
              }
            }
          }
        });
    return out;
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
    out.emplace_back(prefix + ".running_mean", running_mean);
    out.emplace_back(prefix + ".running_var", running_var);
  }
  std::vector<TensorT<T>> params() const { return {gamma, beta}; }
};

// Inverted dropout: survivors scaled by 1/(1-rate). Identity when disabled.
template <class T>
TensorT<T> dropout(TensorT<T> x, T rate, Rng& rng, bool enabled = true) {
  if (rate < T(0) || rate >= T(1))
    throw ContractError("dropout: rate must be in [0,1)");
  if (!enabled || rate == T(0)) return x;
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  const T keep = T(1) - rate;
  for (auto& v : *mask) v = rng.bernoulli(keep) ? T(1) / keep : T(0);
  TensorT<T> out = detail::make_result<T>(x.shape(), {x});
  for (int64_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * (*mask)[i];
  detail::attach_backward(out, [x, on = out.node().get(), mask]() mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad();
    const auto& g = on->grad;
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
  return out;
}

// One-layer LSTM cell with separate weights per gate.
template <class T>
struct LstmCellT {
  int64_t in = 0, hidden = 0;
  TensorT<T> wx_i, wh_i, b_i;  // input gate
  TensorT<T> wx_f, wh_f, b_f;  // forget gate
  TensorT<T> wx_o, wh_o, b_o;  // output gate
  TensorT<T> wx_g, wh_g, b_g;  // cell candidate

  LstmCellT() = default;
  LstmCellT(int64_t input_size, int64_t hidden_size, Rng& rng)
      : in(input_size), hidden(hidden_size) {
    const T bx = T(1) / std::sqrt(static_cast<T>(input_size));
    const T bh = T(1) / std::sqrt(static_cast<T>(hidden_size));
    auto mx = [&] { return TensorT<T>::uniform({hidden, in}, rng, -bx, bx).set_requires_grad(); };
    auto mh = [&] { return TensorT<T>::uniform({hidden, hidden}, rng, -bh, bh).set_requires_grad(); };
    auto bv = [&] { return TensorT<T>::zeros({hidden}).set_requires_grad(); };
    wx_i = mx(); wh_i = mh(); b_i = bv();
    wx_f = mx(); wh_f = mh(); b_f = bv();
    wx_o = mx(); wh_o = mh(); b_o = bv();
    wx_g = mx(); wh_g = mh(); b_g = bv();
  }

  // Standard recurrence: c' = f.c + i.g, h' = o.tanh(c').
  std::pair<TensorT<T>, TensorT<T>> step(TensorT<T> x, TensorT<T> h,
                                         TensorT<T> c) const {
    if (x.rank() != 1 || x.shape()[0] != in || h.shape()[0] != hidden ||
        c.shape()[0] != hidden)
      throw ShapeError("lstm_step: width mismatch: x=" + shape_str(x.shape()) +
                       " h=" + shape_str(h.shape()) + " expected in=" +
                       std::to_string(in) + " hidden=" + std::to_string(hidden));
    auto gate = [&](const TensorT<T>& wx, const TensorT<T>& wh,
                    const TensorT<T>& b) {
      return add(add(matmul(wx, x), matmul(wh, h)), b);
    };
    TensorT<T> i = sigmoid(gate(wx_i, wh_i, b_i));
    TensorT<T> f = sigmoid(gate(wx_f, wh_f, b_f));
    TensorT<T> o = sigmoid(gate(wx_o, wh_o, b_o));
    TensorT<T> g = tanh_(gate(wx_g, wh_g, b_g));
    TensorT<T> c_new = add(mul(f, c), mul(i, g));
    TensorT<T> h_new = mul(o, tanh_(c_new));
    return {h_new, c_new};
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    out.emplace_back(prefix + ".wx_i", wx_i); out.emplace_back(prefix + ".wh_i", wh_i);
    out.emplace_back(prefix + ".b_i", b_i);
    out.emplace_back(prefix + ".wx_f", wx_f); out.emplace_back(prefix + ".wh_f", wh_f);
    out.emplace_back(prefix + ".b_f", b_f);
    out.emplace_back(prefix + ".wx_o", wx_o); out.emplace_back(prefix + ".wh_o", wh_o);
    out.emplace_back(prefix + ".b_o", b_o);
    out.emplace_back(prefix + ".wx_g", wx_g); out.emplace_back(prefix + ".wh_g", wh_g);
    out.emplace_back(prefix + ".b_g", b_g);
  }
  std::vector<TensorT<T>> params() const {
    return {wx_i, wh_i, b_i, wx_f, wh_f, b_f, wx_o, wh_o, b_o, wx_g, wh_g, b_g};
  }
};

// Two-layer perceptron with one 1024-unit ReLU hidden layer.
template <class T>
struct MlpT {
  static constexpr int64_t kHidden = 1024;
  TensorT<T> w1, b1, w2, b2;
  int64_t in = 0, out_width = 0;

  MlpT() = default;
  MlpT(int64_t input_size, int64_t output_size, Rng& rng)
      : in(input_size), out_width(output_size) {
    const T s1 = T(1) / std::sqrt(static_cast<T>(input_size));
    const T s2 = T(1) / std::sqrt(static_cast<T>(kHidden));
    w1 = TensorT<T>::uniform({kHidden, in}, rng, -s1, s1).set_requires_grad();
    b1 = TensorT<T>::zeros({kHidden}).set_requires_grad();
    w2 = TensorT<T>::uniform({out_width, kHidden}, rng, -s2, s2).set_requires_grad();
    b2 = TensorT<T>::zeros({out_width}).set_requires_grad();
  }

  TensorT<T> forward(TensorT<T> x) const {
    if (x.rank() != 1 || x.shape()[0] != in)
      throw ShapeError("mlp_forward: input " + shape_str(x.shape()) +
                       " does not match width " + std::to_string(in));
    return linear(relu(linear(x, w1, b1)), w2, b2);
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    out.emplace_back(prefix + ".w1", w1);
    out.emplace_back(prefix + ".b1", b1);
    out.emplace_back(prefix + ".w2", w2);
    out.emplace_back(prefix + ".b2", b2);
  }
  std::vector<TensorT<T>> params() const { return {w1, b1, w2, b2}; }
};

using Conv2d = Conv2dT<float>;
using BatchNorm2d = BatchNorm2dT<float>;
using LstmCell = LstmCellT<float>;
using Mlp = MlpT<float>;
using NamedTensors = NamedTensorsT<float>;

}  // namespace mcgan
