#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mcgan/blas.hpp"
#include "mcgan/tensor.hpp"

namespace mcgan {

namespace detail {

// Broadcasting is limited to singleton dimensions of one operand (or a scalar
// operand); the result always takes the full shape of the other.
inline bool bcast_onto(const Shape& from, const Shape& onto) {
  if (from.empty()) return true;  // scalar
  if (from.size() != onto.size()) return false;
  for (size_t d = 0; d < from.size(); ++d)
    if (from[d] != onto[d] && from[d] != 1) return false;
  return true;
}

// Strides of `in` aligned to the result shape, 0 on broadcast dims.
inline std::vector<int64_t> bcast_strides(const Shape& in, const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  if (in.empty()) return st;
  int64_t s = 1;
  for (int64_t d = static_cast<int64_t>(in.size()) - 1; d >= 0; --d) {
    st[d] = (in[d] == 1 && out[d] != 1) ? 0 : s;
    s *= in[d];
  }
  return st;
}

inline int64_t bcast_index(int64_t idx, const Shape& out,
                           const std::vector<int64_t>& st) {
  int64_t r = 0;
  for (int64_t d = static_cast<int64_t>(out.size()) - 1; d >= 0; --d) {
    int64_t c = idx % out[d];
    idx /= out[d];
    r += c * st[d];
  }
  return r;
}

template <class T>
std::pair<Shape, bool> binary_result_shape(const TensorT<T>& a,
                                           const TensorT<T>& b,
                                           const char* op) {
  if (a.shape() == b.shape()) return {a.shape(), false};
  if (bcast_onto(b.shape(), a.shape())) return {a.shape(), true};
  if (bcast_onto(a.shape(), b.shape())) return {b.shape(), true};
  throw ShapeError(std::string(op) + ": shapes not conformable: " +
                   shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <class T, class Fwd, class BwdA, class BwdB>
TensorT<T> binary_elementwise(TensorT<T> a, TensorT<T> b, const char* name,
                              Fwd fwd, BwdA bwd_a, BwdB bwd_b) {
  auto [rs, bc] = detail::binary_result_shape(a, b, name);
  TensorT<T> out = detail::make_result<T>(rs, {a, b});
  const int64_t n = out.numel();
  auto& od = out.data();
  if (!bc) {
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (int64_t i = 0; i < n; ++i) od[i] = fwd(ad[i], bd[i]);
  } else {
    auto sa = detail::bcast_strides(a.shape(), rs);
    auto sb = detail::bcast_strides(b.shape(), rs);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (int64_t i = 0; i < n; ++i)
      od[i] = fwd(ad[detail::bcast_index(i, rs, sa)],
                  bd[detail::bcast_index(i, rs, sb)]);
  }
  // Closures capture the raw output node, not the tensor: an owning capture
  // would form a shared_ptr cycle (node -> closure -> tensor -> node) and leak
  // every graph ever built. The node outlives its own closure by construction.
  detail::attach_backward(out, [a, b, on = out.node().get(), rs = rs, bc,
                                bwd_a, bwd_b]() mutable {
    const auto& g = on->grad;
    const int64_t n = static_cast<int64_t>(on->data.size());
    auto sa = detail::bcast_strides(a.shape(), rs);
    auto sb = detail::bcast_strides(b.shape(), rs);
    if (a.requires_grad()) {
      auto& ga = a.grad();
      for (int64_t i = 0; i < n; ++i) {
        int64_t ia = bc ? detail::bcast_index(i, rs, sa) : i;
        int64_t ib = bc ? detail::bcast_index(i, rs, sb) : i;
        ga[ia] += g[i] * bwd_a(a.data()[ia], b.data()[ib]);
      }
    }
    if (b.requires_grad()) {
      auto& gb = b.grad();
      for (int64_t i = 0; i < n; ++i) {
        int64_t ia = bc ? detail::bcast_index(i, rs, sa) : i;
        int64_t ib = bc ? detail::bcast_index(i, rs, sb) : i;
        gb[ib] += g[i] * bwd_b(a.data()[ia], b.data()[ib]);
      }
    }
  });
  return out;
}

template <class T>
TensorT<T> add(TensorT<T> a, TensorT<T> b) {
  return binary_elementwise(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
TensorT<T> sub(TensorT<T> a, TensorT<T> b) {
  return binary_elementwise(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <class T>
TensorT<T> mul(TensorT<T> a, TensorT<T> b) {
  return binary_elementwise(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <class T, class Fwd, class Bwd>
TensorT<T> unary_elementwise(TensorT<T> x, Fwd fwd, Bwd dydx_from_in_out) {
  TensorT<T> out = detail::make_result<T>(x.shape(), {x});
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = fwd(x.data()[i]);
  detail::attach_backward(out, [x, on = out.node().get(),
                                dydx_from_in_out]() mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad();
    const auto& g = on->grad;
    for (int64_t i = 0; i < x.numel(); ++i)
      gx[i] += g[i] * dydx_from_in_out(x.data()[i], on->data[i]);
  });
  return out;
}

template <class T>
TensorT<T> neg(TensorT<T> x) {
  return unary_elementwise(
      x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <class T>
TensorT<T> scale(TensorT<T> x, T c) {
  return unary_elementwise(
      x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <class T>
TensorT<T> add_scalar(TensorT<T> x, T c) {
  return unary_elementwise(
      x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <class T>
TensorT<T> tanh_(TensorT<T> x) {
  return unary_elementwise(
      x, [](T v) { return std::tanh(v); },
      [](T, T y) { return T(1) - y * y; });
}

template <class T>
TensorT<T> sigmoid(TensorT<T> x) {
  return unary_elementwise(
      x,
      [](T v) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                         : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
TensorT<T> relu(TensorT<T> x) {
  return unary_elementwise(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
TensorT<T> log_(TensorT<T> x) {
  return unary_elementwise(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
TensorT<T> abs_(TensorT<T> x) {
  return unary_elementwise(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

// 2D x 2D, 2D x 1D and 1D x 2D contractions, backed by gemm.
template <class T>
TensorT<T> matmul(TensorT<T> a, TensorT<T> b) {
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  if ((a.rank() != 2 && !a_vec) || (b.rank() != 2 && !b_vec) ||
      (a_vec && b_vec))
    throw ShapeError("matmul: unsupported ranks " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  const int64_t m = a_vec ? 1 : a.shape()[0];
  const int64_t k = a_vec ? a.shape()[0] : a.shape()[1];
  const int64_t k2 = b_vec ? b.shape()[0] : b.shape()[0];
  const int64_t n = b_vec ? 1 : b.shape()[1];
  if (k != k2)
    throw ShapeError("matmul: inner dimensions differ: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Shape rs;
  if (a_vec)
    rs = {n};
  else if (b_vec)
    rs = {m};
  else
    rs = {m, n};
  TensorT<T> out = detail::make_result<T>(rs, {a, b});
  gemm(false, false, m, n, k, T(1), a.data().data(), k, b.data().data(), n,
       T(0), out.data().data(), n);
  detail::attach_backward(out, [a, b, on = out.node().get(), m, n, k]() mutable {
    const T* g = on->grad.data();
    if (a.requires_grad()) {
      // dA = dC * B^T
      gemm(false, true, m, k, n, T(1), g, n, b.data().data(), n, T(1),
           a.grad().data(), k);
    }
    if (b.requires_grad()) {
      // dB = A^T * dC
      gemm(true, false, k, n, m, T(1), a.data().data(), k, g, n, T(1),
           b.grad().data(), n);
    }
  });
  return out;
}

template <class T>
TensorT<T> outer(TensorT<T> a, TensorT<T> b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw ShapeError("outer: requires two rank-1 inputs, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int64_t m = a.shape()[0], n = b.shape()[0];
  TensorT<T> out = detail::make_result<T>({m, n}, {a, b});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.data()[i * n + j] = a.data()[i] * b.data()[j];
  detail::attach_backward(out, [a, b, on = out.node().get(), m, n]() mutable {
    const auto& g = on->grad;
    if (a.requires_grad())
      for (int64_t i = 0; i < m; ++i) {
        T s = 0;
        for (int64_t j = 0; j < n; ++j) s += g[i * n + j] * b.data()[j];
        a.grad()[i] += s;
      }
    if (b.requires_grad())
      for (int64_t j = 0; j < n; ++j) {
        T s = 0;
        for (int64_t i = 0; i < m; ++i) s += g[i * n + j] * a.data()[i];
        b.grad()[j] += s;
      }
  });
  return out;
}

// Numerically stable softmax over a rank-1 tensor.
template <class T>
TensorT<T> softmax(TensorT<T> v) {
  if (v.rank() != 1)
    throw ShapeError("softmax: requires a rank-1 input, got " +
                     shape_str(v.shape()));
  for (T x : v.data())
    if (std::isnan(x)) throw NumericError("softmax: NaN in input");
  const int64_t n = v.numel();
  TensorT<T> out = detail::make_result<T>(v.shape(), {v});
  T mx = *std::max_element(v.data().begin(), v.data().end());
  T z = 0;
  for (int64_t i = 0; i < n; ++i) {
    out.data()[i] = std::exp(v.data()[i] - mx);
    z += out.data()[i];
  }
  for (int64_t i = 0; i < n; ++i) out.data()[i] /= z;
  detail::attach_backward(out, [v, on = out.node().get(), n]() mutable {
    if (!v.requires_grad()) return;
    const auto& y = on->data;
    const auto& g = on->grad;
    T dot = 0;
    for (int64_t i = 0; i < n; ++i) dot += g[i] * y[i];
    auto& gv = v.grad();
    for (int64_t i = 0; i < n; ++i) gv[i] += y[i] * (g[i] - dot);
  });
  return out;
}

template <class T>
TensorT<T> sum(TensorT<T> x) {
  TensorT<T> out = detail::make_result<T>({}, {x});
  T s = 0;
  for (T v : x.data()) s += v;
  out.data()[0] = s;
  detail::attach_backward(out, [x, on = out.node().get()]() mutable {
    if (!x.requires_grad()) return;
    T g = on->grad[0];
    for (auto& v : x.grad()) v += g;
  });
  return out;
}

template <class T>
TensorT<T> mean(TensorT<T> x) {
  const T n = static_cast<T>(x.numel());
  return scale(sum(x), T(1) / n);
}

// Mean over the spatial dimensions of an NCHW tensor -> [N, C].
template <class T>
TensorT<T> spatial_mean(TensorT<T> x) {
  if (x.rank() != 4)
    throw ShapeError("spatial_mean: expects NCHW, got " + shape_str(x.shape()));
  const int64_t n = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  TensorT<T> out = detail::make_result<T>({n, c}, {x});
  for (int64_t i = 0; i < n * c; ++i) {
    T s = 0;
    const T* p = x.data().data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) s += p[j];
    out.data()[i] = s / static_cast<T>(hw);
  }
  detail::attach_backward(out, [x, on = out.node().get(), n, c, hw]() mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad();
    const auto& g = on->grad;
    for (int64_t i = 0; i < n * c; ++i) {
      T gi = g[i] / static_cast<T>(hw);
      T* p = gx.data() + i * hw;
      for (int64_t j = 0; j < hw; ++j) p[j] += gi;
    }
  });
  return out;
}

template <class T>
TensorT<T> reshape(TensorT<T> x, Shape s) {
  if (shape_numel(s) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(s));
  TensorT<T> out = detail::make_result<T>(s, {x});
  out.data() = x.data();
  detail::attach_backward(out, [x, on = out.node().get()]() mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad();
    const auto& g = on->grad;
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
  return out;
}

// Concatenation of two tensors along `dim`; all other dims must match.
template <class T>
TensorT<T> concat(TensorT<T> a, TensorT<T> b, int64_t dim) {
  if (a.rank() != b.rank() || dim < 0 || dim >= a.rank())
    throw ShapeError("concat: rank mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  for (int64_t d = 0; d < a.rank(); ++d)
    if (d != dim && a.shape()[d] != b.shape()[d])
      throw ShapeError("concat: shapes differ off-axis: " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Shape rs = a.shape();
  rs[dim] += b.shape()[dim];
  int64_t outer_n = 1, inner = 1;
  for (int64_t d = 0; d < dim; ++d) outer_n *= rs[d];
  for (int64_t d = dim + 1; d < a.rank(); ++d) inner *= rs[d];
  const int64_t wa = a.shape()[dim] * inner, wb = b.shape()[dim] * inner;
  TensorT<T> out = detail::make_result<T>(rs, {a, b});
  for (int64_t o = 0; o < outer_n; ++o) {
    std::copy_n(a.data().data() + o * wa, wa, out.data().data() + o * (wa + wb));
    std::copy_n(b.data().data() + o * wb, wb,
                out.data().data() + o * (wa + wb) + wa);
  }
  detail::attach_backward(out, [a, b, on = out.node().get(), outer_n, wa,
                                wb]() mutable {
    const auto& g = on->grad;
    if (a.requires_grad()) {
      auto& ga = a.grad();
      for (int64_t o = 0; o < outer_n; ++o)
        for (int64_t i = 0; i < wa; ++i) ga[o * wa + i] += g[o * (wa + wb) + i];
    }
    if (b.requires_grad()) {
      auto& gb = b.grad();
      for (int64_t o = 0; o < outer_n; ++o)
        for (int64_t i = 0; i < wb; ++i)
          gb[o * wb + i] += g[o * (wa + wb) + wa + i];
    }
  });
  return out;
}

// Select index i along dim 0, dropping that dimension.
template <class T>
TensorT<T> slice0(TensorT<T> x, int64_t i) {
  if (x.rank() < 1 || i < 0 || i >= x.shape()[0])
    throw ShapeError("slice0: index " + std::to_string(i) +
                     " out of range for " + shape_str(x.shape()));
  Shape rs(x.shape().begin() + 1, x.shape().end());
  const int64_t w = shape_numel(rs);
  TensorT<T> out = detail::make_result<T>(rs, {x});
  std::copy_n(x.data().data() + i * w, w, out.data().data());
  detail::attach_backward(out, [x, on = out.node().get(), i, w]() mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad();
    const auto& g = on->grad;
    for (int64_t j = 0; j < w; ++j) gx[i * w + j] += g[j];
  });
  return out;
}

// Stack equally shaped tensors into a new leading dimension.
template <class T>
TensorT<T> stack0(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw ShapeError("stack0: empty input");
  Shape rs = parts[0].shape();
  for (const auto& p : parts)
    if (p.shape() != rs)
      throw ShapeError("stack0: shapes differ: " + shape_str(rs) + " vs " +
                       shape_str(p.shape()));
  const int64_t w = shape_numel(rs);
  rs.insert(rs.begin(), static_cast<int64_t>(parts.size()));
  TensorT<T> out = detail::make_result<T>(rs, parts);
  for (size_t i = 0; i < parts.size(); ++i)
    std::copy_n(parts[i].data().data(), w, out.data().data() + i * w);
  detail::attach_backward(out, [parts, on = out.node().get(), w]() mutable {
    const auto& g = on->grad;
    for (size_t i = 0; i < parts.size(); ++i) {
      auto p = parts[i];
      if (!p.requires_grad()) continue;
      auto& gp = p.grad();
      for (int64_t j = 0; j < w; ++j) gp[j] += g[i * w + j];
    }
  });
  return out;
}

// y = W x + b for a rank-1 x; W is [out, in].
template <class T>
TensorT<T> linear(TensorT<T> x, TensorT<T> w, TensorT<T> b) {
  if (x.rank() != 1 || w.rank() != 2 || w.shape()[1] != x.shape()[0])
    throw ShapeError("linear: incompatible shapes W=" + shape_str(w.shape()) +
                     " x=" + shape_str(x.shape()));
  return add(matmul(w, x), b);
}

}  // namespace mcgan
