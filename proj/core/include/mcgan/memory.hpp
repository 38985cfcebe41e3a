#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mcgan/nn.hpp"
#include "mcgan/ops.hpp"

namespace mcgan {

// Pools a saliency-sized map to a 16x16 grid and emits its 16 raster-order
// 4x4 patches as rows of a [16, 16] matrix. This is how an image enters the
// read LSTM: one patch vector per timestep.
template <class T>
TensorT<T> patch_grid(TensorT<T> o) {
  Shape s = o.shape();
  if (s.size() == 3 && s[0] == 1) s = {s[1], s[2]};
  if (s.size() != 2)
    throw ShapeError("patch_grid: expects [h,w] or [1,h,w], got " +
                     shape_str(o.shape()));
  const int64_t h = s[0], w = s[1];
  if (h < 16 || w < 16)
    throw ShapeError("patch_grid: map must be at least 16x16, got " +
                     shape_str(o.shape()));
  // pooled(py,px) = mean over bin [py*h/16,(py+1)*h/16) x [px*w/16,(px+1)*w/16)
  TensorT<T> out = detail::make_result<T>({16, 16}, {o});
  for (int64_t py = 0; py < 16; ++py) {
    const int64_t y0 = py * h / 16, y1 = (py + 1) * h / 16;
    for (int64_t px = 0; px < 16; ++px) {
      const int64_t x0 = px * w / 16, x1 = (px + 1) * w / 16;
      T acc = 0;
      for (int64_t y = y0; y < y1; ++y)
        for (int64_t x = x0; x < x1; ++x) acc += o.data()[y * w + x];
      const T v = acc / static_cast<T>((y1 - y0) * (x1 - x0));
      const int64_t patch = (py / 4) * 4 + (px / 4);
      const int64_t within = (py % 4) * 4 + (px % 4);
      out.data()[patch * 16 + within] = v;
    }
  }
  detail::attach_backward(out, [o, on = out.node().get(), h, w]() mutable {
    if (!o.requires_grad()) return;
    auto& go = o.grad();
    const auto& g = on->grad;
    for (int64_t py = 0; py < 16; ++py) {
      const int64_t y0 = py * h / 16, y1 = (py + 1) * h / 16;
      for (int64_t px = 0; px < 16; ++px) {
        const int64_t x0 = px * w / 16, x1 = (px + 1) * w / 16;
        const int64_t patch = (py / 4) * 4 + (px / 4);
        const int64_t within = (py % 4) * 4 + (px % 4);
        const T gv = g[patch * 16 + within] /
                     static_cast<T>((y1 - y0) * (x1 - x0));
        for (int64_t y = y0; y < y1; ++y)
          for (int64_t x = x0; x < x1; ++x) go[y * w + x] += gv;
      }
    }
  });
  return out;
}

struct MemoryConfig {
  int64_t slots = 32;       // k
  int64_t width = 100;      // l, fixed by the 100-unit LSTM embedding
};

// Learnable pieces of the memory: patch projection, read LSTM, retrieval MLP
// and write LSTM. Shared across all subject streams.
template <class T>
struct MemoryControllerT {
  MemoryConfig cfg;
  TensorT<T> patch_w, patch_b;  // 16 -> width projection of each patch
  LstmCellT<T> read_lstm;
  MlpT<T> mlp;                  // [width + width] -> width
  LstmCellT<T> write_lstm;

  MemoryControllerT() = default;
  MemoryControllerT(MemoryConfig c, Rng& rng) : cfg(c) {
    const T s = T(1) / T(4);  // 1/sqrt(16)
    patch_w = TensorT<T>::uniform({cfg.width, 16}, rng, -s, s).set_requires_grad();
    patch_b = TensorT<T>::zeros({cfg.width}).set_requires_grad();
    read_lstm = LstmCellT<T>(cfg.width, cfg.width, rng);
    mlp = MlpT<T>(2 * cfg.width, cfg.width, rng);
    write_lstm = LstmCellT<T>(cfg.width, cfg.width, rng);
  }

  void collect(const std::string& prefix, NamedTensorsT<T>& out) const {
    out.emplace_back(prefix + ".patch_w", patch_w);
    out.emplace_back(prefix + ".patch_b", patch_b);
    read_lstm.collect(prefix + ".read_lstm", out);
    mlp.collect(prefix + ".mlp", out);
    write_lstm.collect(prefix + ".write_lstm", out);
  }
  std::vector<TensorT<T>> params() const {
    std::vector<TensorT<T>> p{patch_w, patch_b};
    for (auto& t : read_lstm.params()) p.push_back(t);
    for (auto& t : mlp.params()) p.push_back(t);
    for (auto& t : write_lstm.params()) p.push_back(t);
    return p;
  }
};

// Per-subject memory: the k x l slot matrix plus both LSTM carries.
template <class T>
struct MemoryStateT {
  TensorT<T> M;                    // [k, l]
  TensorT<T> read_h, read_c;       // [l]
  TensorT<T> write_h, write_c;     // [l]
  std::string subject_id;
  int64_t last_ordinal = -1;

  MemoryStateT() = default;
  MemoryStateT(const MemoryConfig& cfg, std::string subject)
      : M(TensorT<T>::zeros({cfg.slots, cfg.width})),
        read_h(TensorT<T>::zeros({cfg.width})),
        read_c(TensorT<T>::zeros({cfg.width})),
        write_h(TensorT<T>::zeros({cfg.width})),
        write_c(TensorT<T>::zeros({cfg.width})),
        subject_id(std::move(subject)) {}

  void reset() {
    auto zero = [](TensorT<T>& t) {
      std::fill(t.data().begin(), t.data().end(), T(0));
      t = t.detach();
    };
    zero(M);
    zero(read_h);
    zero(read_c);
    zero(write_h);
    zero(write_c);
    last_ordinal = -1;
  }

  // Drops the recorded history while keeping the carried values. Called at
  // optimizer-step boundaries so gradients do not flow across examples.
  void detach() {
    M = M.detach();
    read_h = read_h.detach();
    read_c = read_c.detach();
    write_h = write_h.detach();
    write_c = write_c.detach();
  }
};

// All intermediate signals of one memory step.
template <class T>
struct MemoryReadoutT {
  TensorT<T> o_emb;      // embedded generator output, [l]
  TensorT<T> attention;  // a_t, [k], probability vector
  TensorT<T> retrieved;  // h_t, [l]
  TensorT<T> state;      // m_t, [l]
  TensorT<T> written;    // m'_t (write LSTM output), [l]
  TensorT<T> gate;       // tanh(m_t), [l]
};

// Embeds a generator output: pool to 16x16, project each of the 16 patches
// to `width` dims, and run them through the read LSTM from the stream carry.
// The carry is advanced in place; the final hidden state is returned.
template <class T>
TensorT<T> embed_output(const MemoryControllerT<T>& ctrl, MemoryStateT<T>& state,
                        TensorT<T> o) {
  TensorT<T> patches = patch_grid(o);  // [16 patches, 16 values]
  TensorT<T> h = state.read_h, c = state.read_c;
  for (int64_t p = 0; p < 16; ++p) {
    TensorT<T> x = linear(slice0(patches, p), ctrl.patch_w, ctrl.patch_b);
    auto hc = ctrl.read_lstm.step(x, h, c);
    h = hc.first;
    c = hc.second;
  }
  state.read_h = h;
  state.read_c = c;
  return h;
}

// Attention over slots (dot-product similarity) and the weighted retrieval.
template <class T>
std::pair<TensorT<T>, TensorT<T>> memory_read(const MemoryStateT<T>& state,
                                              TensorT<T> o_emb) {
  if (o_emb.rank() != 1 || o_emb.shape()[0] != state.M.shape()[1])
    throw ShapeError("memory_read: embedding " + shape_str(o_emb.shape()) +
                     " does not match slot width of " +
                     shape_str(state.M.shape()));
  TensorT<T> a = softmax(matmul(state.M, o_emb));
  TensorT<T> h = matmul(a, state.M);
  return {a, h};
}

template <class T>
TensorT<T> memory_retrieve(const MemoryControllerT<T>& ctrl, TensorT<T> o_emb,
                           TensorT<T> h) {
  return ctrl.mlp.forward(concat(o_emb, h, 0));
}

// One step of the write LSTM on m_t; advances the write carry in place.
template <class T>
TensorT<T> memory_write(const MemoryControllerT<T>& ctrl,
                        MemoryStateT<T>& state, TensorT<T> m) {
  auto hc = ctrl.write_lstm.step(m, state.write_h, state.write_c);
  state.write_h = hc.first;
  state.write_c = hc.second;
  return hc.first;
}

// Per-slot interpolation: M[i] <- (1 - a[i]) * M[i] + a[i] * m_written.
template <class T>
TensorT<T> update_memory(TensorT<T> M, TensorT<T> a, TensorT<T> m_written) {
  const int64_t k = M.shape()[0];
  if (a.rank() != 1 || a.shape()[0] != k)
    throw ShapeError("update_memory: attention " + shape_str(a.shape()) +
                     " does not match " + shape_str(M.shape()));
  if (m_written.rank() != 1 || m_written.shape()[0] != M.shape()[1])
    throw ShapeError("update_memory: write vector " +
                     shape_str(m_written.shape()) + " does not match " +
                     shape_str(M.shape()));
  TensorT<T> keep = reshape(add_scalar(neg(a), T(1)), {k, 1});
  return add(mul(M, keep), outer(a, m_written));
}

// Full memory step: embed -> read -> retrieve -> write -> update.
// Returns the readout (including the tanh gate); the state is advanced in
// place unless update_state is false (read-only querying).
template <class T>
MemoryReadoutT<T> memory_step(const MemoryControllerT<T>& ctrl,
                              MemoryStateT<T>& state, TensorT<T> o,
                              bool update_state = true) {
  MemoryStateT<T> scratch = state;
  MemoryStateT<T>& st = update_state ? state : scratch;
  MemoryReadoutT<T> r;
  r.o_emb = embed_output(ctrl, st, o);
  auto ah = memory_read(st, r.o_emb);
  r.attention = ah.first;
  r.retrieved = ah.second;
  r.state = memory_retrieve(ctrl, r.o_emb, r.retrieved);
  r.written = memory_write(ctrl, st, r.state);
  r.gate = tanh_(r.state);
  st.M = update_memory(st.M, r.attention, r.written);
  return r;
}

using MemoryController = MemoryControllerT<float>;
using MemoryState = MemoryStateT<float>;
using MemoryReadout = MemoryReadoutT<float>;

}  // namespace mcgan
