#include <doctest.h>

#include "mcgan/memory.hpp"
#include "mcgan/verify.hpp"

using namespace mcgan;

TEST_CASE("patch_grid pools and orders patches raster-wise") {
  // 16x16 identity case: pooling is 1:1, patch p row r holds the 4x4 block
  Tensor o = Tensor::zeros({16, 16});
  for (int64_t y = 0; y < 16; ++y)
    for (int64_t x = 0; x < 16; ++x) o.data()[y * 16 + x] = y * 16 + x;
  Tensor p = patch_grid(o);
  CHECK(p.shape() == Shape{16, 16});
  // patch 5 = block row 1, col 1; its first value is pixel (4,4)
  CHECK(p.data()[5 * 16 + 0] == doctest::Approx(4 * 16 + 4));
  // last patch, last value = pixel (15,15)
  CHECK(p.data()[255] == doctest::Approx(255));
  CHECK_THROWS_AS(patch_grid(Tensor::zeros({8, 8})), ShapeError);
}

TEST_CASE("patch_grid averages pooling bins for larger maps") {
  Tensor o = Tensor::filled({32, 32}, 3.0f);
  Tensor p = patch_grid(o);
  for (float v : p.data()) CHECK(v == doctest::Approx(3.0));
}

TEST_CASE("embed_output is 100-wide and zero for zero controllers") {
  Rng rng(31);
  MemoryController ctrl(MemoryConfig{8, 100}, rng);
  MemoryState st(MemoryConfig{8, 100}, "s");
  Tensor o = Tensor::uniform({24, 24}, rng, -1, 1);
  CHECK(embed_output(ctrl, st, o).shape() == Shape{100});

  for (auto& p : ctrl.params())
    std::fill(p.data().begin(), p.data().end(), 0.0f);
  MemoryState st2(MemoryConfig{8, 100}, "s");
  Tensor e = embed_output(ctrl, st2, o);
  for (float v : e.data()) CHECK(v == 0.0f);
}

TEST_CASE("embed_output is sensitive to the last raster patch") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    MemoryController ctrl(MemoryConfig{4, 100}, rng);
    Tensor a = Tensor::uniform({16, 16}, rng, -1, 1);
    Tensor b = a.detach();
    b = Tensor::from({16, 16}, b.data());
    b.data()[15 * 16 + 15] += 1.0f;  // inside the last 4x4 patch
    MemoryState s1(MemoryConfig{4, 100}, "s"), s2(MemoryConfig{4, 100}, "s");
    Tensor e1 = embed_output(ctrl, s1, a), e2 = embed_output(ctrl, s2, b);
    bool differs = false;
    for (int64_t i = 0; i < 100; ++i) differs |= e1.data()[i] != e2.data()[i];
    CHECK(differs);
  }
}

TEST_CASE("read on zero memory gives uniform attention and zero retrieval") {
  Rng rng(32);
  MemoryState st(MemoryConfig{5, 100}, "s");
  auto [a, h] = memory_read(st, Tensor::uniform({100}, rng, -1, 1));
  for (float v : a.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-6));
  for (float v : h.data()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(memory_read(st, Tensor::zeros({99})), ShapeError);
}

TEST_CASE("read attends near one-hot to a dominant matching slot") {
  Rng rng(33);
  Tensor o = Tensor::uniform({100}, rng, -1, 1);
  MemoryState st(MemoryConfig{3, 100}, "s");
  // slot 1 = o scaled large; others stay zero (orthogonal in dot product)
  for (int64_t j = 0; j < 100; ++j)
    st.M.data()[1 * 100 + j] = 5.0f * o.data()[j];
  auto [a, h] = memory_read(st, o);
  CHECK(a.data()[1] > 0.999f);
  for (int64_t j = 0; j < 100; ++j)
    CHECK(h.data()[j] ==
          doctest::Approx(st.M.data()[100 + j]).epsilon(1e-3));
}

TEST_CASE("retrieval is in the convex hull of slot rows") {
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    MemoryState st(MemoryConfig{4, 100}, "s");
    st.M = Tensor::uniform({4, 100}, rng, -2, 2);
    auto [a, h] = memory_read(st, Tensor::uniform({100}, rng, -2, 2));
    for (int64_t j = 0; j < 100; ++j) {
      float lo = st.M.data()[j], hi = st.M.data()[j];
      for (int64_t i = 1; i < 4; ++i) {
        lo = std::min(lo, st.M.data()[i * 100 + j]);
        hi = std::max(hi, st.M.data()[i * 100 + j]);
      }
      CHECK(h.data()[j] >= lo - 1e-5f);
      CHECK(h.data()[j] <= hi + 1e-5f);
    }
  }
}

TEST_CASE("update_memory hand example and edge attentions") {
  Tensor M = Tensor::from({2, 2}, {0, 2, 4, 6});
  Tensor m_w = Tensor::from({2}, {1, 1});

  Tensor u = update_memory(M, Tensor::from({2}, {0.5f, 0.5f}), m_w);
  CHECK(u.data() == std::vector<float>{0.5f, 1.5f, 2.5f, 3.5f});

  Tensor one_hot = Tensor::from({2}, {0, 1});
  Tensor u2 = update_memory(M, one_hot, m_w);
  CHECK(u2.data() == std::vector<float>{0, 2, 1, 1});

  Tensor u3 = update_memory(M, Tensor::zeros({2}), m_w);
  CHECK(u3.data() == M.data());

  CHECK_THROWS_AS(update_memory(M, Tensor::zeros({3}), m_w), ShapeError);
  CHECK_THROWS_AS(update_memory(M, one_hot, Tensor::zeros({3})), ShapeError);
}

TEST_CASE("memory_step composition equals calling the five ops in sequence") {
  Rng rng(35);
  MemoryController ctrl(MemoryConfig{4, 100}, rng);
  Tensor o = Tensor::uniform({16, 16}, rng, -1, 1);

  MemoryState st(MemoryConfig{4, 100}, "s");
  st.M = Tensor::uniform({4, 100}, rng, -1, 1);
  MemoryState st2 = st;

  MemoryReadout r = memory_step(ctrl, st, o);

  Tensor e = embed_output(ctrl, st2, o);
  auto [a, h] = memory_read(st2, e);
  Tensor m = memory_retrieve(ctrl, e, h);
  Tensor w = memory_write(ctrl, st2, m);
  Tensor g = tanh_(m);
  st2.M = update_memory(st2.M, a, w);

  CHECK(r.o_emb.data() == e.data());
  CHECK(r.attention.data() == a.data());
  CHECK(r.retrieved.data() == h.data());
  CHECK(r.state.data() == m.data());
  CHECK(r.written.data() == w.data());
  CHECK(r.gate.data() == g.data());
  CHECK(st.M.data() == st2.M.data());
}

TEST_CASE("a step changes the memory for random weights") {
  Rng rng(36);
  MemoryController ctrl(MemoryConfig{4, 100}, rng);
  MemoryState st(MemoryConfig{4, 100}, "s");
  st.M = Tensor::uniform({4, 100}, rng, -1, 1);
  Tensor before = st.M;
  memory_step(ctrl, st, Tensor::uniform({16, 16}, rng, -1, 1));
  bool changed = false;
  for (int64_t i = 0; i < before.numel(); ++i)
    changed |= st.M.data()[i] != before.data()[i];
  CHECK(changed);
}

TEST_CASE("reset zeroes everything and is idempotent") {
  Rng rng(37);
  MemoryController ctrl(MemoryConfig{4, 100}, rng);
  MemoryState st(MemoryConfig{4, 100}, "s");
  memory_step(ctrl, st, Tensor::uniform({16, 16}, rng, -1, 1));
  st.reset();
  MemoryState fresh(MemoryConfig{4, 100}, "s");
  CHECK(st.M.data() == fresh.M.data());
  CHECK(st.read_h.data() == fresh.read_h.data());
  CHECK(st.last_ordinal == -1);
  st.reset();
  CHECK(st.M.data() == fresh.M.data());

  // two freshly reset states produce identical readouts
  MemoryState s1(MemoryConfig{4, 100}, "a"), s2(MemoryConfig{4, 100}, "b");
  Tensor o = Tensor::uniform({16, 16}, rng, -1, 1);
  MemoryReadout r1 = memory_step(ctrl, s1, o);
  MemoryReadout r2 = memory_step(ctrl, s2, o);
  CHECK(r1.gate.data() == r2.gate.data());
  CHECK(s1.M.data() == s2.M.data());
}

TEST_CASE("memory invariant suite passes") {
  VerifyReport rep = verify_memory();
  for (const auto& c : rep.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}
