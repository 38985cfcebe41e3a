#include <doctest.h>

#include "mcgan/networks.hpp"

using namespace mcgan;

TEST_CASE("condition_input appends one-hot planes") {
  Tensor x = Tensor::filled({2, 3, 4, 4}, 0.5f);
  Tensor c = condition_input(x, {0, 1}, 2);
  CHECK(c.shape() == Shape{2, 5, 4, 4});
  // item 0: plane 3 ones, plane 4 zeros
  for (int64_t i = 0; i < 16; ++i) {
    CHECK(c.data()[3 * 16 + i] == 1.0f);
    CHECK(c.data()[4 * 16 + i] == 0.0f);
    CHECK(c.data()[5 * 16 + 3 * 16 + i] == 0.0f);
    CHECK(c.data()[5 * 16 + 4 * 16 + i] == 1.0f);
  }
  CHECK_THROWS_AS(condition_input(x, {0, 2}, 2), ContractError);
  CHECK_THROWS_AS(condition_input(x, {0}, 2), ShapeError);
}

TEST_CASE("generator is shape-closed with a 1x1 bottleneck for n in 6..8") {
  for (int64_t n : {6, 7, 8}) {
    const int64_t size = 1ll << n;
    Rng rng(40 + n);
    // thin stages keep the large sizes affordable
    std::vector<int64_t> ch(n, 4);
    GeneratorNet g(size, 5, rng, ch);
    CHECK(g.n_stages == n);
    Tensor x = Tensor::uniform({1, 5, size, size}, rng, -1, 1);
    std::vector<Tensor> taps;
    Tensor o = g.forward(x, false, false, rng, &taps);
    CHECK(o.shape() == Shape{1, 1, size, size});
    // encoder stage s output is 2^(n-s-1); bottleneck is 1x1
    CHECK(taps[n - 1].shape()[2] == 1);
    CHECK(taps[n - 1].shape()[3] == 1);
    for (int64_t s = 0; s < n; ++s)
      CHECK(taps[s].shape()[2] == (size >> (s + 1)));
    // outputs live in (-1, 1)
    for (float v : o.data()) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("default stage widths follow the 64..512 doubling pattern") {
  CHECK(default_stage_channels(8) ==
        std::vector<int64_t>{64, 128, 256, 512, 512, 512, 512, 512});
  CHECK(default_stage_channels(6) ==
        std::vector<int64_t>{64, 128, 256, 512, 512, 512});
}

TEST_CASE("generator rejects wrong input sizes") {
  Rng rng(44);
  GeneratorNet g(16, 3, rng, {4, 4, 4, 4});
  CHECK_THROWS_AS(g.forward(Tensor::zeros({1, 3, 32, 32}), false, false, rng),
                  ShapeError);
  CHECK_THROWS_AS(g.forward(Tensor::zeros({1, 4, 16, 16}), false, false, rng),
                  ShapeError);
  CHECK_THROWS_AS(GeneratorNet(48, 3, rng), ConfigError);
}

TEST_CASE("generator forward is deterministic without dropout") {
  Rng rng(45);
  GeneratorNet g(16, 3, rng, {4, 8, 8, 8});
  Tensor x = Tensor::uniform({1, 3, 16, 16}, rng, -1, 1);
  Tensor a = g.forward(x, false, false, rng);
  Tensor b = g.forward(x, false, false, rng);
  CHECK(a.data() == b.data());
}

TEST_CASE("dropout noise makes stochastic forwards differ") {
  Rng rng(46);
  GeneratorNet g(16, 3, rng, {4, 8, 8, 8});
  Tensor x = Tensor::uniform({2, 3, 16, 16}, rng, -1, 1);
  float max_diff = 0;
  Tensor ref = g.forward(x, true, true, rng);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor o = g.forward(x, true, true, rng);
    for (int64_t i = 0; i < o.numel(); ++i)
      max_diff = std::max(max_diff, std::abs(o.data()[i] - ref.data()[i]));
  }
  CHECK(max_diff > 0.0f);
}

TEST_CASE("input perturbations reach the output through the skips") {
  // train-mode batch norm keeps activations O(1) per stage; at eval with the
  // fresh running stats the 0.02-scale init shrinks a perturbation below
  // float granularity after a few stages
  Rng rng(47);
  GeneratorNet g(32, 3, rng, {4, 8, 8, 8, 8});
  Tensor x = Tensor::uniform({2, 3, 32, 32}, rng, -1, 1);
  Tensor o1 = g.forward(x, true, false, rng);
  // shift a whole input channel: a single-pixel bump can vanish into
  // negative pre-relu activations at a particular seed
  for (int64_t i = 0; i < 32 * 32; ++i) x.data()[i] += 1.0f;
  Tensor o2 = g.forward(x, true, false, rng);
  bool differs = false;
  for (int64_t i = 0; i < o1.numel(); ++i)
    differs |= o1.data()[i] != o2.data()[i];
  CHECK(differs);
}

TEST_CASE("discriminator stage count caps at 6 and scores live in (0,1)") {
  Rng rng(48);
  DiscriminatorNet d64(64, 6, rng, {4, 4, 4, 4, 4, 4});
  CHECK(d64.n_stages == 6);
  DiscriminatorNet d256(256, 6, rng, {4, 4, 4, 4, 4, 4});
  CHECK(d256.n_stages == 6);
  DiscriminatorNet d16(16, 6, rng, {4, 4, 4, 4});
  CHECK(d16.n_stages == 4);

  Tensor x = Tensor::uniform({3, 5, 16, 16}, rng, -1, 1);
  Tensor y = Tensor::uniform({3, 1, 16, 16}, rng, -1, 1);
  Tensor s = d16.forward(x, y, false);
  CHECK(s.shape() == Shape{3});
  for (float v : s.data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  CHECK_THROWS_AS(d16.forward(x, Tensor::zeros({3, 1, 8, 8}), false),
                  ShapeError);
}

TEST_CASE("zeroed discriminator head scores exactly 0.5") {
  Rng rng(49);
  DiscriminatorNet d(16, 4, rng, {4, 4, 4, 4});
  std::fill(d.head_w.data().begin(), d.head_w.data().end(), 0.0f);
  Tensor x = Tensor::uniform({2, 3, 16, 16}, rng, -1, 1);
  Tensor y = Tensor::uniform({2, 1, 16, 16}, rng, -1, 1);
  Tensor s = d.forward(x, y, false);  // keep the scores tensor alive
  for (float v : s.data()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("swapping the map changes the discriminator score") {
  // train mode for the same reason as the generator perturbation test
  for (uint64_t seed = 50; seed < 70; ++seed) {
    Rng rng(seed);
    DiscriminatorNet d(16, 4, rng, {4, 4, 4, 4});
    Tensor x = Tensor::uniform({2, 3, 16, 16}, rng, -1, 1);
    Tensor y1 = Tensor::uniform({2, 1, 16, 16}, rng, -1, 1);
    Tensor y2 = Tensor::uniform({2, 1, 16, 16}, rng, -1, 1);
    Tensor s1 = d.forward(x, y1, true);
    Tensor s2 = d.forward(x, y2, true);
    CHECK(s1.data()[0] != s2.data()[0]);
  }
}

TEST_CASE("memory gate modulates the map and can zero it") {
  Rng rng(51);
  GateProjection proj(8, 8, 100, rng);
  Tensor o = Tensor::uniform({1, 8, 8}, rng, -1, 1);
  Tensor gate = Tensor::uniform({100}, rng, -1, 1);

  // zero weights + huge bias: tanh plane of ones, gate is a no-op
  std::fill(proj.w.data().begin(), proj.w.data().end(), 0.0f);
  std::fill(proj.b.data().begin(), proj.b.data().end(), 100.0f);
  Tensor same = apply_memory_gate(o, gate, proj);
  for (int64_t i = 0; i < o.numel(); ++i)
    CHECK(same.data()[i] == doctest::Approx(o.data()[i]).epsilon(1e-6));

  // zero plane kills the map
  std::fill(proj.b.data().begin(), proj.b.data().end(), 0.0f);
  Tensor dead = apply_memory_gate(o, gate, proj);
  for (float v : dead.data()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(apply_memory_gate(Tensor::zeros({1, 4, 4}), gate, proj),
                  ShapeError);
}

TEST_CASE("activation export is normalized and sized like the input") {
  Rng rng(52);
  GeneratorNetT<float> g(16, 3, rng, {4, 8, 8, 8});
  Tensor x = Tensor::uniform({1, 3, 16, 16}, rng, -1, 1);
  for (int64_t layer : {1, 2, 6}) {
    std::vector<float> heat = export_activation(g, x, layer, rng);
    CHECK(heat.size() == 256);
    for (float v : heat) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  CHECK_THROWS_AS(export_activation(g, x, 0, rng), ContractError);
  CHECK_THROWS_AS(export_activation(g, x, 99, rng), ContractError);
}
