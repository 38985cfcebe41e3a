#include <benchmark/benchmark.h>

#include "mcgan/memory.hpp"
#include "mcgan/metrics.hpp"
#include "mcgan/networks.hpp"
#include "mcgan/nn.hpp"

using namespace mcgan;

static void BM_Conv2dDown(benchmark::State& state) {
  const int64_t ch = state.range(0);
  Rng rng(1);
  Tensor x = Tensor::uniform({1, ch, 64, 64}, rng, -1, 1);
  Tensor w = Tensor::uniform({ch, ch, 4, 4}, rng, -0.05f, 0.05f);
  Tensor b = Tensor::zeros({ch});
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_down(x, w, b));
}
BENCHMARK(BM_Conv2dDown)->Arg(16)->Arg(64);

static void BM_Conv2dUp(benchmark::State& state) {
  const int64_t ch = state.range(0);
  Rng rng(2);
  Tensor x = Tensor::uniform({1, ch, 32, 32}, rng, -1, 1);
  Tensor w = Tensor::uniform({ch, ch, 4, 4}, rng, -0.05f, 0.05f);
  Tensor b = Tensor::zeros({ch});
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_up(x, w, b));
}
BENCHMARK(BM_Conv2dUp)->Arg(16)->Arg(64);

static void BM_Matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(3);
  Tensor a = Tensor::uniform({n, n}, rng, -1, 1);
  Tensor b = Tensor::uniform({n, n}, rng, -1, 1);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(128)->Arg(512);

static void BM_MemoryStep(benchmark::State& state) {
  Rng rng(4);
  MemoryController ctrl(MemoryConfig{32, 100}, rng);
  MemoryState st(MemoryConfig{32, 100}, "s");
  Tensor o = Tensor::uniform({64, 64}, rng, -1, 1);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(memory_step(ctrl, st, o));
}
BENCHMARK(BM_MemoryStep);

static void BM_GeneratorForward(benchmark::State& state) {
  Rng rng(5);
  GeneratorNet g(64, 5, rng);
  Tensor x = Tensor::uniform({1, 5, 64, 64}, rng, -1, 1);
  NoGradGuard ng;
  for (auto _ : state)
    benchmark::DoNotOptimize(g.forward(x, false, false, rng));
}
BENCHMARK(BM_GeneratorForward);

static void BM_Metrics(benchmark::State& state) {
  Rng rng(6);
  std::vector<double> pv(64 * 64), gv(64 * 64);
  for (auto& v : pv) v = rng.uniform(0.0, 1.0);
  for (auto& v : gv) v = rng.uniform(0.0, 1.0);
  SaliencyMap pred(64, 64, pv), gt(64, 64, gv);
  FixationSet fix;
  for (int i = 0; i < 20; ++i)
    fix.push_back({rng.uniform_int(0, 63), rng.uniform_int(0, 63)});
  for (auto _ : state) {
    benchmark::DoNotOptimize(cc(pred, gt));
    benchmark::DoNotOptimize(nss(pred, fix));
    benchmark::DoNotOptimize(kl(pred, gt));
    benchmark::DoNotOptimize(sm(pred, gt));
  }
}
BENCHMARK(BM_Metrics);

static void BM_AucBorji(benchmark::State& state) {
  Rng rng(7);
  std::vector<double> pv(64 * 64);
  for (auto& v : pv) v = rng.uniform(0.0, 1.0);
  SaliencyMap pred(64, 64, pv);
  FixationSet fix;
  for (int i = 0; i < 20; ++i)
    fix.push_back({rng.uniform_int(0, 63), rng.uniform_int(0, 63)});
  for (auto _ : state) benchmark::DoNotOptimize(auc_borji(pred, fix, 100, 9));
}
BENCHMARK(BM_AucBorji);

BENCHMARK_MAIN();
