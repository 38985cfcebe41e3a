#include "mcgan/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "mcgan/gradcheck.hpp"
#include "mcgan/losses.hpp"
#include "mcgan/memory.hpp"
#include "mcgan/metrics.hpp"
#include "mcgan/networks.hpp"

namespace mcgan {

namespace {

using TD = TensorD;
using Named = std::vector<std::pair<std::string, TD>>;

void record_grad(VerifyReport& rep, const std::string& name,
                 const GradCheckResult& r) {
  VerifyCheck c;
  c.name = name;
  c.passed = r.ok(1e-4);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max rel err %.3e over %lld coords, %lld at kinks skipped (worst %s)",
                r.max_rel_error, static_cast<long long>(r.checked),
                static_cast<long long>(r.skipped), r.worst.c_str());
  c.detail = buf;
  rep.checks.push_back(std::move(c));
}

void record(VerifyReport& rep, const std::string& name, bool ok,
            const std::string& detail) {
  rep.checks.push_back({name, ok, detail});
}

TD leaf(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return TD::uniform(std::move(s), rng, lo, hi).set_requires_grad();
}

}  // namespace

// ---------------------------------------------------------------------------
// gradients

VerifyReport verify_gradients() {
  VerifyReport rep{"gradients", {}};
  Rng rng(42);

  {  // elementwise binaries (with broadcast) and unaries
    TD x = leaf({3, 4}, rng), y = leaf({3, 4}, rng), r = leaf({1, 4}, rng);
    record_grad(rep, "add", grad_check({{"x", x}, {"y", y}},
                                       [&] { return sum(add(x, y)); }, rng));
    record_grad(rep, "add broadcast",
                grad_check({{"x", x}, {"r", r}},
                           [&] { return sum(add(x, r)); }, rng));
    record_grad(rep, "sub", grad_check({{"x", x}, {"y", y}},
                                       [&] { return sum(sub(x, y)); }, rng));
    record_grad(rep, "mul", grad_check({{"x", x}, {"y", y}},
                                       [&] { return sum(mul(x, y)); }, rng));
    record_grad(rep, "neg/scale/add_scalar",
                grad_check({{"x", x}}, [&] {
                  return sum(add_scalar(scale(neg(x), 0.7), 0.3));
                }, rng));
    record_grad(rep, "tanh", grad_check({{"x", x}},
                                        [&] { return sum(tanh_(x)); }, rng));
    record_grad(rep, "sigmoid", grad_check({{"x", x}},
                                           [&] { return sum(sigmoid(x)); }, rng));
    record_grad(rep, "mean", grad_check({{"x", x}},
                                        [&] { return mean(mul(x, x)); }, rng));
  }
  {  // ops with domain restrictions, sampled away from their kinks
    TD p = leaf({3, 4}, rng, 0.5, 2.0);   // log: positive
    TD q = leaf({3, 4}, rng, 0.2, 1.5);   // relu/abs: bounded away from 0
    for (size_t i = 0; i < q.data().size(); ++i)
      if (i % 2) q.data()[i] = -q.data()[i];
    record_grad(rep, "log", grad_check({{"p", p}},
                                       [&] { return sum(log_(p)); }, rng));
    record_grad(rep, "relu", grad_check({{"q", q}},
                                        [&] { return sum(relu(q)); }, rng));
    record_grad(rep, "abs", grad_check({{"q", q}},
                                       [&] { return sum(abs_(q)); }, rng));
  }
  {  // softmax (through a weighted sum so the Jacobian is exercised)
    TD x = leaf({7}, rng), w = leaf({7}, rng);
    record_grad(rep, "softmax",
                grad_check({{"x", x}, {"w", w}},
                           [&] { return sum(mul(softmax(x), w)); }, rng));
  }
  {  // matmul family
    TD a = leaf({3, 5}, rng), b = leaf({5, 4}, rng);
    TD v = leaf({5}, rng), u = leaf({3}, rng);
    record_grad(rep, "matmul mm",
                grad_check({{"a", a}, {"b", b}},
                           [&] { return sum(matmul(a, b)); }, rng));
    record_grad(rep, "matmul mv",
                grad_check({{"a", a}, {"v", v}},
                           [&] { return sum(mul(matmul(a, v), matmul(a, v))); },
                           rng));
    record_grad(rep, "matmul vm",
                grad_check({{"u", u}, {"a", a}},
                           [&] { return sum(matmul(u, a)); }, rng));
    record_grad(rep, "outer", grad_check({{"u", u}, {"v", v}}, [&] {
                  return sum(mul(outer(u, v), outer(u, v)));
                }, rng));
  }
  {  // shape ops
    TD x = leaf({2, 3, 4}, rng), y = leaf({2, 2, 4}, rng);
    record_grad(rep, "reshape/concat/slice/stack",
                grad_check({{"x", x}, {"y", y}}, [&] {
                  TD c = concat(x, y, 1);
                  TD s = stack0(std::vector<TD>{slice0(c, 0), slice0(c, 1)});
                  return sum(mul(reshape(s, {2, 20}), reshape(s, {2, 20})));
                }, rng));
    TD n = leaf({2, 3, 4, 4}, rng);
    record_grad(rep, "spatial_mean",
                grad_check({{"n", n}}, [&] {
                  return sum(mul(spatial_mean(n), spatial_mean(n)));
                }, rng));
  }
  {  // linear
    TD x = leaf({6}, rng), w = leaf({4, 6}, rng), b = leaf({4}, rng);
    record_grad(rep, "linear",
                grad_check({{"x", x}, {"w", w}, {"b", b}}, [&] {
                  TD o = linear(x, w, b);
                  return sum(mul(o, o));
                }, rng));
  }
  {  // convolutions
    TD x = leaf({2, 3, 8, 8}, rng), w = leaf({4, 3, 4, 4}, rng, -0.3, 0.3);
    TD b = leaf({4}, rng);
    record_grad(rep, "conv2d_down",
                grad_check({{"x", x}, {"w", w}, {"b", b}}, [&] {
                  TD o = conv2d_down(x, w, b);
                  return sum(mul(o, o));
                }, rng));
    TD xu = leaf({2, 4, 4, 4}, rng), wu = leaf({4, 3, 4, 4}, rng, -0.3, 0.3);
    TD bu = leaf({3}, rng);
    record_grad(rep, "conv2d_up",
                grad_check({{"x", xu}, {"w", wu}, {"b", bu}}, [&] {
                  TD o = conv2d_up(xu, wu, bu);
                  return sum(mul(o, o));
                }, rng));
  }
  {  // adjointness of the two conv directions under shared weights
    Rng r2(5);
    NoGradGuard ng;
    TD x = TD::uniform({1, 3, 8, 8}, r2, -1, 1);
    TD y = TD::uniform({1, 2, 4, 4}, r2, -1, 1);
    TD w = TD::uniform({2, 3, 4, 4}, r2, -1, 1);
    TD z0 = TD::zeros({2}), z1 = TD::zeros({3});
    double lhs = 0, rhs = 0;
    TD up = conv2d_up(y, w, z1), down = conv2d_down(x, w, z0);
    for (int64_t i = 0; i < up.numel(); ++i) lhs += up.data()[i] * x.data()[i];
    for (int64_t i = 0; i < down.numel(); ++i) rhs += down.data()[i] * y.data()[i];
    char buf[96];
    std::snprintf(buf, sizeof(buf), "<up(y),x>=%.9f <y,down(x)>=%.9f", lhs, rhs);
    record(rep, "conv up/down adjoint", std::abs(lhs - rhs) < 1e-9, buf);
  }
  {  // batch norm, training mode (batch statistics path)
    BatchNorm2dT<double> bn(3);
    TD x = leaf({4, 3, 2, 2}, rng);
    Named in{{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}};
    record_grad(rep, "batchnorm train",
                grad_check(in, [&] {
                  TD o = bn.forward(x, /*train=*/true);
                  return sum(mul(o, o));
                }, rng));
  }
  {  // dropout with a deterministic mask per closure call
    TD x = leaf({5, 5}, rng);
    record_grad(rep, "dropout",
                grad_check({{"x", x}}, [&] {
                  Rng mask_rng(77);
                  return sum(dropout(x, 0.5, mask_rng, true));
                }, rng));
  }
  {  // lstm cell
    Rng r2(9);
    LstmCellT<double> cell(5, 6, r2);
    TD x = leaf({5}, rng), h = leaf({6}, rng), c = leaf({6}, rng);
    Named in{{"x", x}, {"h", h}, {"c", c}};
    NamedTensorsT<double> ps;
    cell.collect("lstm", ps);
    for (auto& [name, t] : ps) in.emplace_back(name, t);
    record_grad(rep, "lstm cell", grad_check(in, [&] {
                  auto hc = cell.step(x, h, c);
                  return add(sum(mul(hc.first, hc.first)), sum(hc.second));
                }, rng));
  }
  {  // mlp
    Rng r2(11);
    MlpT<double> mlp(8, 5, r2);
    TD x = leaf({8}, rng);
    Named in{{"x", x}, {"w1", mlp.w1}, {"b1", mlp.b1}, {"w2", mlp.w2},
             {"b2", mlp.b2}};
    record_grad(rep, "mlp", grad_check(in, [&] {
                  TD o = mlp.forward(x);
                  return sum(mul(o, o));
                }, rng, 1e-5, 12));
  }
  {  // patch grid pooling
    TD x = leaf({20, 24}, rng);
    record_grad(rep, "patch_grid",
                grad_check({{"x", x}}, [&] {
                  TD p = patch_grid(x);
                  return sum(mul(p, p));
                }, rng));
  }
  {  // one full memory step
    Rng r2(13);
    MemoryControllerT<double> ctrl(MemoryConfig{4, 100}, r2);
    TD o = leaf({16, 16}, rng);
    TD M0 = leaf({4, 100}, rng, -0.5, 0.5);
    Named in{{"o", o}, {"M", M0}, {"patch_w", ctrl.patch_w}};
    NamedTensorsT<double> ps;
    ctrl.read_lstm.collect("read", ps);
    ctrl.write_lstm.collect("write", ps);
    ctrl.mlp.collect("mlp", ps);
    for (auto& [name, t] : ps) in.emplace_back(name, t);
    record_grad(rep, "memory step end-to-end",
                grad_check(in, [&] {
                  MemoryStateT<double> st(ctrl.cfg, "s");
                  st.M = M0;
                  MemoryReadoutT<double> r = memory_step(ctrl, st, o);
                  return add(sum(mul(r.gate, r.gate)), sum(mul(st.M, st.M)));
                }, rng, 1e-5, 8));
  }
  {  // end-to-end reduced model: 16x16, 4 stages, memory + gate + D + losses
    Rng r2(17);
    GeneratorNetT<double> gen(16, 5, r2, {4, 8, 8, 16});
    DiscriminatorNetT<double> dis(16, 6, r2, {4, 8, 8, 16});
    MemoryControllerT<double> ctrl(MemoryConfig{3, 100}, r2);
    GateProjectionT<double> proj(16, 16, 100, r2);
    NoGradGuard* no = nullptr;
    (void)no;
    TD x = TD::uniform({2, 5, 16, 16}, r2, -1, 1);
    TD real = TD::uniform({2, 1, 16, 16}, r2, -1, 1);
    TD M0 = leaf({3, 100}, rng, -0.5, 0.5);

    Named in{{"M", M0}};
    NamedTensorsT<double> ps;
    gen.collect("gen", ps);
    dis.collect("dis", ps);
    ctrl.collect("mem", ps);
    proj.collect("gate", ps);
    for (auto& [name, t] : ps)
      if (t.requires_grad()) in.emplace_back(name, t);

    auto f = [&] {
      TD o = gen.forward(x, /*train=*/true, /*dropout_on=*/false, r2);
      std::vector<TD> gated;
      for (int64_t i = 0; i < 2; ++i) {
        MemoryStateT<double> st(ctrl.cfg, "s" + std::to_string(i));
        st.M = M0;
        MemoryReadoutT<double> r = memory_step(ctrl, st, slice0(o, i));
        gated.push_back(apply_memory_gate(slice0(o, i), r.gate, proj));
      }
      TD fake = stack0(gated);
      TD scores = dis.forward(x, fake, /*train=*/true);
      return g_loss_fn(scores, fake, real, 0.5);
    };
    record_grad(rep, "mc-gan end-to-end (16x16, 4-stage)",
                grad_check(in, f, rng, 1e-5, 5));
  }
  {  // loss functions on raw score vectors
    TD sr = leaf({4}, rng, 0.1, 0.9), sf = leaf({4}, rng, 0.1, 0.9);
    record_grad(rep, "d_loss", grad_check({{"sr", sr}, {"sf", sf}}, [&] {
                  return d_loss_fn(sr, sf);
                }, rng));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// metrics

namespace {

SaliencyMap random_map(Rng& rng, int64_t w, int64_t h) {
  std::vector<double> v(w * h);
  for (double& x : v) x = rng.uniform(0.0, 1.0);
  return SaliencyMap(w, h, std::move(v));
}

// brute-force oracles, written directly from the definitions
double oracle_cc(const SaliencyMap& a, const SaliencyMap& b) {
  const int64_t n = a.pixels();
  double ma = 0, mb = 0;
  for (int64_t i = 0; i < n; ++i) {
    ma += a.values[i];
    mb += b.values[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (int64_t i = 0; i < n; ++i) {
    cov += (a.values[i] - ma) * (b.values[i] - mb);
    va += (a.values[i] - ma) * (a.values[i] - ma);
    vb += (b.values[i] - mb) * (b.values[i] - mb);
  }
  return (cov / n) / (std::sqrt(va / n) * std::sqrt(vb / n));
}

double oracle_nss(const SaliencyMap& p, const FixationSet& fix) {
  double mu = 0;
  for (double v : p.values) mu += v;
  mu /= p.pixels();
  double var = 0;
  for (double v : p.values) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / p.pixels());
  double s = 0;
  for (const auto& f : fix) s += (p.at(f.x, f.y) - mu) / sd;
  return s / static_cast<double>(fix.size());
}

double oracle_kl(const SaliencyMap& pred, const SaliencyMap& gt) {
  double sp = 0, sg = 0;
  for (double v : pred.values) sp += v;
  for (double v : gt.values) sg += v;
  double out = 0;
  for (int64_t i = 0; i < pred.pixels(); ++i) {
    const double a = pred.values[i] / sp + 1e-12;
    const double b = gt.values[i] / sg + 1e-12;
    out += a * std::log(a / b);
  }
  return out;
}

double oracle_sm(const SaliencyMap& pred, const SaliencyMap& gt) {
  double sp = 0, sg = 0;
  for (double v : pred.values) sp += v;
  for (double v : gt.values) sg += v;
  double out = 0;
  for (int64_t i = 0; i < pred.pixels(); ++i)
    out += std::min(pred.values[i] / sp, gt.values[i] / sg);
  return out;
}

// Independent AUC: shares only the negative-sampling RNG stream (required for
// exact agreement); ROC accumulation is organized differently, by counting
// exceedances per threshold with sorted copies.
double oracle_auc(const SaliencyMap& pred, const FixationSet& fix,
                  int n_splits, uint64_t seed) {
  std::vector<double> pos;
  std::set<int64_t> fixated;
  for (const auto& f : fix) {
    pos.push_back(pred.at(f.x, f.y));
    fixated.insert(f.y * pred.width + f.x);
  }
  std::vector<int64_t> candidates;
  for (int64_t i = 0; i < pred.pixels(); ++i)
    if (!fixated.count(i)) candidates.push_back(i);

  std::vector<double> ths = pos;
  std::sort(ths.begin(), ths.end());
  ths.erase(std::unique(ths.begin(), ths.end()), ths.end());
  std::reverse(ths.begin(), ths.end());

  Rng rng(seed);
  double total = 0;
  for (int split = 0; split < n_splits; ++split) {
    std::vector<double> negs;
    for (size_t i = 0; i < pos.size(); ++i)
      negs.push_back(
          pred.values[candidates[static_cast<size_t>(rng.uniform_int(
              0, static_cast<int64_t>(candidates.size()) - 1))]]);
    std::vector<std::pair<double, double>> roc{{0.0, 0.0}};
    for (double th : ths) {
      const double tpr =
          static_cast<double>(std::count_if(pos.begin(), pos.end(),
                                            [&](double v) { return v >= th; })) /
          static_cast<double>(pos.size());
      const double fpr =
          static_cast<double>(std::count_if(negs.begin(), negs.end(),
                                            [&](double v) { return v >= th; })) /
          static_cast<double>(negs.size());
      roc.emplace_back(fpr, tpr);
    }
    roc.emplace_back(1.0, 1.0);
    double area = 0;
    for (size_t i = 1; i < roc.size(); ++i)
      area += (roc[i].first - roc[i - 1].first) *
              (roc[i].second + roc[i - 1].second) / 2.0;
    total += area;
  }
  return total / n_splits;
}

}  // namespace

VerifyReport verify_metrics() {
  VerifyReport rep{"metrics", {}};
  Rng rng(123);

  int64_t bad_nss = 0, bad_cc = 0, bad_kl = 0, bad_sm = 0, bad_kl_sign = 0;
  int64_t bad_cc_aff = 0, bad_nss_aff = 0, bad_scale = 0;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    SaliencyMap p = random_map(rng, 16, 16), g = random_map(rng, 16, 16);
    FixationSet fix;
    const int64_t nf = rng.uniform_int(5, 20);
    for (int64_t j = 0; j < nf; ++j)
      fix.push_back({rng.uniform_int(0, 15), rng.uniform_int(0, 15)});

    auto note = [&](double a, double b, int64_t& bad) {
      const double d = std::abs(a - b);
      worst = std::max(worst, d);
      bad += d >= 1e-9;
    };
    note(nss(p, fix), oracle_nss(p, fix), bad_nss);
    note(cc(p, g), oracle_cc(p, g), bad_cc);
    note(kl(p, g), oracle_kl(p, g), bad_kl);
    note(sm(p, g), oracle_sm(p, g), bad_sm);
    bad_kl_sign += kl(p, g) < -1e-12;

    // invariance properties
    SaliencyMap p2 = p, g2 = g;
    for (double& v : p2.values) v = 3.5 * v + 0.25;
    for (double& v : g2.values) v *= 7.0;
    bad_cc_aff += std::abs(cc(p2, g) - cc(p, g)) >= 1e-9;
    bad_nss_aff += std::abs(nss(p2, fix) - nss(p, fix)) >= 1e-9;
    bad_scale += std::abs(kl(p, g2) - kl(p, g)) >= 1e-9 ||
                 std::abs(sm(p, g2) - sm(p, g)) >= 1e-9;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst abs deviation %.3e", worst);
  record(rep, "nss vs oracle (1000 pairs)", bad_nss == 0, buf);
  record(rep, "cc vs oracle (1000 pairs)", bad_cc == 0, buf);
  record(rep, "kl vs oracle (1000 pairs)", bad_kl == 0, buf);
  record(rep, "sm vs oracle (1000 pairs)", bad_sm == 0, buf);
  record(rep, "kl nonnegative", bad_kl_sign == 0,
         std::to_string(bad_kl_sign) + " violations");
  record(rep, "cc affine invariance", bad_cc_aff == 0,
         std::to_string(bad_cc_aff) + " violations");
  record(rep, "nss affine invariance", bad_nss_aff == 0,
         std::to_string(bad_nss_aff) + " violations");
  record(rep, "kl/sm rescale invariance", bad_scale == 0,
         std::to_string(bad_scale) + " violations");

  {  // AUC against the independently accumulated ROC, exact under shared seed
    int64_t bad = 0;
    for (int i = 0; i < 50; ++i) {
      SaliencyMap p = random_map(rng, 16, 16);
      FixationSet fix;
      const int64_t nf = rng.uniform_int(5, 20);
      for (int64_t j = 0; j < nf; ++j)
        fix.push_back({rng.uniform_int(0, 15), rng.uniform_int(0, 15)});
      const uint64_t seed = static_cast<uint64_t>(i) * 31 + 7;
      if (auc_borji(p, fix, 100, seed) != oracle_auc(p, fix, 100, seed)) ++bad;
    }
    record(rep, "auc exact vs oracle (50 pairs, shared seed)", bad == 0,
           std::to_string(bad) + " mismatches");
  }
  {  // hand arithmetic values
    SaliencyMap m(2, 2, {1, 2, 3, 4});
    const double v = normalize_zscore(m).values[3];
    std::snprintf(buf, sizeof(buf), "got %.6f", v);
    record(rep, "zscore hand value 1.341641", std::abs(v - 1.341641) < 1e-6, buf);

    const double n = nss(m, {{1, 1}});
    std::snprintf(buf, sizeof(buf), "got %.6f", n);
    record(rep, "nss hand value 1.341641", std::abs(n - 1.341641) < 1e-6, buf);

    SaliencyMap a(2, 1, {0.5, 0.5}), b(2, 1, {0.25, 0.75});
    std::snprintf(buf, sizeof(buf), "got %.6f", kl(a, b));
    record(rep, "kl hand value 0.143841", std::abs(kl(a, b) - 0.143841) < 1e-5,
           buf);
    std::snprintf(buf, sizeof(buf), "got %.6f", sm(a, b));
    record(rep, "sm hand value 0.75", std::abs(sm(a, b) - 0.75) < 1e-9, buf);
  }
  {  // AUC sanity: perfect separation and chance level
    SaliencyMap p(8, 8, std::vector<double>(64, 0.0));
    FixationSet fix;
    for (int i = 0; i < 5; ++i) {
      p.values[i * 9] = 1.0 - 0.01 * i;
      fix.push_back({i, i});
    }
    const double a1 = auc_borji(p, fix, 100, 99);
    std::snprintf(buf, sizeof(buf), "got %.6f", a1);
    record(rep, "auc perfect separation = 1", std::abs(a1 - 1.0) < 1e-9, buf);

    Rng r2(31);
    SaliencyMap q = random_map(r2, 64, 64);
    FixationSet f2;
    for (int i = 0; i < 50; ++i)
      f2.push_back({r2.uniform_int(0, 63), r2.uniform_int(0, 63)});
    const double a2 = auc_borji(q, f2, 100, 11);
    std::snprintf(buf, sizeof(buf), "got %.6f", a2);
    record(rep, "auc chance level in [0.45,0.55]", a2 > 0.45 && a2 < 0.55, buf);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// memory

VerifyReport verify_memory() {
  VerifyReport rep{"memory", {}};
  Rng rng(7);
  const int64_t k = 6, l = 100;

  int64_t bad_attn = 0, bad_onehot = 0, bad_convex = 0, bad_perm = 0;
  double worst_perm = 0;
  for (int i = 0; i < 1000; ++i) {
    NoGradGuard ng;
    Tensor M = Tensor::uniform({k, l}, rng, -2, 2);
    Tensor o_emb = Tensor::uniform({l}, rng, -2, 2);

    // attention normalization
    MemoryState st(MemoryConfig{k, l}, "s");
    st.M = M;
    auto [a, h] = memory_read(st, o_emb);
    double s = 0;
    bool nonneg = true;
    for (float v : a.data()) {
      s += v;
      nonneg &= v >= 0.0f;
    }
    bad_attn += !(std::abs(s - 1.0) < 1e-6 && nonneg);

    // one-hot replacement: chosen slot becomes the write vector exactly
    Tensor m_w = Tensor::uniform({l}, rng, -2, 2);
    Tensor one_hot = Tensor::zeros({k});
    const int64_t slot = rng.uniform_int(0, k - 1);
    one_hot.data()[slot] = 1.0f;
    Tensor updated = update_memory(M, one_hot, m_w);
    for (int64_t r = 0; r < k; ++r)
      for (int64_t c = 0; c < l; ++c) {
        const float want = r == slot ? m_w.data()[c] : M.data()[r * l + c];
        if (updated.data()[r * l + c] != want) ++bad_onehot;
      }

    // convex-combination bounds under softmax attention
    Tensor upd2 = update_memory(M, a, m_w);
    for (int64_t r = 0; r < k; ++r)
      for (int64_t c = 0; c < l; ++c) {
        const float lo = std::min(M.data()[r * l + c], m_w.data()[c]);
        const float hi = std::max(M.data()[r * l + c], m_w.data()[c]);
        const float v = upd2.data()[r * l + c];
        if (v < lo - 1e-6f || v > hi + 1e-6f) ++bad_convex;
      }

    // slot-permutation equivariance
    std::vector<int64_t> perm(k);
    for (int64_t j = 0; j < k; ++j) perm[j] = j;
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Tensor Mp = Tensor::zeros({k, l});
    for (int64_t r = 0; r < k; ++r)
      std::copy(M.data().begin() + perm[r] * l, M.data().begin() + (perm[r] + 1) * l,
                Mp.data().begin() + r * l);
    MemoryState stp(MemoryConfig{k, l}, "s");
    stp.M = Mp;
    auto [ap, hp] = memory_read(stp, o_emb);
    // the softmax denominator's accumulation order follows the row order, so
    // attention matches to float round-off rather than bit-exactly
    bool ok = true;
    for (int64_t r = 0; r < k; ++r) {
      const double d =
          std::abs(static_cast<double>(ap.data()[r]) - a.data()[perm[r]]);
      worst_perm = std::max(worst_perm, d);
      ok &= d < 1e-6;
    }
    for (int64_t c = 0; c < l; ++c) {
      const double d = std::abs(static_cast<double>(hp.data()[c]) - h.data()[c]);
      worst_perm = std::max(worst_perm, d);
      ok &= d < 1e-5;  // reduction order differs; float round-off only
    }
    bad_perm += !ok;
  }
  record(rep, "attention normalization (1000 cases)", bad_attn == 0,
         std::to_string(bad_attn) + " violations");
  record(rep, "one-hot replacement (1000 cases)", bad_onehot == 0,
         std::to_string(bad_onehot) + " entry violations");
  record(rep, "convex-combination bounds (1000 cases)", bad_convex == 0,
         std::to_string(bad_convex) + " entry violations");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%lld violations, worst retrieval drift %.2e",
                static_cast<long long>(bad_perm), worst_perm);
  record(rep, "slot-permutation equivariance (1000 cases)", bad_perm == 0, buf);

  {  // hand update example and zero-attention identity
    NoGradGuard ng;
    Tensor M = Tensor::from({2, 2}, {0, 2, 4, 6});
    Tensor a = Tensor::from({2}, {0.5f, 0.5f});
    Tensor mw = Tensor::from({2}, {1, 1});
    Tensor u = update_memory(M, a, mw);
    const bool ok = u.data()[0] == 0.5f && u.data()[1] == 1.5f &&
                    u.data()[2] == 2.5f && u.data()[3] == 3.5f;
    record(rep, "hand update example", ok, "expected [[0.5,1.5],[2.5,3.5]]");

    Tensor z = Tensor::zeros({2});
    Tensor u2 = update_memory(M, z, mw);
    record(rep, "zero attention leaves memory unchanged",
           u2.data() == M.data(), "");
  }
  {  // uniform attention on zero memory; read-only step leaves state intact
    NoGradGuard ng;
    Rng r2(19);
    MemoryController ctrl(MemoryConfig{4, 100}, r2);
    MemoryState st(MemoryConfig{4, 100}, "s");
    Tensor o = Tensor::uniform({16, 16}, r2, -1, 1);
    auto [a0, h0] = memory_read(st, Tensor::uniform({100}, r2, -1, 1));
    bool uniform = true;
    for (float v : a0.data()) uniform &= std::abs(v - 0.25f) < 1e-6f;
    record(rep, "fresh state gives uniform attention", uniform, "");

    MemoryState before = st;
    memory_step(ctrl, st, o, /*update_state=*/false);
    record(rep, "read-only step leaves state unchanged",
           st.M.data() == before.M.data() &&
               st.read_h.data() == before.read_h.data() &&
               st.write_h.data() == before.write_h.data(),
           "");
    MemoryReadout r1 = memory_step(ctrl, st, o);
    record(rep, "gate within (-1,1)",
           std::all_of(r1.gate.data().begin(), r1.gate.data().end(),
                       [](float v) { return v > -1.0f && v < 1.0f; }),
           "");
  }
  return rep;
}

std::vector<VerifyReport> verify_all() {
  return {verify_gradients(), verify_metrics(), verify_memory()};
}

bool print_reports(const std::vector<VerifyReport>& reports) {
  bool all_ok = true;
  for (const auto& rep : reports) {
    std::printf("== suite %s ==\n", rep.suite.c_str());
    for (const auto& c : rep.checks)
      std::printf("  [%s] %s%s%s\n", c.passed ? "pass" : "FAIL",
                  c.name.c_str(), c.detail.empty() ? "" : ": ",
                  c.detail.c_str());
    std::printf("suite %s: %lld/%zu passed\n", rep.suite.c_str(),
                static_cast<long long>(rep.n_passed()), rep.checks.size());
    all_ok &= rep.passed();
  }
  return all_ok;
}

}  // namespace mcgan
