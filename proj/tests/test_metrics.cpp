#include <doctest.h>

#include <cmath>

#include "mcgan/errors.hpp"
#include "mcgan/metrics.hpp"
#include "mcgan/rng.hpp"
#include "mcgan/verify.hpp"

using namespace mcgan;

namespace {

SaliencyMap random_map(Rng& rng, int64_t w, int64_t h) {
  std::vector<double> v(w * h);
  for (auto& x : v) x = rng.uniform(0.0, 1.0);
  return {w, h, std::move(v)};
}

}  // namespace

TEST_CASE("probability normalization sums to one and is idempotent") {
  Rng rng(60);
  SaliencyMap m = random_map(rng, 8, 8);
  SaliencyMap p = normalize_probability(m);
  double s = 0;
  for (double v : p.values) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  SaliencyMap pp = normalize_probability(p);
  for (int64_t i = 0; i < p.pixels(); ++i)
    CHECK(pp.values[i] == doctest::Approx(p.values[i]).epsilon(1e-12));
  CHECK(p.variant == MapVariant::probability);

  CHECK_THROWS_AS(normalize_probability({2, 2, {0, 0, 0, 0}}), ContractError);
  CHECK_THROWS_AS(normalize_probability({2, 2, {1, -1, 1, 1}}), ContractError);
}

TEST_CASE("zscore normalization has zero mean and unit variance") {
  Rng rng(61);
  SaliencyMap z = normalize_zscore(random_map(rng, 16, 16));
  double mu = 0, s2 = 0;
  for (double v : z.values) mu += v;
  mu /= z.pixels();
  for (double v : z.values) s2 += (v - mu) * (v - mu);
  CHECK(mu == doctest::Approx(0).epsilon(1e-12));
  CHECK(s2 / z.pixels() == doctest::Approx(1).epsilon(1e-12));
  CHECK_THROWS_AS(normalize_zscore({2, 2, {3, 3, 3, 3}}), ContractError);
}

TEST_CASE("nss hand value and full-coverage zero") {
  // z-scoring [1,2,3,4] puts 4 at (4-2.5)/sqrt(1.25) = 1.341641
  SaliencyMap m(2, 2, {1, 2, 3, 4});
  CHECK(nss(m, {{1, 1}}) == doctest::Approx(1.3416407865).epsilon(1e-9));
  // fixating every pixel averages the whole z-scored map: exactly 0
  FixationSet all = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  CHECK(nss(m, all) == doctest::Approx(0).epsilon(1e-12));
  CHECK_THROWS_AS(nss(m, {}), ContractError);
  CHECK_THROWS_AS(nss(m, {{2, 0}}), ContractError);
}

TEST_CASE("cc is 1 on itself, -1 on negation, 0 on checker vs gradient") {
  Rng rng(62);
  SaliencyMap m = random_map(rng, 8, 8);
  CHECK(cc(m, m) == doctest::Approx(1).epsilon(1e-12));
  SaliencyMap neg = m;
  for (double& v : neg.values) v = -v;
  CHECK(cc(m, neg) == doctest::Approx(-1).epsilon(1e-12));
  CHECK_THROWS_AS(cc(m, {2, 2, {1, 1, 1, 1}}), ContractError);
  CHECK_THROWS_AS(cc(m, random_map(rng, 4, 4)), ContractError);
}

TEST_CASE("kl hand value, nonnegativity and argument order") {
  SaliencyMap a(2, 1, {0.5, 0.5}), b(2, 1, {0.25, 0.75});
  // 0.5 ln 2 + 0.5 ln(2/3) = 0.143841
  CHECK(kl(a, b) == doctest::Approx(0.1438410362).epsilon(1e-8));
  CHECK(kl(a, a) == doctest::Approx(0).epsilon(1e-9));
  CHECK(kl(a, b) != kl(a, b, /*swap_args=*/true));
  // swap flag equals swapped arguments
  CHECK(kl(a, b, true) == doctest::Approx(kl(b, a)).epsilon(1e-12));

  Rng rng(63);
  for (int t = 0; t < 50; ++t) {
    SaliencyMap p = random_map(rng, 8, 8), q = random_map(rng, 8, 8);
    CHECK(kl(p, q) >= 0.0);
  }
}

TEST_CASE("sm hand value and disjoint/identical extremes") {
  SaliencyMap a(2, 1, {0.5, 0.5}), b(2, 1, {0.25, 0.75});
  CHECK(sm(a, b) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(sm(a, a) == doctest::Approx(1).epsilon(1e-12));
  SaliencyMap l(2, 1, {1, 0}), r(2, 1, {0, 1});
  CHECK(sm(l, r) == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("auc: perfect separation, chance level, determinism") {
  SaliencyMap p(8, 8, std::vector<double>(64, 0.0));
  FixationSet fix;
  for (int i = 0; i < 5; ++i) {
    p.values[i * 9] = 1.0 - 0.01 * i;
    fix.push_back({i, i});
  }
  CHECK(auc_borji(p, fix, 100, 5) == doctest::Approx(1).epsilon(1e-12));

  Rng rng(64);
  SaliencyMap q = random_map(rng, 64, 64);
  FixationSet f2;
  for (int i = 0; i < 50; ++i)
    f2.push_back({rng.uniform_int(0, 63), rng.uniform_int(0, 63)});
  const double a = auc_borji(q, f2, 100, 11);
  CHECK(a > 0.4);
  CHECK(a < 0.6);
  CHECK(auc_borji(q, f2, 100, 11) == a);  // seeded, bit-stable

  CHECK_THROWS_AS(auc_borji({2, 2, {1, 1, 1, 1}}, {{0, 0}}, 10, 0),
                  ContractError);
}

TEST_CASE("auc hand case: one positive above one sampled negative") {
  // 2x2 map, fixation on the unique max: every sampled negative is strictly
  // below the single threshold, so each split contributes area 1
  SaliencyMap m(2, 2, {0.1, 0.2, 0.3, 0.9});
  CHECK(auc_borji(m, {{1, 1}}, 50, 7) == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("metric oracle suite passes") {
  VerifyReport rep = verify_metrics();
  for (const auto& c : rep.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}
