#include "mcgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "mcgan/errors.hpp"
#include "mcgan/rng.hpp"

namespace mcgan {

namespace {

void check_fixations(const SaliencyMap& map, const FixationSet& fix,
                     const char* op) {
  if (fix.empty())
    throw ContractError(std::string(op) + ": empty fixation set");
  for (const auto& f : fix)
    if (f.x < 0 || f.x >= map.width || f.y < 0 || f.y >= map.height)
      throw ContractError(std::string(op) + ": fixation (" +
                          std::to_string(f.x) + "," + std::to_string(f.y) +
                          ") out of bounds for " + std::to_string(map.width) +
                          "x" + std::to_string(map.height));
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

SaliencyMap normalize_probability(const SaliencyMap& map) {
  double s = 0;
  for (double v : map.values) {
    if (v < 0)
      throw ContractError("normalize_probability: negative value in map");
    s += v;
  }
  if (s <= 0)
    throw ContractError("normalize_probability: degenerate all-zero map");
  SaliencyMap out = map;
  for (double& v : out.values) v /= s;
  out.variant = MapVariant::probability;
  return out;
}

SaliencyMap normalize_zscore(const SaliencyMap& map) {
  const double mu = mean_of(map.values);
  double s2 = 0;
  for (double v : map.values) s2 += (v - mu) * (v - mu);
  const double sigma = std::sqrt(s2 / static_cast<double>(map.values.size()));
  if (sigma <= 1e-12)
    throw ContractError("normalize_zscore: degenerate constant map");
  SaliencyMap out = map;
  for (double& v : out.values) v = (v - mu) / sigma;
  out.variant = MapVariant::zscored;
  return out;
}

double nss(const SaliencyMap& pred, const FixationSet& fix) {
  check_fixations(pred, fix, "nss");
  SaliencyMap z = normalize_zscore(pred);
  double s = 0;
  for (const auto& f : fix) s += z.at(f.x, f.y);
  return s / static_cast<double>(fix.size());
}

double cc(const SaliencyMap& pred, const SaliencyMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ContractError("cc: map sizes differ");
  const int64_t n = pred.pixels();
  const double mp = mean_of(pred.values), mg = mean_of(gt.values);
  double cov = 0, vp = 0, vg = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double a = pred.values[i] - mp, b = gt.values[i] - mg;
    cov += a * b;
    vp += a * a;
    vg += b * b;
  }
  if (vp <= 0 || vg <= 0) throw ContractError("cc: degenerate constant map");
  return cov / std::sqrt(vp * vg);
}

double kl(const SaliencyMap& pred, const SaliencyMap& gt, bool swap_args) {
  const SaliencyMap p = normalize_probability(swap_args ? gt : pred);
  const SaliencyMap q = normalize_probability(swap_args ? pred : gt);
  if (p.pixels() != q.pixels()) throw ContractError("kl: map sizes differ");
  constexpr double eps = 1e-12;
  double s = 0;
  for (int64_t i = 0; i < p.pixels(); ++i)
    s += (p.values[i] + eps) * std::log((p.values[i] + eps) / (q.values[i] + eps));
  return s;
}

double sm(const SaliencyMap& pred, const SaliencyMap& gt) {
  const SaliencyMap p = normalize_probability(pred);
  const SaliencyMap q = normalize_probability(gt);
  if (p.pixels() != q.pixels()) throw ContractError("sm: map sizes differ");
  double s = 0;
  for (int64_t i = 0; i < p.pixels(); ++i)
    s += std::min(p.values[i], q.values[i]);
  return s;
}

double auc_borji(const SaliencyMap& pred, const FixationSet& fix, int n_splits,
                 uint64_t seed) {
  check_fixations(pred, fix, "auc_borji");
  const int64_t n_pix = pred.pixels();
  if (static_cast<int64_t>(fix.size()) > n_pix)
    throw ContractError("auc_borji: more fixations than pixels");
  {
    double lo = pred.values[0], hi = pred.values[0];
    for (double v : pred.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo <= 1e-12)
      throw ContractError("auc_borji: degenerate constant map");
  }

  std::vector<double> pos;
  std::set<int64_t> fixated;
  for (const auto& f : fix) {
    pos.push_back(pred.at(f.x, f.y));
    fixated.insert(f.y * pred.width + f.x);
  }
  std::vector<int64_t> non_fixated;
  non_fixated.reserve(n_pix - fixated.size());
  for (int64_t i = 0; i < n_pix; ++i)
    if (!fixated.count(i)) non_fixated.push_back(i);
  if (non_fixated.empty())
    throw ContractError("auc_borji: no non-fixated pixels to sample");

  // thresholds: the positive saliency values, swept descending
  std::vector<double> thresholds = pos;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  Rng rng(seed);
  const double np = static_cast<double>(pos.size());
  double total = 0;
  for (int split = 0; split < n_splits; ++split) {
    std::vector<double> negs;
    for (size_t i = 0; i < pos.size(); ++i) {
      const int64_t pick =
          rng.uniform_int(0, static_cast<int64_t>(non_fixated.size()) - 1);
      negs.push_back(pred.values[non_fixated[pick]]);
    }
    // trapezoidal ROC area over (fpr, tpr), from (0,0) to (1,1)
    double area = 0, prev_fpr = 0, prev_tpr = 0;
    for (double th : thresholds) {
      int64_t tp = 0, fp = 0;
      for (double v : pos) tp += v >= th;
      for (double v : negs) fp += v >= th;
      const double tpr = tp / np;
      const double fpr = fp / static_cast<double>(negs.size());
      area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
      prev_fpr = fpr;
      prev_tpr = tpr;
    }
    area += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
    total += area;
  }
  return total / static_cast<double>(n_splits);
}

}  // namespace mcgan
