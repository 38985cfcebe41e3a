#pragma once

#include <cstdint>

#include "mcgan/saliency_map.hpp"

namespace mcgan {

// Normalization variants used by the metrics.
SaliencyMap normalize_probability(const SaliencyMap& map);
SaliencyMap normalize_zscore(const SaliencyMap& map);

// Mean z-scored prediction value at the fixation locations.
double nss(const SaliencyMap& pred, const FixationSet& fix);

// Pearson correlation over pixels (population standard deviation).
double cc(const SaliencyMap& pred, const SaliencyMap& gt);

// KL divergence, prediction-led argument order, natural log, eps-smoothed.
// `swap_args` flips to the conventional gt-led order.
double kl(const SaliencyMap& pred, const SaliencyMap& gt,
          bool swap_args = false);

// Histogram intersection of the probability-normalized maps.
double sm(const SaliencyMap& pred, const SaliencyMap& gt);

// AUC-Borji: fixated pixels as positives, per-split uniformly sampled
// non-fixated pixels as negatives, trapezoidal ROC area, mean over splits.
double auc_borji(const SaliencyMap& pred, const FixationSet& fix,
                 int n_splits = 100, uint64_t seed = 0);

}  // namespace mcgan
