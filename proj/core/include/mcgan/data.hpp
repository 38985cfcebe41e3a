#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcgan/saliency_map.hpp"

namespace mcgan {

// One gaze sample. `ordinal` is the presentation index of the example within
// its subject's stream; all samples of one presentation share it.
struct FixationRecord {
  std::string image_id;
  std::string subject_id;
  int64_t task_id = 0;
  int64_t x = 0, y = 0;
  int64_t ordinal = 0;
};

// One training/evaluation example.
struct Example {
  std::string image_id;
  std::string subject_id;
  int64_t task = 0;
  int64_t ordinal = 0;
  int64_t size = 0;                // square H == W
  std::vector<float> image;        // 3 * size * size, values in [0,1]
  SaliencyMap gt;                  // raw variant, max-normalized
  FixationSet fixations;
};

struct Dataset {
  int64_t image_size = 0;
  int64_t n_tasks = 2;
  std::vector<Example> examples;
};

// CSV with header image_id,subject_id,task_id,x,y,ordinal.
std::vector<FixationRecord> load_fixations(const std::string& csv_path);

// Sum of unit-height Gaussians at the fixations, truncated at 3*sigma,
// max-normalized. Empty input yields an all-zero (degenerate) map.
// sigma <= 0 selects the default 0.04 * width.
SaliencyMap build_gt_map(const FixationSet& fixations, int64_t width,
                         int64_t height, double sigma = 0.0);

// Ordinal-sorted stream per subject, keyed by subject id. Gaps or duplicate
// ordinals within a subject are contract errors.
std::map<std::string, std::vector<Example>> order_for_training(
    const std::vector<Example>& examples);

// Desk-scale two-task dataset: every image holds one bright blob in the top
// half and one in the bottom half; task 0 attends the top blob, task 1 the
// bottom one. Each subject carries a fixed, seeded GT-center jitter.
// `jitter_seed` defaults to `seed`; keeping it fixed across differently
// seeded calls yields train/test splits with consistent subject behaviour.
Dataset synthesize_two_task_dataset(int64_t n_subjects, int64_t n_images,
                                    int64_t size, uint64_t seed,
                                    int64_t jitter_seed = -1);

// Bilinear resizes. Maps are renormalized back to max 1 afterwards.
std::vector<float> resize_image(const std::vector<float>& rgb, int64_t w,
                                int64_t h, int64_t tw, int64_t th);
SaliencyMap resize_map(const SaliencyMap& map, int64_t tw, int64_t th);
Fixation resize_fixation(const Fixation& f, int64_t w, int64_t h, int64_t tw,
                         int64_t th);

// Directory layout: images/<image_id>.png, maps/<subject>_<ordinal>.png,
// fixations.csv, meta.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace mcgan
