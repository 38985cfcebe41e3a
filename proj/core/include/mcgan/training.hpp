#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcgan/adam.hpp"
#include "mcgan/data.hpp"
#include "mcgan/memory.hpp"
#include "mcgan/metrics.hpp"
#include "mcgan/networks.hpp"

namespace mcgan {

struct TrainConfig {
  int64_t batch_size = 32;
  float learning_rate = 1e-5f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  int64_t epochs = 10;
  float content_weight = 0.0f;  // lambda on the L1 term; 0 = pure adversarial
  bool memory_enabled = true;
  bool conditional_enabled = true;
  uint64_t seed = 0;
  int64_t image_size = 64;
  int64_t memory_slots = 32;  // k
  int64_t n_tasks = 2;
  bool test_time_memory_update = true;

  void validate() const;
  uint64_t hash() const;  // architecture-relevant fields only
};

// Generator, discriminator, memory controller, gate projection and the
// per-subject memory states, built from one config and one seed.
class McGanModel {
 public:
  explicit McGanModel(TrainConfig config);

  TrainConfig cfg;
  Rng rng;
  GeneratorNet gen;
  DiscriminatorNet dis;
  MemoryController mem;
  GateProjection gate;
  std::map<std::string, MemoryState> states;

  int64_t gen_in_channels() const {
    return 3 + (cfg.conditional_enabled ? cfg.n_tasks : 0);
  }

  MemoryState& state_for(const std::string& subject_id);
  void reset_memory();
  void detach_memory();

  // Conditioned input for a batch of examples (label planes only when the
  // conditional path is enabled).
  Tensor make_input(const std::vector<const Example*>& batch) const;
  Tensor make_real(const std::vector<const Example*>& batch) const;

  // Generator output gated per item through each subject's memory.
  // Advances memory states when advance_memory is set.
  Tensor forward_fake(Tensor x_cond, const std::vector<const Example*>& batch,
                      bool train, bool dropout_on, bool advance_memory);

  NamedTensors named_trainable_g() const;  // generator + memory + gate
  NamedTensors named_trainable_d() const;
  NamedTensors named_buffers() const;  // BN running stats + memory states
};

// Predicted saliency map for one image/task, remapped to [0,1].
// `state`, when given, is advanced if advance_memory is set.
SaliencyMap predict_map(McGanModel& model, const std::vector<float>& image,
                        int64_t task, MemoryState* state, bool advance_memory);

struct StepLosses {
  float d = 0, g = 0;
};

class Trainer {
 public:
  explicit Trainer(McGanModel& model);

  // One D update then one G update on a batch of stream heads.
  StepLosses train_step(const std::vector<const Example*>& batch);

  struct RunResult {
    std::vector<StepLosses> steps;
    std::string checkpoint_dir;  // last epoch's checkpoint
  };

  // Epochs over per-subject ordered streams; memory reset at each epoch
  // start; loss CSV and per-epoch checkpoints written when out_dir is set.
  RunResult run(const Dataset& ds, const std::string& out_dir = "");

  McGanModel& model;
  Adam opt_g, opt_d;
};

// Checkpoint directory: `manifest` (text) + `payload.bin` (raw little-endian
// tensors). Round-trips bit-exactly.
void save_checkpoint(const std::string& dir, const McGanModel& model,
                     const Adam* opt_g = nullptr, const Adam* opt_d = nullptr);
McGanModel load_checkpoint(const std::string& dir, Adam* opt_g = nullptr,
                           Adam* opt_d = nullptr);

struct EvalRow {
  std::string image_id;
  std::string subject_id;
  int64_t task = 0;
  double auc = 0, nss = 0, cc = 0, kl = 0, sm = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::map<int64_t, EvalRow> task_means;  // image_id unused
  int64_t skipped = 0;
};

EvalReport evaluate_dataset(McGanModel& model, const Dataset& ds,
                            std::optional<int64_t> task_filter = std::nullopt,
                            uint64_t auc_seed = 1234);

void write_eval_csv(const EvalReport& report, const std::string& path);

}  // namespace mcgan
