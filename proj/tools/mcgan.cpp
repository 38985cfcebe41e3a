// Command-line front end: train, eval, predict, synth, activations, verify.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcgan/data.hpp"
#include "mcgan/png_io.hpp"
#include "mcgan/training.hpp"
#include "mcgan/verify.hpp"

namespace fs = std::filesystem;
using namespace mcgan;

namespace {

// Text memory-state sidecar for predict: lets a caller advance one subject's
// memory across invocations.
void save_state_file(const std::string& path, const MemoryState& st) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write memory state " + path);
  f << "mcgan-state 1 " << st.subject_id << " " << st.last_ordinal << " "
    << st.M.shape()[0] << " " << st.M.shape()[1] << "\n";
  auto dump = [&](const Tensor& t) {
    for (float v : t.data()) f << v << " ";
    f << "\n";
  };
  dump(st.M);
  dump(st.read_h);
  dump(st.read_c);
  dump(st.write_h);
  dump(st.write_c);
}

MemoryState load_state_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read memory state " + path);
  std::string magic;
  int version = 0;
  std::string subject;
  int64_t last = 0, k = 0, l = 0;
  f >> magic >> version >> subject >> last >> k >> l;
  if (magic != "mcgan-state" || version != 1)
    throw ParseError("unsupported memory state file " + path);
  MemoryState st(MemoryConfig{k, l}, subject);
  st.last_ordinal = last;
  auto slurp = [&](Tensor& t) {
    for (float& v : t.data())
      if (!(f >> v)) throw ParseError("truncated memory state file " + path);
  };
  slurp(st.M);
  slurp(st.read_h);
  slurp(st.read_c);
  slurp(st.write_h);
  slurp(st.write_c);
  return st;
}

std::vector<float> load_image_for(const McGanModel& model,
                                  const std::string& path) {
  PngImage img = read_png(path);
  std::vector<float> rgb(img.width * img.height * 3);
  for (int64_t i = 0; i < img.width * img.height; ++i)
    for (int c = 0; c < 3; ++c)
      rgb[c * img.width * img.height + i] =
          img.pixels[i * img.channels + (img.channels == 3 ? c : 0)] / 255.0f;
  if (img.width != model.cfg.image_size || img.height != model.cfg.image_size)
    rgb = resize_image(rgb, img.width, img.height, model.cfg.image_size,
                       model.cfg.image_size);
  return rgb;
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--size", cfg.image_size, "input size (power of two)")
      ->envname("MCGAN_SIZE");
  cmd->add_option("--epochs", cfg.epochs)->envname("MCGAN_EPOCHS");
  cmd->add_option("--batch", cfg.batch_size)->envname("MCGAN_BATCH");
  cmd->add_option("--lr", cfg.learning_rate)->envname("MCGAN_LR");
  cmd->add_option("--lambda", cfg.content_weight, "L1 content-loss weight")
      ->envname("MCGAN_LAMBDA");
  cmd->add_option("--seed", cfg.seed)->envname("MCGAN_SEED");
  cmd->add_option("--tasks", cfg.n_tasks)->envname("MCGAN_TASKS");
  cmd->add_option("--slots", cfg.memory_slots, "memory slots k")
      ->envname("MCGAN_SLOTS");
  cmd->add_flag("--memory,!--no-memory", cfg.memory_enabled,
                "memory-augmented path (MC-GAN vs cGAN)");
  cmd->add_flag("--conditional,!--no-conditional", cfg.conditional_enabled,
                "task-label conditioning (cGAN vs GAN)");
  cmd->add_flag("--test-memory-update,!--no-test-memory-update",
                cfg.test_time_memory_update,
                "advance memory states during evaluation");
}

// CLI11 processes config files only on the top-level app, so a subcommand's
// --config is applied by hand: keys resolve against that subcommand's own
// options (e.g. epochs=30); command-line flags and environment variables win.
void apply_config(CLI::App& app, CLI::App* sub) {
  CLI::Option* copt = sub->get_config_ptr();
  if (copt == nullptr || copt->count() == 0) return;
  const auto path = copt->as<std::string>();
  for (const CLI::ConfigItem& item :
       app.get_config_formatter()->from_file(path)) {
    CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr)
      throw CLI::ConfigError("unknown key '" + item.name + "' in " + path);
    if (opt->count() > 0) continue;
    for (const std::string& v : item.inputs) opt->add_result(v);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-augmented conditional GAN for task-specific saliency"};
  app.require_subcommand(1);
  bool deterministic = false;
  app.add_flag("--deterministic", deterministic,
               "assert fully seeded execution (always on; accepted for "
               "script compatibility)");

  TrainConfig cfg;
  std::string dataset_dir, out_dir = "out", checkpoint_dir, image_path;
  std::string out_csv = "eval.csv", out_png = "pred.png", state_path;
  std::string suite = "all", out_prefix = "activation";
  int64_t task = 0;
  int64_t task_filter = -1;
  std::vector<int64_t> layers;
  int64_t n_subjects = 4, n_images = 64, jitter_seed = -1;

  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--dataset", dataset_dir)->required()->envname("MCGAN_DATASET");
  train->add_option("--out", out_dir, "output dir (checkpoint + loss.csv)");
  add_train_flags(train, cfg);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_dir)->required();
  eval_cmd->add_option("--dataset", dataset_dir)->required();
  eval_cmd->add_option("--out", out_csv, "per-image metrics CSV");
  eval_cmd->add_option("--task", task_filter, "restrict to one task id");

  CLI::App* predict = app.add_subcommand("predict", "predict one saliency map");
  predict->add_option("--checkpoint", checkpoint_dir)->required();
  predict->add_option("--image", image_path)->required();
  predict->add_option("--task", task);
  predict->add_option("--out", out_png);
  predict->add_option("--memory-state", state_path,
                      "subject state file to load, advance and save back");

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--subjects", n_subjects);
  synth->add_option("--images", n_images);
  synth->add_option("--size", cfg.image_size);
  synth->add_option("--seed", cfg.seed);
  synth->add_option("--jitter-seed", jitter_seed,
                    "subject-jitter seed (default: --seed)");

  CLI::App* act = app.add_subcommand("activations",
                                     "export generator activation heatmaps");
  act->add_option("--checkpoint", checkpoint_dir)->required();
  act->add_option("--image", image_path)->required();
  act->add_option("--task", task);
  act->add_option("--layer", layers, "1-based conv layer ids (default 2, n-2)");
  act->add_option("--out-prefix", out_prefix);

  CLI::App* verify = app.add_subcommand("verify", "run the oracle suites");
  verify->add_option("suite", suite)
      ->check(CLI::IsMember({"gradients", "metrics", "memory", "all"}));

  for (CLI::App* s : {train, eval_cmd, predict, synth, act, verify})
    s->set_config("--config", "",
                  "key=value config file; flags take precedence");

  try {
    app.parse(argc, argv);
    for (CLI::App* s : app.get_subcommands()) apply_config(app, s);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage errors exit 2
  }

  try {
    if (*train) {
      Dataset ds = load_dataset(dataset_dir);
      cfg.image_size = ds.image_size;
      cfg.n_tasks = ds.n_tasks;
      McGanModel model(cfg);
      Trainer trainer(model);
      auto res = trainer.run(ds, out_dir);
      std::printf("checkpoint: %s\n", res.checkpoint_dir.c_str());
    } else if (*eval_cmd) {
      McGanModel model = load_checkpoint(checkpoint_dir);
      Dataset ds = load_dataset(dataset_dir);
      if (ds.image_size != model.cfg.image_size)
        throw ConfigError("dataset size " + std::to_string(ds.image_size) +
                          " does not match checkpoint size " +
                          std::to_string(model.cfg.image_size));
      std::optional<int64_t> filter;
      if (task_filter >= 0) filter = task_filter;
      EvalReport rep = evaluate_dataset(model, ds, filter);
      write_eval_csv(rep, out_csv);
      for (auto& [t, m] : rep.task_means)
        std::printf("task %lld: auc %.4f nss %.4f cc %.4f kl %.4f sm %.4f\n",
                    static_cast<long long>(t), m.auc, m.nss, m.cc, m.kl, m.sm);
      if (rep.skipped)
        std::printf("skipped %lld examples with degenerate maps\n",
                    static_cast<long long>(rep.skipped));
    } else if (*predict) {
      McGanModel model = load_checkpoint(checkpoint_dir);
      std::vector<float> rgb = load_image_for(model, image_path);
      MemoryState st = state_path.empty() || !fs::exists(state_path)
                           ? MemoryState(model.mem.cfg, "cli")
                           : load_state_file(state_path);
      SaliencyMap map =
          predict_map(model, rgb, task, &st, !state_path.empty());
      write_gray_png(out_png, map.width, map.height, map.values);
      if (!state_path.empty()) save_state_file(state_path, st);
      std::printf("wrote %s\n", out_png.c_str());
    } else if (*synth) {
      Dataset ds = synthesize_two_task_dataset(n_subjects, n_images,
                                               cfg.image_size, cfg.seed,
                                               jitter_seed);
      save_dataset(out_dir, ds);
      std::printf("wrote %zu examples to %s\n", ds.examples.size(),
                  out_dir.c_str());
    } else if (*act) {
      McGanModel model = load_checkpoint(checkpoint_dir);
      std::vector<float> rgb = load_image_for(model, image_path);
      const int64_t s = model.cfg.image_size;
      Tensor img = Tensor::from({1, 3, s, s}, rgb);
      Tensor x = model.cfg.conditional_enabled
                     ? condition_input(img, {task}, model.cfg.n_tasks)
                     : img;
      if (layers.empty()) {
        const int64_t n_convs = 2 * model.gen.n_stages;  // enc + dec + final
        layers = {2, n_convs - 2};
      }
      for (int64_t layer : layers) {
        std::vector<float> heat = export_activation(model.gen, x, layer,
                                                    model.rng);
        std::vector<double> v(heat.begin(), heat.end());
        const std::string path =
            out_prefix + "_l" + std::to_string(layer) + ".png";
        write_gray_png(path, s, s, v);
        std::printf("wrote %s\n", path.c_str());
      }
    } else if (*verify) {
      std::vector<VerifyReport> reports;
      if (suite == "all") {
        reports = verify_all();
      } else if (suite == "gradients") {
        reports = {verify_gradients()};
      } else if (suite == "metrics") {
        reports = {verify_metrics()};
      } else {
        reports = {verify_memory()};
      }
      if (!print_reports(reports)) return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
