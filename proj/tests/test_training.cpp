#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mcgan/losses.hpp"
#include "mcgan/training.hpp"

using namespace mcgan;
namespace fs = std::filesystem;

namespace {

TrainConfig small_cfg() {
  TrainConfig cfg;
  cfg.image_size = 32;
  cfg.memory_slots = 4;
  cfg.batch_size = 2;
  cfg.epochs = 1;
  cfg.seed = 7;
  return cfg;
}

std::vector<const Example*> heads(
    const std::map<std::string, std::vector<Example>>& streams, size_t t) {
  std::vector<const Example*> batch;
  for (const auto& [subject, stream] : streams)
    if (t < stream.size()) batch.push_back(&stream[t]);
  return batch;
}

}  // namespace

TEST_CASE("loss functions match hand arithmetic at score 0.5") {
  // d: -mean[log 0.5 + log 0.5] = 2 ln 2; g (lambda=0): -log 0.5 = ln 2
  Tensor half = Tensor::filled({3}, 0.5f);
  CHECK(d_loss_fn(half, half).data()[0] ==
        doctest::Approx(2 * std::log(2.0)).epsilon(1e-5));
  Tensor dummy = Tensor::zeros({3});
  CHECK(g_loss_fn(half, dummy, dummy, 0.0f).data()[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-5));
  // lambda=2 with |fake-real|=1 everywhere adds exactly 2
  Tensor ones = Tensor::filled({3}, 1.0f);
  CHECK(g_loss_fn(half, ones, dummy, 2.0f).data()[0] ==
        doctest::Approx(std::log(2.0) + 2.0).epsilon(1e-5));
}

TEST_CASE("config validation rejects out-of-range fields") {
  TrainConfig cfg = small_cfg();
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.content_weight = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.memory_slots = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config hash tracks architecture, ignores schedule") {
  TrainConfig a = small_cfg(), b = small_cfg();
  b.epochs = 99;
  b.learning_rate = 1.0f;
  CHECK(a.hash() == b.hash());
  b.memory_slots = 8;
  CHECK(a.hash() != b.hash());
  b = small_cfg();
  b.conditional_enabled = false;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("ablation flags shrink the generator input") {
  TrainConfig cfg = small_cfg();
  McGanModel full(cfg);
  CHECK(full.gen_in_channels() == 3 + cfg.n_tasks);
  cfg.conditional_enabled = false;
  McGanModel cgan_off(cfg);
  CHECK(cgan_off.gen_in_channels() == 3);
  cfg.memory_enabled = false;
  McGanModel plain(cfg);
  // no memory: trainable set drops the controller and gate parameters
  CHECK(plain.named_trainable_g().size() < full.named_trainable_g().size());
}

TEST_CASE("train_step enforces per-subject ordinal order") {
  TrainConfig cfg = small_cfg();
  McGanModel model(cfg);
  Trainer tr(model);
  Dataset ds = synthesize_two_task_dataset(2, 2, 32, 3);
  auto streams = order_for_training(ds.examples);

  CHECK_NOTHROW(tr.train_step(heads(streams, 0)));
  CHECK_NOTHROW(tr.train_step(heads(streams, 1)));
  // replaying an already-consumed ordinal breaks the memory-stream contract
  CHECK_THROWS_AS(tr.train_step(heads(streams, 0)), ContractError);
  CHECK_THROWS_AS(tr.train_step({}), ContractError);
}

TEST_CASE("training is deterministic for a fixed seed") {
  Dataset ds = synthesize_two_task_dataset(2, 4, 32, 21);
  std::vector<StepLosses> a, b;
  for (auto* dst : {&a, &b}) {
    McGanModel model(small_cfg());
    Trainer tr(model);
    *dst = tr.run(ds).steps;
  }
  REQUIRE(a.size() == b.size());
  REQUIRE(!a.empty());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].d == b[i].d);
    CHECK(a[i].g == b[i].g);
  }
}

TEST_CASE("checkpoint: save -> load -> save is byte-identical") {
  Dataset ds = synthesize_two_task_dataset(2, 2, 32, 23);
  McGanModel model(small_cfg());
  Trainer tr(model);
  tr.run(ds);

  fs::path d1 = fs::temp_directory_path() / "mcgan_ckpt1";
  fs::path d2 = fs::temp_directory_path() / "mcgan_ckpt2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  save_checkpoint(d1.string(), model, &tr.opt_g, &tr.opt_d);

  Adam og, od;
  McGanModel back = load_checkpoint(d1.string(), &og, &od);
  save_checkpoint(d2.string(), back, &og, &od);

  for (const char* f : {"manifest", "payload.bin"}) {
    std::ifstream a(d1 / f, std::ios::binary), b(d2 / f, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    INFO(f);
    CHECK(sa == sb);
  }

  // the reloaded model predicts identically
  const auto& ex = ds.examples[0];
  SaliencyMap p1 = predict_map(model, ex.image, ex.task, nullptr, false);
  SaliencyMap p2 = predict_map(back, ex.image, ex.task, nullptr, false);
  CHECK(p1.values == p2.values);

  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("checkpoint loading rejects tampering") {
  McGanModel model(small_cfg());
  fs::path dir = fs::temp_directory_path() / "mcgan_ckpt_bad";
  fs::remove_all(dir);
  save_checkpoint(dir.string(), model);

  // truncate the payload
  auto payload = dir / "payload.bin";
  fs::resize_file(payload, fs::file_size(payload) - 16);
  CHECK_THROWS_AS(load_checkpoint(dir.string()), ParseError);

  // corrupt the architecture hash
  save_checkpoint(dir.string(), model);
  {
    std::ifstream in(dir / "manifest");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    auto pos = text.find("hash ");
    REQUIRE(pos != std::string::npos);
    text[pos + 5] = text[pos + 5] == '1' ? '2' : '1';
    std::ofstream out(dir / "manifest");
    out << text;
  }
  CHECK_THROWS_AS(load_checkpoint(dir.string()), ParseError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("run writes a loss csv with one row per step") {
  Dataset ds = synthesize_two_task_dataset(2, 2, 32, 29);
  McGanModel model(small_cfg());
  Trainer tr(model);
  fs::path out = fs::temp_directory_path() / "mcgan_run_csv";
  fs::remove_all(out);
  auto res = tr.run(ds, out.string());

  std::ifstream f(out / "loss.csv");
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);
  CHECK(line == "step,d_loss,g_loss");
  size_t rows = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == res.steps.size());
  CHECK(fs::exists(fs::path(res.checkpoint_dir) / "payload.bin"));
  fs::remove_all(out);
}

TEST_CASE("evaluation reports per-task means over held-out examples") {
  Dataset ds = synthesize_two_task_dataset(2, 2, 32, 31);
  McGanModel model(small_cfg());
  EvalReport rep = evaluate_dataset(model, ds);
  CHECK(rep.rows.size() + rep.skipped == ds.examples.size());
  REQUIRE(rep.task_means.count(0));
  REQUIRE(rep.task_means.count(1));
  for (const auto& [task, row] : rep.task_means) {
    CHECK(row.auc >= 0.0);
    CHECK(row.auc <= 1.0);
    CHECK(row.sm >= 0.0);
    CHECK(row.sm <= 1.0);
  }

  fs::path csv = fs::temp_directory_path() / "mcgan_eval.csv";
  write_eval_csv(rep, csv.string());
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  CHECK(header == "image_id,task,auc,nss,cc,kl,sm");
  fs::remove(csv);
}
