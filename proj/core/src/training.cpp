#include "mcgan/training.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcgan/losses.hpp"

namespace fs = std::filesystem;

namespace mcgan {

namespace {

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (content_weight < 0) throw ConfigError("content_weight must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (n_tasks < 1) throw ConfigError("n_tasks must be >= 1");
  if (memory_slots < 1) throw ConfigError("memory_slots must be >= 1");
  log2_exact(image_size, "image_size");
}

uint64_t TrainConfig::hash() const {
  std::ostringstream os;
  os << "image_size=" << image_size << ";memory_slots=" << memory_slots
     << ";n_tasks=" << n_tasks << ";memory_enabled=" << memory_enabled
     << ";conditional_enabled=" << conditional_enabled;
  return fnv1a64(os.str());
}

McGanModel::McGanModel(TrainConfig config) : cfg(config), rng(config.seed) {
  cfg.validate();
  gen = GeneratorNet(cfg.image_size, gen_in_channels(), rng);
  dis = DiscriminatorNet(cfg.image_size, gen_in_channels() + 1, rng);
  mem = MemoryController(MemoryConfig{cfg.memory_slots, 100}, rng);
  gate = GateProjection(cfg.image_size, cfg.image_size, 100, rng);
}

MemoryState& McGanModel::state_for(const std::string& subject_id) {
  auto it = states.find(subject_id);
  if (it == states.end())
    it = states.emplace(subject_id, MemoryState(mem.cfg, subject_id)).first;
  return it->second;
}

void McGanModel::reset_memory() {
  for (auto& [id, st] : states) st.reset();
}

void McGanModel::detach_memory() {
  for (auto& [id, st] : states) st.detach();
}

Tensor McGanModel::make_input(const std::vector<const Example*>& batch) const {
  const int64_t n = static_cast<int64_t>(batch.size());
  const int64_t s = cfg.image_size;
  Tensor img = Tensor::zeros({n, 3, s, s});
  std::vector<int64_t> labels;
  for (int64_t i = 0; i < n; ++i) {
    const Example& ex = *batch[i];
    if (ex.size != s)
      throw ShapeError("train: example " + ex.image_id + " has size " +
                       std::to_string(ex.size) + ", model expects " +
                       std::to_string(s));
    std::copy(ex.image.begin(), ex.image.end(),
              img.data().begin() + i * 3 * s * s);
    labels.push_back(ex.task);
  }
  return cfg.conditional_enabled ? condition_input(img, labels, cfg.n_tasks)
                                 : img;
}

Tensor McGanModel::make_real(const std::vector<const Example*>& batch) const {
  const int64_t n = static_cast<int64_t>(batch.size());
  const int64_t s = cfg.image_size;
  Tensor real = Tensor::zeros({n, 1, s, s});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < s * s; ++j)
      real.data()[i * s * s + j] =
          2.0f * static_cast<float>(batch[i]->gt.values[j]) - 1.0f;
  return real;
}

Tensor McGanModel::forward_fake(Tensor x_cond,
                                const std::vector<const Example*>& batch,
                                bool train, bool dropout_on,
                                bool advance_memory) {
  Tensor o = gen.forward(x_cond, train, dropout_on, rng);
  if (!cfg.memory_enabled) return o;
  std::vector<Tensor> gated;
  for (size_t i = 0; i < batch.size(); ++i) {
    Tensor oi = slice0(o, static_cast<int64_t>(i));
    MemoryState& st = state_for(batch[i]->subject_id);
    MemoryReadout r = memory_step(mem, st, oi, advance_memory);
    gated.push_back(apply_memory_gate(oi, r.gate, gate));
  }
  return stack0(gated);
}

NamedTensors McGanModel::named_trainable_g() const {
  NamedTensors out;
  gen.collect("gen", out);
  if (cfg.memory_enabled) {
    mem.collect("mem", out);
    gate.collect("gate", out);
  }
  // drop BN buffers; they live in named_buffers()
  NamedTensors trainable;
  for (auto& [name, t] : out)
    if (name.find("running_") == std::string::npos)
      trainable.emplace_back(name, t);
  return trainable;
}

NamedTensors McGanModel::named_trainable_d() const {
  NamedTensors out;
  dis.collect("dis", out);
  NamedTensors trainable;
  for (auto& [name, t] : out)
    if (name.find("running_") == std::string::npos)
      trainable.emplace_back(name, t);
  return trainable;
}

NamedTensors McGanModel::named_buffers() const {
  NamedTensors all, buffers;
  gen.collect("gen", all);
  dis.collect("dis", all);
  for (auto& [name, t] : all)
    if (name.find("running_") != std::string::npos)
      buffers.emplace_back(name, t);
  for (auto& [id, st] : states) {
    const std::string p = "state." + id;
    buffers.emplace_back(p + ".M", st.M);
    buffers.emplace_back(p + ".read_h", st.read_h);
    buffers.emplace_back(p + ".read_c", st.read_c);
    buffers.emplace_back(p + ".write_h", st.write_h);
    buffers.emplace_back(p + ".write_c", st.write_c);
    buffers.emplace_back(p + ".last_ordinal",
                         Tensor::filled({1}, static_cast<float>(st.last_ordinal)));
  }
  return buffers;
}

SaliencyMap predict_map(McGanModel& model, const std::vector<float>& image,
                        int64_t task, MemoryState* state,
                        bool advance_memory) {
  NoGradGuard ng;
  const int64_t s = model.cfg.image_size;
  if (static_cast<int64_t>(image.size()) != 3 * s * s)
    throw ShapeError("predict: image buffer does not match model size " +
                     std::to_string(s));
  Tensor img = Tensor::from({1, 3, s, s}, image);
  Tensor x = model.cfg.conditional_enabled
                 ? condition_input(img, {task}, model.cfg.n_tasks)
                 : img;
  Tensor o = model.gen.forward(x, /*train=*/false, /*dropout_on=*/false,
                               model.rng);
  Tensor out = slice0(o, 0);
  if (model.cfg.memory_enabled) {
    MemoryState fresh(model.mem.cfg, "anonymous");
    MemoryState& st = state ? *state : fresh;
    MemoryReadout r = memory_step(model.mem, st, out, advance_memory);
    out = apply_memory_gate(out, r.gate, model.gate);
  }
  SaliencyMap map(s, s, std::vector<double>(s * s));
  for (int64_t i = 0; i < s * s; ++i)
    map.values[i] = (static_cast<double>(out.data()[i]) + 1.0) / 2.0;
  return map;
}

Trainer::Trainer(McGanModel& m)
    : model(m),
      opt_g(m.cfg.learning_rate, m.cfg.beta1, m.cfg.beta2),
      opt_d(m.cfg.learning_rate, m.cfg.beta1, m.cfg.beta2) {
  for (auto& [name, t] : model.named_trainable_g()) {
    t.grad();  // ensure allocated so untouched params update as zero-grad
    opt_g.add_param(t);
  }
  for (auto& [name, t] : model.named_trainable_d()) {
    t.grad();
    opt_d.add_param(t);
  }
}

StepLosses Trainer::train_step(const std::vector<const Example*>& batch) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const TrainConfig& cfg = model.cfg;

  if (cfg.memory_enabled) {
    for (const Example* ex : batch) {
      MemoryState& st = model.state_for(ex->subject_id);
      if (ex->ordinal <= st.last_ordinal)
        throw ContractError("train_step: out-of-order ordinal " +
                            std::to_string(ex->ordinal) + " for subject " +
                            ex->subject_id + " (last seen " +
                            std::to_string(st.last_ordinal) + ")");
      st.last_ordinal = ex->ordinal;
    }
  }

  Tensor x_cond = model.make_input(batch);
  Tensor real = model.make_real(batch);
  Tensor fake = model.forward_fake(x_cond, batch, /*train=*/true,
                                   /*dropout_on=*/true, /*advance_memory=*/true);

  // discriminator update on real + detached fake
  Tensor s_real = model.dis.forward(x_cond, real, /*train=*/true);
  Tensor s_fake = model.dis.forward(x_cond, fake.detach(), /*train=*/true);
  Tensor dl = d_loss_fn(s_real, s_fake);
  backward(dl);
  opt_d.step();

  // generator update (memory controllers and gate included via the graph)
  Tensor s_fake2 = model.dis.forward(x_cond, fake, /*train=*/true);
  Tensor gl = g_loss_fn(s_fake2, fake, real, cfg.content_weight);
  backward(gl);
  opt_g.step();
  for (auto p : opt_d.params()) p.zero_grad();  // grads picked up via s_fake2

  model.detach_memory();
  return {dl.item(), gl.item()};
}

Trainer::RunResult Trainer::run(const Dataset& ds, const std::string& out_dir) {
  if (ds.examples.empty()) throw ConfigError("run_training: empty dataset");
  auto stream_map = order_for_training(ds.examples);
  std::vector<const std::vector<Example>*> streams;
  for (auto& [subject, stream] : stream_map) streams.push_back(&stream);

  std::ofstream csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    csv.open(fs::path(out_dir) / "loss.csv");
    csv << "step,d_loss,g_loss\n";
  }

  RunResult res;
  int64_t step = 0;
  for (int64_t epoch = 0; epoch < model.cfg.epochs; ++epoch) {
    model.reset_memory();
    double ed = 0, eg = 0;
    int64_t esteps = 0;
    for (size_t g0 = 0; g0 < streams.size();
         g0 += static_cast<size_t>(model.cfg.batch_size)) {
      const size_t g1 = std::min(
          streams.size(), g0 + static_cast<size_t>(model.cfg.batch_size));
      size_t max_len = 0;
      for (size_t i = g0; i < g1; ++i)
        max_len = std::max(max_len, streams[i]->size());
      for (size_t t = 0; t < max_len; ++t) {
        std::vector<const Example*> batch;
        for (size_t i = g0; i < g1; ++i)
          if (t < streams[i]->size()) batch.push_back(&(*streams[i])[t]);
        StepLosses losses = train_step(batch);
        res.steps.push_back(losses);
        ed += losses.d;
        eg += losses.g;
        ++esteps;
        ++step;
        if (csv.is_open())
          csv << step << "," << fmt_float(losses.d) << ","
              << fmt_float(losses.g) << "\n";
      }
    }
    std::printf("epoch %lld: mean d_loss %.6f, mean g_loss %.6f (%lld steps)\n",
                static_cast<long long>(epoch + 1), ed / std::max<int64_t>(1, esteps),
                eg / std::max<int64_t>(1, esteps), static_cast<long long>(esteps));
    std::fflush(stdout);
    if (!out_dir.empty()) {
      res.checkpoint_dir = (fs::path(out_dir) / "checkpoint").string();
      save_checkpoint(res.checkpoint_dir, model, &opt_g, &opt_d);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// checkpointing

namespace {

std::string config_lines(const TrainConfig& c) {
  std::ostringstream os;
  os << "config batch_size=" << c.batch_size << "\n";
  os << "config learning_rate=" << fmt_float(c.learning_rate) << "\n";
  os << "config beta1=" << fmt_float(c.beta1) << "\n";
  os << "config beta2=" << fmt_float(c.beta2) << "\n";
  os << "config epochs=" << c.epochs << "\n";
  os << "config content_weight=" << fmt_float(c.content_weight) << "\n";
  os << "config memory_enabled=" << c.memory_enabled << "\n";
  os << "config conditional_enabled=" << c.conditional_enabled << "\n";
  os << "config seed=" << c.seed << "\n";
  os << "config image_size=" << c.image_size << "\n";
  os << "config memory_slots=" << c.memory_slots << "\n";
  os << "config n_tasks=" << c.n_tasks << "\n";
  os << "config test_time_memory_update=" << c.test_time_memory_update << "\n";
  return os.str();
}

NamedTensors checkpoint_tensors(const McGanModel& model, const Adam* opt_g,
                                const Adam* opt_d) {
  NamedTensors all = model.named_trainable_g();
  for (auto& nt : model.named_trainable_d()) all.push_back(nt);
  for (auto& nt : model.named_buffers()) all.push_back(nt);
  auto add_moments = [&](const Adam* opt, const NamedTensors& named,
                         const std::string& prefix) {
    if (!opt) return;
    Adam* o = const_cast<Adam*>(opt);
    for (auto& [name, t] : named) {
      all.emplace_back(prefix + "." + name + ".m",
                       Tensor::from(t.shape(), o->moment1(t)));
      all.emplace_back(prefix + "." + name + ".v",
                       Tensor::from(t.shape(), o->moment2(t)));
    }
  };
  add_moments(opt_g, model.named_trainable_g(), "opt_g");
  add_moments(opt_d, model.named_trainable_d(), "opt_d");
  return all;
}

}  // namespace

void save_checkpoint(const std::string& dir, const McGanModel& model,
                     const Adam* opt_g, const Adam* opt_d) {
  fs::create_directories(dir);
  NamedTensors all = checkpoint_tensors(model, opt_g, opt_d);

  std::ostringstream manifest;
  manifest << "mcgan-checkpoint 1\n";
  manifest << config_lines(model.cfg);
  manifest << "hash " << model.cfg.hash() << "\n";
  manifest << "opt_g_step " << (opt_g ? opt_g->step_count() : 0) << "\n";
  manifest << "opt_d_step " << (opt_d ? opt_d->step_count() : 0) << "\n";
  int64_t offset = 0;
  for (auto& [name, t] : all) {
    manifest << "tensor " << name << " float32 ";
    if (t.shape().empty()) {
      manifest << "-";
    } else {
      for (size_t d = 0; d < t.shape().size(); ++d)
        manifest << (d ? "," : "") << t.shape()[d];
    }
    manifest << " " << offset << "\n";
    offset += t.numel() * static_cast<int64_t>(sizeof(float));
  }

  {
    std::ofstream mf(fs::path(dir) / "manifest");
    mf << manifest.str();
  }
  std::ofstream pf(fs::path(dir) / "payload.bin", std::ios::binary);
  for (auto& [name, t] : all)
    pf.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

McGanModel load_checkpoint(const std::string& dir, Adam* opt_g, Adam* opt_d) {
  std::ifstream mf(fs::path(dir) / "manifest");
  if (!mf) throw IoError("load_checkpoint: no manifest in " + dir);
  std::string line;
  if (!std::getline(mf, line) || line != "mcgan-checkpoint 1")
    throw ParseError("load_checkpoint: unsupported checkpoint version: " + line);

  TrainConfig cfg;
  uint64_t stored_hash = 0;
  int64_t g_step = 0, d_step = 0;
  struct Entry {
    std::string name;
    Shape shape;
    int64_t offset;
  };
  std::vector<Entry> entries;
  while (std::getline(mf, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "config") {
      std::string kv;
      ls >> kv;
      auto eq = kv.find('=');
      const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "batch_size") cfg.batch_size = std::stoll(v);
      else if (k == "learning_rate") cfg.learning_rate = std::stof(v);
      else if (k == "beta1") cfg.beta1 = std::stof(v);
      else if (k == "beta2") cfg.beta2 = std::stof(v);
      else if (k == "epochs") cfg.epochs = std::stoll(v);
      else if (k == "content_weight") cfg.content_weight = std::stof(v);
      else if (k == "memory_enabled") cfg.memory_enabled = v == "1";
      else if (k == "conditional_enabled") cfg.conditional_enabled = v == "1";
      else if (k == "seed") cfg.seed = std::stoull(v);
      else if (k == "image_size") cfg.image_size = std::stoll(v);
      else if (k == "memory_slots") cfg.memory_slots = std::stoll(v);
      else if (k == "n_tasks") cfg.n_tasks = std::stoll(v);
      else if (k == "test_time_memory_update") cfg.test_time_memory_update = v == "1";
      else throw ParseError("load_checkpoint: unknown config key " + k);
    } else if (kind == "hash") {
      ls >> stored_hash;
    } else if (kind == "opt_g_step") {
      ls >> g_step;
    } else if (kind == "opt_d_step") {
      ls >> d_step;
    } else if (kind == "tensor") {
      Entry e;
      std::string dtype, shape_s;
      ls >> e.name >> dtype >> shape_s >> e.offset;
      if (dtype != "float32")
        throw ParseError("load_checkpoint: unsupported dtype " + dtype);
      if (shape_s != "-") {
        std::stringstream ss(shape_s);
        std::string d;
        while (std::getline(ss, d, ',')) e.shape.push_back(std::stoll(d));
      }
      entries.push_back(std::move(e));
    } else if (!kind.empty()) {
      throw ParseError("load_checkpoint: bad manifest line: " + line);
    }
  }
  if (cfg.hash() != stored_hash)
    throw ParseError("load_checkpoint: config hash mismatch");

  McGanModel model(cfg);
  // instantiate memory states named in the manifest
  for (const auto& e : entries) {
    if (e.name.rfind("state.", 0) == 0) {
      const std::string rest = e.name.substr(6);
      model.state_for(rest.substr(0, rest.rfind('.')));
    }
  }

  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : model.named_trainable_g()) by_name.emplace(name, t);
  for (auto& [name, t] : model.named_trainable_d()) by_name.emplace(name, t);
  for (auto& [name, t] : model.named_buffers()) by_name.emplace(name, t);

  std::ifstream pf(fs::path(dir) / "payload.bin", std::ios::binary);
  if (!pf) throw IoError("load_checkpoint: no payload.bin in " + dir);
  pf.seekg(0, std::ios::end);
  const int64_t payload_size = pf.tellg();

  int64_t expected = 0;
  for (const auto& e : entries)
    expected += shape_numel(e.shape) * static_cast<int64_t>(sizeof(float));
  if (payload_size != expected)
    throw ParseError("load_checkpoint: payload size " +
                     std::to_string(payload_size) + " does not match manifest (" +
                     std::to_string(expected) + ")");

  auto read_into = [&](const Entry& e, std::vector<float>& dst) {
    pf.seekg(e.offset);
    pf.read(reinterpret_cast<char*>(dst.data()),
            static_cast<std::streamsize>(dst.size() * sizeof(float)));
    if (!pf) throw IoError("load_checkpoint: short read for " + e.name);
  };

  std::map<std::string, Entry> moment_entries;
  for (const auto& e : entries) {
    if (e.name.rfind("opt_g.", 0) == 0 || e.name.rfind("opt_d.", 0) == 0) {
      moment_entries.emplace(e.name, e);
      continue;
    }
    auto it = by_name.find(e.name);
    if (it == by_name.end())
      throw ParseError("load_checkpoint: unknown tensor " + e.name);
    if (it->second.shape() != e.shape)
      throw ParseError("load_checkpoint: shape mismatch for " + e.name);
    read_into(e, it->second.data());
  }

  // last_ordinal rides in a buffer tensor
  for (auto& [id, st] : model.states) {
    auto it = by_name.find("state." + id + ".last_ordinal");
    if (it != by_name.end())
      st.last_ordinal = static_cast<int64_t>(it->second.data()[0]);
  }

  if (opt_g || opt_d) {
    auto fill = [&](Adam* opt, const NamedTensors& named,
                    const std::string& prefix, int64_t steps) {
      if (!opt) return;
      for (auto& [name, t] : named) {
        Tensor tt = t;
        tt.grad();
        opt->add_param(tt);
        auto mit = moment_entries.find(prefix + "." + name + ".m");
        auto vit = moment_entries.find(prefix + "." + name + ".v");
        if (mit != moment_entries.end()) read_into(mit->second, opt->moment1(tt));
        if (vit != moment_entries.end()) read_into(vit->second, opt->moment2(tt));
      }
      opt->set_step_count(steps);
      opt->set_learning_rate(cfg.learning_rate);
    };
    fill(opt_g, model.named_trainable_g(), "opt_g", g_step);
    fill(opt_d, model.named_trainable_d(), "opt_d", d_step);
  }
  return model;
}

// ---------------------------------------------------------------------------
// evaluation

EvalReport evaluate_dataset(McGanModel& model, const Dataset& ds,
                            std::optional<int64_t> task_filter,
                            uint64_t auc_seed) {
  EvalReport report;
  auto streams = order_for_training(ds.examples);
  std::map<int64_t, std::vector<EvalRow>> per_task;
  for (auto& [subject, stream] : streams) {
    for (const Example& ex : stream) {
      const bool advance = model.cfg.memory_enabled &&
                           model.cfg.test_time_memory_update;
      MemoryState* st =
          model.cfg.memory_enabled ? &model.state_for(subject) : nullptr;
      SaliencyMap pred = predict_map(model, ex.image, ex.task, st, advance);
      if (task_filter && ex.task != *task_filter) continue;
      double gt_max = 0;
      for (double v : ex.gt.values) gt_max = std::max(gt_max, v);
      if (gt_max <= 0 || ex.fixations.empty()) {
        ++report.skipped;
        continue;
      }
      EvalRow row;
      row.image_id = ex.image_id;
      row.subject_id = ex.subject_id;
      row.task = ex.task;
      try {
        row.auc = auc_borji(pred, ex.fixations, 100, auc_seed);
        row.nss = nss(pred, ex.fixations);
        row.cc = cc(pred, ex.gt);
        row.kl = kl(pred, ex.gt);
        row.sm = sm(pred, ex.gt);
      } catch (const ContractError&) {
        ++report.skipped;  // degenerate prediction (e.g. constant map)
        continue;
      }
      report.rows.push_back(row);
      per_task[ex.task].push_back(row);
    }
  }
  for (auto& [task, rows] : per_task) {
    EvalRow m;
    m.task = task;
    for (const auto& r : rows) {
      m.auc += r.auc;
      m.nss += r.nss;
      m.cc += r.cc;
      m.kl += r.kl;
      m.sm += r.sm;
    }
    const double n = static_cast<double>(rows.size());
    m.auc /= n;
    m.nss /= n;
    m.cc /= n;
    m.kl /= n;
    m.sm /= n;
    report.task_means[task] = m;
  }
  return report;
}

void write_eval_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("write_eval_csv: cannot open " + path);
  f << "image_id,task,auc,nss,cc,kl,sm\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  r.image_id.c_str(), static_cast<long long>(r.task), r.auc,
                  r.nss, r.cc, r.kl, r.sm);
    f << buf;
  }
}

}  // namespace mcgan
