#include "mcgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mcgan/errors.hpp"
#include "mcgan/png_io.hpp"
#include "mcgan/rng.hpp"

namespace fs = std::filesystem;

namespace mcgan {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

int64_t parse_int(const std::string& s, int line_no, const char* col) {
  try {
    size_t pos = 0;
    int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("fixations csv line " + std::to_string(line_no) +
                     ": bad integer in column " + col + ": '" + s + "'");
  }
}

}  // namespace

std::vector<FixationRecord> load_fixations(const std::string& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw IoError("load_fixations: cannot open " + csv_path);
  std::string line;
  if (!std::getline(f, line))
    throw ParseError("fixations csv: empty file: " + csv_path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "image_id,subject_id,task_id,x,y,ordinal")
    throw ParseError("fixations csv: bad header '" + line +
                     "', expected image_id,subject_id,task_id,x,y,ordinal");

  std::vector<FixationRecord> out;
  // detects two presentations claiming the same (subject, ordinal) slot
  std::map<std::pair<std::string, int64_t>, std::pair<std::string, int64_t>> slots;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 6)
      throw ParseError("fixations csv line " + std::to_string(line_no) +
                       ": expected 6 columns, got " +
                       std::to_string(fields.size()));
    FixationRecord r;
    r.image_id = fields[0];
    r.subject_id = fields[1];
    r.task_id = parse_int(fields[2], line_no, "task_id");
    r.x = parse_int(fields[3], line_no, "x");
    r.y = parse_int(fields[4], line_no, "y");
    r.ordinal = parse_int(fields[5], line_no, "ordinal");
    auto key = std::make_pair(r.subject_id, r.ordinal);
    auto val = std::make_pair(r.image_id, r.task_id);
    auto it = slots.find(key);
    if (it == slots.end()) {
      slots.emplace(key, val);
    } else if (it->second != val) {
      throw ParseError("fixations csv line " + std::to_string(line_no) +
                       ": duplicate (subject, ordinal) slot (" + r.subject_id +
                       ", " + std::to_string(r.ordinal) +
                       ") with conflicting image or task");
    }
    out.push_back(std::move(r));
  }
  return out;
}

SaliencyMap build_gt_map(const FixationSet& fixations, int64_t width,
                         int64_t height, double sigma) {
  if (sigma <= 0) sigma = 0.04 * static_cast<double>(width);
  SaliencyMap map(width, height, std::vector<double>(width * height, 0.0));
  if (fixations.empty()) return map;  // degenerate all-zero map
  const int64_t r = static_cast<int64_t>(std::ceil(3.0 * sigma));
  for (const auto& f : fixations) {
    if (f.x < 0 || f.x >= width || f.y < 0 || f.y >= height)
      throw ContractError("build_gt_map: fixation (" + std::to_string(f.x) +
                          "," + std::to_string(f.y) + ") out of bounds for " +
                          std::to_string(width) + "x" + std::to_string(height));
    for (int64_t y = std::max<int64_t>(0, f.y - r);
         y <= std::min(height - 1, f.y + r); ++y) {
      for (int64_t x = std::max<int64_t>(0, f.x - r);
           x <= std::min(width - 1, f.x + r); ++x) {
        const double dx = static_cast<double>(x - f.x);
        const double dy = static_cast<double>(y - f.y);
        const double d2 = dx * dx + dy * dy;
        if (d2 > 9.0 * sigma * sigma) continue;
        map.at(x, y) += std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
  }
  double mx = 0;
  for (double v : map.values) mx = std::max(mx, v);
  if (mx > 0)
    for (double& v : map.values) v /= mx;
  return map;
}

std::map<std::string, std::vector<Example>> order_for_training(
    const std::vector<Example>& examples) {
  std::map<std::string, std::vector<Example>> streams;
  for (const auto& ex : examples) streams[ex.subject_id].push_back(ex);
  for (auto& [subject, stream] : streams) {
    std::stable_sort(stream.begin(), stream.end(),
                     [](const Example& a, const Example& b) {
                       return a.ordinal < b.ordinal;
                     });
    for (size_t i = 0; i < stream.size(); ++i) {
      if (stream[i].ordinal != static_cast<int64_t>(i))
        throw ContractError("order_for_training: subject " + subject +
                            " ordinals are not contiguous from 0 (saw " +
                            std::to_string(stream[i].ordinal) +
                            " at position " + std::to_string(i) + ")");
    }
  }
  return streams;
}

Dataset synthesize_two_task_dataset(int64_t n_subjects, int64_t n_images,
                                    int64_t size, uint64_t seed,
                                    int64_t jitter_seed) {
  if (size < 32)
    throw ConfigError("synthesize_two_task_dataset: size must be >= 32, got " +
                      std::to_string(size));
  if (n_subjects < 1 || n_images < 1)
    throw ConfigError("synthesize_two_task_dataset: need >= 1 subject and image");

  const double gt_sigma = 0.04 * static_cast<double>(size);
  const double blob_sigma = 0.07 * static_cast<double>(size);

  // fixed per-subject GT-center jitter, magnitude well under the 2*sigma cap
  Rng jrng(jitter_seed < 0 ? seed : static_cast<uint64_t>(jitter_seed));
  std::vector<std::pair<double, double>> jitter(n_subjects);
  for (auto& j : jitter) {
    j.first = jrng.uniform(-0.35 * gt_sigma, 0.35 * gt_sigma);
    j.second = jrng.uniform(-0.35 * gt_sigma, 0.35 * gt_sigma);
  }

  Rng rng(seed);
  Dataset ds;
  ds.image_size = size;
  ds.n_tasks = 2;
  std::vector<int64_t> next_ordinal(n_subjects, 0);

  for (int64_t i = 0; i < n_images; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "img%05lld", static_cast<long long>(i));
    const double s = static_cast<double>(size);
    const double top_x = rng.uniform(0.15 * s, 0.85 * s);
    const double top_y = rng.uniform(0.10 * s, 0.40 * s);
    const double bot_x = rng.uniform(0.15 * s, 0.85 * s);
    const double bot_y = rng.uniform(0.60 * s, 0.90 * s);

    std::vector<float> image(3 * size * size, 0.05f);
    auto paint = [&](double cx, double cy, double r, double g, double b) {
      for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          const double a = std::exp(-d2 / (2.0 * blob_sigma * blob_sigma));
          float* px = image.data();
          px[0 * size * size + y * size + x] = std::min(
              1.0f, px[0 * size * size + y * size + x] + static_cast<float>(a * r));
          px[1 * size * size + y * size + x] = std::min(
              1.0f, px[1 * size * size + y * size + x] + static_cast<float>(a * g));
          px[2 * size * size + y * size + x] = std::min(
              1.0f, px[2 * size * size + y * size + x] + static_cast<float>(a * b));
        }
    };
    paint(top_x, top_y, 1.0, 0.8, 0.3);
    paint(bot_x, bot_y, 0.3, 0.6, 1.0);

    const int64_t subject = i % n_subjects;
    for (int64_t task = 0; task < 2; ++task) {
      const double cx = (task == 0 ? top_x : bot_x) + jitter[subject].first;
      const double cy = (task == 0 ? top_y : bot_y) + jitter[subject].second;
      FixationSet fix;
      for (int g = 0; g < 6; ++g) {
        int64_t fx = static_cast<int64_t>(
            std::lround(cx + rng.gaussian(0.0, gt_sigma * 0.4)));
        int64_t fy = static_cast<int64_t>(
            std::lround(cy + rng.gaussian(0.0, gt_sigma * 0.4)));
        fix.push_back({std::clamp<int64_t>(fx, 0, size - 1),
                       std::clamp<int64_t>(fy, 0, size - 1)});
      }
      Example ex;
      ex.image_id = id;
      ex.subject_id = "s" + std::to_string(subject);
      ex.task = task;
      ex.ordinal = next_ordinal[subject]++;
      ex.size = size;
      ex.image = image;
      ex.fixations = fix;
      ex.gt = build_gt_map(fix, size, size, gt_sigma);
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

namespace {

double bilinear_sample(const double* src, int64_t w, int64_t h, double fx,
                       double fy) {
  fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
  const int64_t x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
  const int64_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = fx - x0, ay = fy - y0;
  return (1 - ax) * (1 - ay) * src[y0 * w + x0] +
         ax * (1 - ay) * src[y0 * w + x1] +
         (1 - ax) * ay * src[y1 * w + x0] + ax * ay * src[y1 * w + x1];
}

std::vector<double> resize_plane(const std::vector<double>& src, int64_t w,
                                 int64_t h, int64_t tw, int64_t th) {
  std::vector<double> out(tw * th);
  for (int64_t y = 0; y < th; ++y)
    for (int64_t x = 0; x < tw; ++x) {
      const double fx = (x + 0.5) * static_cast<double>(w) / tw - 0.5;
      const double fy = (y + 0.5) * static_cast<double>(h) / th - 0.5;
      out[y * tw + x] = bilinear_sample(src.data(), w, h, fx, fy);
    }
  return out;
}

}  // namespace

std::vector<float> resize_image(const std::vector<float>& rgb, int64_t w,
                                int64_t h, int64_t tw, int64_t th) {
  if (static_cast<int64_t>(rgb.size()) != 3 * w * h)
    throw ShapeError("resize_image: buffer does not match 3x" +
                     std::to_string(h) + "x" + std::to_string(w));
  std::vector<float> out(3 * tw * th);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> plane(w * h);
    for (int64_t i = 0; i < w * h; ++i) plane[i] = rgb[c * w * h + i];
    auto r = resize_plane(plane, w, h, tw, th);
    for (int64_t i = 0; i < tw * th; ++i)
      out[c * tw * th + i] = static_cast<float>(r[i]);
  }
  return out;
}

SaliencyMap resize_map(const SaliencyMap& map, int64_t tw, int64_t th) {
  SaliencyMap out(tw, th,
                  resize_plane(map.values, map.width, map.height, tw, th),
                  map.variant);
  double mx = 0;
  for (double v : out.values) mx = std::max(mx, v);
  if (mx > 0)
    for (double& v : out.values) v /= mx;
  return out;
}

Fixation resize_fixation(const Fixation& f, int64_t w, int64_t h, int64_t tw,
                         int64_t th) {
  auto remap = [](int64_t v, int64_t from, int64_t to) {
    const double r = (v + 0.5) * static_cast<double>(to) / from - 0.5;
    return std::clamp<int64_t>(static_cast<int64_t>(std::lround(r)), 0, to - 1);
  };
  return {remap(f.x, w, tw), remap(f.y, h, th)};
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "maps");

  std::set<std::string> written_images;
  std::ofstream csv(fs::path(dir) / "fixations.csv");
  csv << "image_id,subject_id,task_id,x,y,ordinal\n";
  for (const auto& ex : ds.examples) {
    if (!written_images.count(ex.image_id)) {
      PngImage img;
      img.width = ex.size;
      img.height = ex.size;
      img.channels = 3;
      img.pixels.resize(3 * ex.size * ex.size);
      for (int64_t i = 0; i < ex.size * ex.size; ++i)
        for (int c = 0; c < 3; ++c)
          img.pixels[i * 3 + c] = static_cast<uint8_t>(std::lround(
              std::clamp(ex.image[c * ex.size * ex.size + i], 0.0f, 1.0f) * 255.0f));
      write_png((fs::path(dir) / "images" / (ex.image_id + ".png")).string(), img);
      written_images.insert(ex.image_id);
    }
    write_gray_png((fs::path(dir) / "maps" /
                    (ex.subject_id + "_" + std::to_string(ex.ordinal) + ".png"))
                       .string(),
                   ex.gt.width, ex.gt.height, ex.gt.values);
    for (const auto& f : ex.fixations)
      csv << ex.image_id << "," << ex.subject_id << "," << ex.task << ","
          << f.x << "," << f.y << "," << ex.ordinal << "\n";
  }

  std::ofstream meta(fs::path(dir) / "meta");
  meta << "image_size=" << ds.image_size << "\n";
  meta << "n_tasks=" << ds.n_tasks << "\n";
}

Dataset load_dataset(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "meta"))
    throw IoError("load_dataset: no meta file in " + dir);
  Dataset ds;
  {
    std::ifstream meta(fs::path(dir) / "meta");
    std::string line;
    while (std::getline(meta, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      if (key == "image_size") ds.image_size = std::stoll(val);
      if (key == "n_tasks") ds.n_tasks = std::stoll(val);
    }
  }
  if (ds.image_size <= 0)
    throw ParseError("load_dataset: meta is missing image_size");

  auto records = load_fixations((fs::path(dir) / "fixations.csv").string());

  // group records into presentations
  std::map<std::pair<std::string, int64_t>, Example> grouped;
  for (const auto& r : records) {
    auto key = std::make_pair(r.subject_id, r.ordinal);
    Example& ex = grouped[key];
    if (ex.image_id.empty()) {
      ex.image_id = r.image_id;
      ex.subject_id = r.subject_id;
      ex.task = r.task_id;
      ex.ordinal = r.ordinal;
      ex.size = ds.image_size;
    }
    ex.fixations.push_back({r.x, r.y});
  }

  std::map<std::string, std::vector<float>> image_cache;
  for (auto& [key, ex] : grouped) {
    auto it = image_cache.find(ex.image_id);
    if (it == image_cache.end()) {
      const std::string path =
          (fs::path(dir) / "images" / (ex.image_id + ".png")).string();
      PngImage img = read_png(path);
      std::vector<double> plane(img.width * img.height);
      std::vector<float> chw(3 * ds.image_size * ds.image_size);
      for (int c = 0; c < 3; ++c) {
        for (int64_t i = 0; i < img.width * img.height; ++i)
          plane[i] = img.pixels[i * img.channels +
                                (img.channels == 3 ? c : 0)] / 255.0;
        auto r = resize_plane(plane, img.width, img.height, ds.image_size,
                              ds.image_size);
        for (int64_t i = 0; i < ds.image_size * ds.image_size; ++i)
          chw[c * ds.image_size * ds.image_size + i] = static_cast<float>(r[i]);
      }
      it = image_cache.emplace(ex.image_id, std::move(chw)).first;
    }
    ex.image = it->second;

    const std::string map_path =
        (fs::path(dir) / "maps" /
         (ex.subject_id + "_" + std::to_string(ex.ordinal) + ".png"))
            .string();
    if (fs::exists(map_path)) {
      int64_t mw = 0, mh = 0;
      auto v = read_gray_png(map_path, mw, mh);
      SaliencyMap m(mw, mh, std::move(v));
      ex.gt = (mw == ds.image_size && mh == ds.image_size)
                  ? m
                  : resize_map(m, ds.image_size, ds.image_size);
    } else {
      ex.gt = build_gt_map(ex.fixations, ds.image_size, ds.image_size);
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace mcgan
