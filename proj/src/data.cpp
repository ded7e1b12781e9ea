#include "sam3unet/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sam3unet/image_io.hpp"
#include "sam3unet/ops.hpp"

namespace sam3unet {

namespace fs = std::filesystem;

namespace {

bool has_image_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), ::tolower);
  return e == ".png" || e == ".jpg" || e == ".jpeg";
}

void check_mask_binary(const fs::path& path) {
  Tensor m = load_image_gray(path);
  for (int64_t i = 0; i < m.numel(); ++i) {
    double v = m.data()[i];
    if (v != 0.0 && v != 1.0)
      throw ConfigError("mask is not binary {0,255}: " + path.string());
  }
}

}  // namespace

IndexResult index_dataset(const DataConfig& cfg) {
  cfg.validate();
  fs::path img_dir = fs::path(cfg.root) / cfg.image_subdir;
  fs::path mask_dir = fs::path(cfg.root) / cfg.mask_subdir;
  if (!fs::is_directory(img_dir))
    throw IoError("image directory not found: " + img_dir.string());
  if (!fs::is_directory(mask_dir))
    throw IoError("mask directory not found: " + mask_dir.string());

  std::map<std::string, fs::path> images, masks;
  for (const auto& e : fs::directory_iterator(img_dir))
    if (e.is_regular_file() && has_image_ext(e.path()))
      images[e.path().stem().string()] = e.path();
  for (const auto& e : fs::directory_iterator(mask_dir))
    if (e.is_regular_file() && has_image_ext(e.path()))
      masks[e.path().stem().string()] = e.path();

  IndexResult out;
  for (const auto& [stem, path] : images) {
    auto it = masks.find(stem);
    if (it == masks.end()) {
      out.orphans.push_back(stem + " (image without mask)");
      continue;
    }
    out.pairs.push_back({path, it->second, stem});
  }
  for (const auto& [stem, path] : masks)
    if (!images.count(stem)) out.orphans.push_back(stem + " (mask without image)");

  if (cfg.strict) {
    if (!out.orphans.empty()) {
      std::string msg = "unpaired dataset entries:";
      for (const auto& o : out.orphans) msg += "\n  " + o;
      throw ConfigError(msg);
    }
    for (const auto& p : out.pairs) check_mask_binary(p.mask_path);
  }
  return out;  // map iteration is already stem-sorted
}

namespace {

void flip_h(Tensor& t) {  // (C,H,W)
  int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y) {
      double* row = t.data() + (ch * h + y) * w;
      std::reverse(row, row + w);
    }
}

void flip_v(Tensor& t) {
  int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h / 2; ++y)
      std::swap_ranges(t.data() + (ch * h + y) * w, t.data() + (ch * h + y + 1) * w,
                       t.data() + (ch * h + (h - 1 - y)) * w);
}

}  // namespace

Sample preprocess(const SamplePair& pair, const DataConfig& cfg, bool training, Rng& rng) {
  cfg.validate();
  Tensor img = load_image_rgb(pair.image_path);  // (3,H,W) in [0,1]
  Tensor mask = load_image_gray(pair.mask_path);

  Tensor img4 = reshape(img, {1, 3, img.dim(1), img.dim(2)});
  img4 = bilinear_resize(img4, cfg.input_h, cfg.input_w);
  Tensor m4 = reshape(mask, {1, 1, mask.dim(0), mask.dim(1)});
  m4 = nearest_resize(m4, cfg.input_h, cfg.input_w);

  Sample s;
  s.image = reshape(img4, {3, cfg.input_h, cfg.input_w});
  s.mask = reshape(m4, {1, cfg.input_h, cfg.input_w});
  for (int64_t i = 0; i < s.mask.numel(); ++i)
    s.mask.data()[i] = s.mask.data()[i] > 0.5 ? 1.0 : 0.0;

  if (training) {
    if (rng.bernoulli(cfg.flip_prob)) {
      flip_h(s.image);
      flip_h(s.mask);
    }
    if (rng.bernoulli(cfg.flip_prob)) {
      flip_v(s.image);
      flip_v(s.mask);
    }
  }

  int64_t hw = cfg.input_h * cfg.input_w;
  for (int ch = 0; ch < 3; ++ch) {
    double mean = cfg.normalize_mean[static_cast<size_t>(ch)];
    double stdv = cfg.normalize_std[static_cast<size_t>(ch)];
    double* p = s.image.data() + ch * hw;
    for (int64_t i = 0; i < hw; ++i) p[i] = (p[i] - mean) / stdv;
  }
  return s;
}

void make_synthetic(int n, int size, uint64_t seed, const fs::path& root,
                    const std::string& image_subdir, const std::string& mask_subdir) {
  if (n < 1) throw ConfigError("make_synthetic: n must be >= 1");
  if (size < 8) throw ConfigError("make_synthetic: size must be >= 8");
  fs::create_directories(root / image_subdir);
  fs::create_directories(root / mask_subdir);

  const double lo_area = 0.10, hi_area = 0.60;
  for (int idx = 0; idx < n; ++idx) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(idx)));
    int64_t sz = size;
    Tensor mask(Shape{sz, sz});

    // Resample the shape until its area lands inside the configured band.
    while (true) {
      std::fill(mask.values().begin(), mask.values().end(), 0.0);
      bool ellipse = rng.bernoulli(0.5);
      double cx = rng.uniform(0.25, 0.75) * static_cast<double>(sz);
      double cy = rng.uniform(0.25, 0.75) * static_cast<double>(sz);
      double rx = rng.uniform(0.15, 0.45) * static_cast<double>(sz);
      double ry = rng.uniform(0.15, 0.45) * static_cast<double>(sz);
      int64_t area = 0;
      for (int64_t y = 0; y < sz; ++y)
        for (int64_t x = 0; x < sz; ++x) {
          double dx = (static_cast<double>(x) - cx) / rx;
          double dy = (static_cast<double>(y) - cy) / ry;
          bool in = ellipse ? (dx * dx + dy * dy <= 1.0)
                            : (std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0);
          if (in) {
            mask.data()[y * sz + x] = 1.0;
            ++area;
          }
        }
      double frac = static_cast<double>(area) / static_cast<double>(sz * sz);
      if (frac >= lo_area && frac <= hi_area) break;
    }

    // Dark textured background, bright foreground, light pixel noise.
    double bg[3], fg[3];
    for (int c = 0; c < 3; ++c) bg[c] = rng.uniform(0.05, 0.35);
    for (int c = 0; c < 3; ++c) fg[c] = rng.uniform(0.6, 0.95);
    Tensor img(Shape{3, sz, sz});
    for (int64_t y = 0; y < sz; ++y)
      for (int64_t x = 0; x < sz; ++x) {
        bool in = mask.data()[y * sz + x] != 0.0;
        for (int c = 0; c < 3; ++c) {
          double v = (in ? fg[c] : bg[c]) + rng.uniform(-0.04, 0.04);
          img.data()[(c * sz + y) * sz + x] = std::clamp(v, 0.0, 1.0);
        }
      }

    char name[32];
    std::snprintf(name, sizeof(name), "sample_%03d.png", idx);
    save_image_rgb(root / image_subdir / name, img);
    save_image_gray(root / mask_subdir / name, mask);
  }
}

Tensor stack_images(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ShapeError("stack_images: empty batch");
  int64_t h = samples[0].image.dim(1), w = samples[0].image.dim(2);
  Tensor out(Shape{static_cast<int64_t>(samples.size()), 3, h, w});
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].image.shape() != samples[0].image.shape())
      throw ShapeError("stack_images: inconsistent sample shapes");
    std::copy_n(samples[i].image.data(), 3 * h * w,
                out.data() + static_cast<int64_t>(i) * 3 * h * w);
  }
  return out;
}

Tensor stack_masks(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ShapeError("stack_masks: empty batch");
  int64_t h = samples[0].mask.dim(1), w = samples[0].mask.dim(2);
  Tensor out(Shape{static_cast<int64_t>(samples.size()), 1, h, w});
  for (size_t i = 0; i < samples.size(); ++i)
    std::copy_n(samples[i].mask.data(), h * w,
                out.data() + static_cast<int64_t>(i) * h * w);
  return out;
}

}  // namespace sam3unet
