#include "sam3unet/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "sam3unet/image_io.hpp"
#include "sam3unet/ops.hpp"

namespace sam3unet {

namespace {

constexpr int kThresholdCount = 256;

void check_pair(const Tensor& pred, const Tensor& gt, const char* op) {
  if (pred.ndim() != 2 || gt.ndim() != 2 || pred.shape() != gt.shape())
    throw ShapeError(std::string(op) + ": pred " + shape_str(pred.shape()) + " vs gt " +
                     shape_str(gt.shape()));
}

/// Threshold grid t_i = (i+1)/256, i = 0..255. Returns the number of grid
/// thresholds the value passes, i.e. |{i : v >= (i+1)/256}|, computed with
/// exact comparisons.
int threshold_bucket(double v) {
  int idx = static_cast<int>(std::floor(v * kThresholdCount));
  idx = std::clamp(idx, 0, kThresholdCount);
  while (idx >= 1 && v < static_cast<double>(idx) / kThresholdCount) --idx;
  while (idx < kThresholdCount &&
         v >= static_cast<double>(idx + 1) / kThresholdCount)
    ++idx;
  return idx;
}

double fscore(int64_t tp, int64_t pred_pos, int64_t gt_pos, double beta2) {
  if (tp == 0) return 0.0;
  double p = static_cast<double>(tp) / static_cast<double>(pred_pos);
  double r = static_cast<double>(tp) / static_cast<double>(gt_pos);
  return (1.0 + beta2) * p * r / (beta2 * p + r);
}

}  // namespace

double mae(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "mae");
  double acc = 0.0;
  for (int64_t i = 0, n = pred.numel(); i < n; ++i)
    acc += std::abs(pred.data()[i] - gt.data()[i]);
  return acc / static_cast<double>(pred.numel());
}

double iou(const Tensor& pred, const Tensor& gt, double threshold) {
  check_pair(pred, gt, "iou");
  int64_t inter = 0, uni = 0;
  for (int64_t i = 0, n = pred.numel(); i < n; ++i) {
    bool p = pred.data()[i] >= threshold;
    bool g = gt.data()[i] != 0.0;
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double f_measure(const Tensor& pred, const Tensor& gt, double beta2, FMode mode) {
  check_pair(pred, gt, "f_measure");
  int64_t n = pred.numel();
  int64_t gt_pos = 0;
  for (int64_t i = 0; i < n; ++i) gt_pos += gt.data()[i] != 0.0;

  if (mode == FMode::kAdaptive) {
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += pred.data()[i];
    mean /= static_cast<double>(n);
    double t = std::min(2.0 * mean, 1.0);
    int64_t tp = 0, pred_pos = 0;
    for (int64_t i = 0; i < n; ++i) {
      bool p = t > 0.0 ? pred.data()[i] >= t : pred.data()[i] > 0.0;
      pred_pos += p;
      tp += p && gt.data()[i] != 0.0;
    }
    return fscore(tp, pred_pos, gt_pos, beta2);
  }

  // Max mode: cumulative counts over the shared threshold grid.
  int64_t fg_hist[kThresholdCount + 1] = {0};
  int64_t bg_hist[kThresholdCount + 1] = {0};
  for (int64_t i = 0; i < n; ++i) {
    int b = threshold_bucket(pred.data()[i]);
    if (gt.data()[i] != 0.0)
      fg_hist[b]++;
    else
      bg_hist[b]++;
  }
  double best = 0.0;
  int64_t tp = 0, fp = 0;
  for (int b = kThresholdCount; b >= 1; --b) {  // threshold t = b/256
    tp += fg_hist[b];
    fp += bg_hist[b];
    best = std::max(best, fscore(tp, tp + fp, gt_pos, beta2));
  }
  return best;
}

// ---------------------------------------------------------------------------
// S-measure

namespace {

double object_score(const Tensor& pred, const Tensor& gt, bool foreground) {
  // Similarity of the (possibly complemented) prediction with the region:
  // 2x / (x^2 + 1 + sigma_x); the denominator is >= 1 so no epsilon is
  // needed and a perfect constant-1 region scores exactly 1.
  int64_t count = 0;
  double sum = 0.0;
  for (int64_t i = 0, n = pred.numel(); i < n; ++i) {
    bool in = (gt.data()[i] != 0.0) == foreground;
    if (!in) continue;
    double v = foreground ? pred.data()[i] : 1.0 - pred.data()[i];
    sum += v;
    ++count;
  }
  if (count == 0) return 0.0;
  double x = sum / static_cast<double>(count);
  double var = 0.0;
  for (int64_t i = 0, n = pred.numel(); i < n; ++i) {
    bool in = (gt.data()[i] != 0.0) == foreground;
    if (!in) continue;
    double v = foreground ? pred.data()[i] : 1.0 - pred.data()[i];
    var += (v - x) * (v - x);
  }
  double sigma = std::sqrt(var / static_cast<double>(count));
  return 2.0 * x / (x * x + 1.0 + sigma);
}

double region_ssim(const double* pred, const double* gt, int64_t h, int64_t w,
                   int64_t stride, int64_t y0, int64_t y1, int64_t x0, int64_t x1) {
  (void)h;
  (void)w;
  int64_t count = (y1 - y0) * (x1 - x0);
  if (count <= 0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (int64_t y = y0; y < y1; ++y)
    for (int64_t x = x0; x < x1; ++x) {
      mx += pred[y * stride + x];
      my += gt[y * stride + x];
    }
  mx /= static_cast<double>(count);
  my /= static_cast<double>(count);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (int64_t y = y0; y < y1; ++y)
    for (int64_t x = x0; x < x1; ++x) {
      double dx = pred[y * stride + x] - mx;
      double dy = gt[y * stride + x] - my;
      sx += dx * dx;
      sy += dy * dy;
      sxy += dx * dy;
    }
  double denom_n = static_cast<double>(count) - 1.0 + DBL_EPSILON;
  sx /= denom_n;
  sy /= denom_n;
  sxy /= denom_n;
  double alpha = 4.0 * mx * my * sxy;
  double beta = (mx * mx + my * my) * (sx + sy);
  if (alpha == beta) return 1.0;  // identical statistics, includes 0/0
  if (alpha != 0.0) return alpha / (beta + DBL_EPSILON);
  return 0.0;
}

double region_score(const Tensor& pred, const Tensor& gt) {
  int64_t h = pred.dim(0), w = pred.dim(1);
  // Foreground centroid, 1-based with half-away rounding.
  double total = 0.0, sum_x = 0.0, sum_y = 0.0;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      if (gt.data()[y * w + x] != 0.0) {
        total += 1.0;
        sum_x += static_cast<double>(x + 1);
        sum_y += static_cast<double>(y + 1);
      }
  int64_t cx = static_cast<int64_t>(std::floor(sum_x / total + 0.5));
  int64_t cy = static_cast<int64_t>(std::floor(sum_y / total + 0.5));

  double area = static_cast<double>(h * w);
  double w1 = static_cast<double>(cx * cy) / area;
  double w2 = static_cast<double>((w - cx) * cy) / area;
  double w3 = static_cast<double>(cx * (h - cy)) / area;
  double w4 = 1.0 - w1 - w2 - w3;

  const double* p = pred.data();
  const double* g = gt.data();
  double q1 = region_ssim(p, g, h, w, w, 0, cy, 0, cx);
  double q2 = region_ssim(p, g, h, w, w, 0, cy, cx, w);
  double q3 = region_ssim(p, g, h, w, w, cy, h, 0, cx);
  double q4 = region_ssim(p, g, h, w, w, cy, h, cx, w);
  return w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4;
}

}  // namespace

double s_measure(const Tensor& pred, const Tensor& gt, double alpha) {
  check_pair(pred, gt, "s_measure");
  int64_t n = pred.numel();
  int64_t fg = 0;
  double pred_mean = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    fg += gt.data()[i] != 0.0;
    pred_mean += pred.data()[i];
  }
  pred_mean /= static_cast<double>(n);
  if (fg == 0) return 1.0 - pred_mean;
  if (fg == n) return pred_mean;

  double u = static_cast<double>(fg) / static_cast<double>(n);
  double s_obj =
      u * object_score(pred, gt, true) + (1.0 - u) * object_score(pred, gt, false);
  double s_reg = region_score(pred, gt);
  double s = alpha * s_obj + (1.0 - alpha) * s_reg;
  return std::max(s, 0.0);
}

// ---------------------------------------------------------------------------
// E-measure

double e_measure_mean(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "e_measure_mean");
  int64_t n = pred.numel();
  int64_t fg = 0;
  for (int64_t i = 0; i < n; ++i) fg += gt.data()[i] != 0.0;

  // Cumulative foreground/background counts over the threshold grid; for
  // binary maps the alignment matrix is constant on each confusion region,
  // so each threshold score reduces to the four region counts.
  std::vector<int64_t> fg_hist(kThresholdCount + 1, 0), bg_hist(kThresholdCount + 1, 0);
  for (int64_t i = 0; i < n; ++i) {
    int b = threshold_bucket(pred.data()[i]);
    if (gt.data()[i] != 0.0)
      fg_hist[static_cast<size_t>(b)]++;
    else
      bg_hist[static_cast<size_t>(b)]++;
  }

  double nd = static_cast<double>(n);
  double acc = 0.0;
  int64_t tp = 0, fp = 0;
  for (int b = kThresholdCount; b >= 1; --b) {  // threshold t = b/256
    tp += fg_hist[static_cast<size_t>(b)];
    fp += bg_hist[static_cast<size_t>(b)];
    double score;
    if (fg == 0) {
      // all-background gt: score the complement map
      score = static_cast<double>(n - tp - fp) / nd;
    } else if (fg == n) {
      score = static_cast<double>(tp + fp) / nd;
    } else {
      double mu_g = static_cast<double>(fg) / nd;
      double mu_f = static_cast<double>(tp + fp) / nd;
      auto enhanced = [&](double ag, double af) {
        double den = ag * ag + af * af;
        double align = den == 0.0 ? 0.0 : 2.0 * ag * af / den;
        double e = align + 1.0;
        return e * e / 4.0;
      };
      double e_tp = enhanced(1.0 - mu_g, 1.0 - mu_f);
      double e_fn = enhanced(1.0 - mu_g, -mu_f);
      double e_fp = enhanced(-mu_g, 1.0 - mu_f);
      double e_tn = enhanced(-mu_g, -mu_f);
      int64_t fn_c = fg - tp;
      int64_t tn_c = n - fg - fp;
      score = (static_cast<double>(tp) * e_tp + static_cast<double>(fn_c) * e_fn +
               static_cast<double>(fp) * e_fp + static_cast<double>(tn_c) * e_tn) /
              nd;
    }
    acc += score;
  }
  return acc / static_cast<double>(kThresholdCount);
}

// ---------------------------------------------------------------------------
// Folder evaluation

DatasetMetrics evaluate_folder(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, FMode f_mode,
                               bool strict) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(gt_dir))
    throw IoError("ground-truth directory not found: " + gt_dir.string());
  if (!fs::is_directory(pred_dir))
    throw IoError("prediction directory not found: " + pred_dir.string());

  std::set<std::string> gt_stems;
  for (const auto& e : fs::directory_iterator(gt_dir))
    if (e.is_regular_file()) gt_stems.insert(e.path().stem().string());

  DatasetMetrics m;
  for (const std::string& stem : gt_stems) {  // sorted: deterministic order
    fs::path pred_path;
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      fs::path cand = pred_dir / (stem + ext);
      if (fs::exists(cand)) {
        pred_path = cand;
        break;
      }
    }
    if (pred_path.empty()) {
      if (strict)
        throw IoError("no prediction for ground truth '" + stem + "' in " +
                      pred_dir.string());
      m.unmatched.push_back(stem);
      continue;
    }
    fs::path gt_path;
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      fs::path cand = gt_dir / (stem + ext);
      if (fs::exists(cand)) {
        gt_path = cand;
        break;
      }
    }
    Tensor gt = load_image_gray(gt_path);
    Tensor pred = load_image_gray(pred_path);
    if (pred.shape() != gt.shape()) {
      Tensor p4 = reshape(pred, {1, 1, pred.dim(0), pred.dim(1)});
      pred = reshape(bilinear_resize(p4, gt.dim(0), gt.dim(1)), {gt.dim(0), gt.dim(1)});
    }
    for (int64_t i = 0; i < gt.numel(); ++i)
      gt.data()[i] = gt.data()[i] > 0.5 ? 1.0 : 0.0;

    m.iou += iou(pred, gt);
    m.f_measure += f_measure(pred, gt, 0.3, f_mode);
    m.mae += mae(pred, gt);
    m.s_measure += s_measure(pred, gt);
    m.e_measure_mean += e_measure_mean(pred, gt);
    m.count += 1;
  }
  if (m.count > 0) {
    double c = static_cast<double>(m.count);
    m.iou /= c;
    m.f_measure /= c;
    m.mae /= c;
    m.s_measure /= c;
    m.e_measure_mean /= c;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Reports

std::string MetricsReport::to_text() const {
  std::string out;
  char line[128];
  for (const auto& [name, m] : datasets) {
    auto emit = [&](const char* metric, double v) {
      std::snprintf(line, sizeof(line), "%s.%s = %.4f\n", name.c_str(), metric, v);
      out += line;
    };
    emit("iou", m.iou);
    emit("f_measure", m.f_measure);
    emit("mae", m.mae);
    emit("s_measure", m.s_measure);
    emit("e_measure_mean", m.e_measure_mean);
    std::snprintf(line, sizeof(line), "%s.count = %lld\n", name.c_str(),
                  static_cast<long long>(m.count));
    out += line;
  }
  return out;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  for (const auto& [name, m] : datasets) {
    nlohmann::json d;
    d["iou"] = m.iou;
    d["f_measure"] = m.f_measure;
    d["mae"] = m.mae;
    d["s_measure"] = m.s_measure;
    d["e_measure_mean"] = m.e_measure_mean;
    d["count"] = m.count;
    d["unmatched"] = m.unmatched;
    j[name] = d;
  }
  return j.dump(2);
}

void MetricsReport::write(const std::filesystem::path& dir, const std::string& stem) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / (stem + ".txt"));
    if (!f) throw IoError("cannot write report: " + (dir / (stem + ".txt")).string());
    f << to_text();
  }
  {
    std::ofstream f(dir / (stem + ".json"));
    if (!f) throw IoError("cannot write report: " + (dir / (stem + ".json")).string());
    f << to_json() << "\n";
  }
}

}  // namespace sam3unet
