#include "oracles.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

namespace oracles {

Grid from_tensor2d(const sam3unet::Tensor& t) {
  Grid g;
  g.h = t.dim(0);
  g.w = t.dim(1);
  g.v.assign(t.values().begin(), t.values().end());
  return g;
}

double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

Grid weight_map(const Grid& gt, int k, double lambda) {
  Grid out{gt.h, gt.w, std::vector<double>(gt.v.size())};
  int half = k / 2;
  for (int64_t y = 0; y < gt.h; ++y)
    for (int64_t x = 0; x < gt.w; ++x) {
      double sum = 0.0;
      int64_t cnt = 0;
      for (int64_t yy = y - half; yy <= y + half; ++yy)
        for (int64_t xx = x - half; xx <= x + half; ++xx) {
          if (yy < 0 || yy >= gt.h || xx < 0 || xx >= gt.w) continue;
          sum += gt.at(yy, xx);
          ++cnt;
        }
      out.at(y, x) = 1.0 + lambda * std::abs(sum / static_cast<double>(cnt) - gt.at(y, x));
    }
  return out;
}

double weighted_bce(const Grid& logits, const Grid& gt, const Grid& w) {
  double num = 0.0, den = 0.0;
  for (int64_t y = 0; y < gt.h; ++y)
    for (int64_t x = 0; x < gt.w; ++x) {
      double z = logits.at(y, x), t = gt.at(y, x);
      double ell = std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
      num += w.at(y, x) * ell;
      den += w.at(y, x);
    }
  return num / den;
}

double weighted_iou(const Grid& logits, const Grid& gt, const Grid& w, double eps) {
  double inter = 0.0, uni = 0.0;
  for (int64_t y = 0; y < gt.h; ++y)
    for (int64_t x = 0; x < gt.w; ++x) {
      double p = 1.0 / (1.0 + std::exp(-logits.at(y, x)));
      double t = gt.at(y, x);
      inter += w.at(y, x) * p * t;
      uni += w.at(y, x) * (p + t - p * t);
    }
  return 1.0 - (inter + eps) / (uni + eps);
}

double structure_loss(const Grid& logits, const Grid& gt, int k, double lambda,
                      double eps) {
  Grid w = weight_map(gt, k, lambda);
  return weighted_bce(logits, gt, w) + weighted_iou(logits, gt, w, eps);
}

double mae(const Grid& pred, const Grid& gt) {
  double acc = 0.0;
  for (size_t i = 0; i < pred.v.size(); ++i) acc += std::abs(pred.v[i] - gt.v[i]);
  return acc / static_cast<double>(pred.v.size());
}

double iou(const Grid& pred, const Grid& gt, double threshold) {
  double inter = 0.0, uni = 0.0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    bool p = pred.v[i] >= threshold;
    bool g = gt.v[i] != 0.0;
    if (p && g) inter += 1.0;
    if (p || g) uni += 1.0;
  }
  if (uni == 0.0) return 1.0;
  return inter / uni;
}

namespace {

double fbeta(double tp, double pred_pos, double gt_pos, double beta2) {
  if (tp == 0.0) return 0.0;
  double p = tp / pred_pos;
  double r = tp / gt_pos;
  return (1.0 + beta2) * p * r / (beta2 * p + r);
}

}  // namespace

double f_adaptive(const Grid& pred, const Grid& gt, double beta2) {
  double mean = 0.0;
  for (double v : pred.v) mean += v;
  mean /= static_cast<double>(pred.v.size());
  double t = std::min(2.0 * mean, 1.0);
  double tp = 0.0, pp = 0.0, gp = 0.0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    bool p = t > 0.0 ? pred.v[i] >= t : pred.v[i] > 0.0;
    bool g = gt.v[i] != 0.0;
    if (p) pp += 1.0;
    if (g) gp += 1.0;
    if (p && g) tp += 1.0;
  }
  return fbeta(tp, pp, gp, beta2);
}

double f_max(const Grid& pred, const Grid& gt, double beta2) {
  double best = 0.0;
  for (int i = 0; i < 256; ++i) {
    double t = static_cast<double>(i + 1) / 256.0;
    double tp = 0.0, pp = 0.0, gp = 0.0;
    for (size_t j = 0; j < pred.v.size(); ++j) {
      bool p = pred.v[j] >= t;
      bool g = gt.v[j] != 0.0;
      if (p) pp += 1.0;
      if (g) gp += 1.0;
      if (p && g) tp += 1.0;
    }
    best = std::max(best, fbeta(tp, pp, gp, beta2));
  }
  return best;
}

namespace {

double object_term(const Grid& pred, const Grid& gt, bool fg) {
  std::vector<double> vals;
  for (size_t i = 0; i < pred.v.size(); ++i)
    if ((gt.v[i] != 0.0) == fg) vals.push_back(fg ? pred.v[i] : 1.0 - pred.v[i]);
  if (vals.empty()) return 0.0;
  double x = 0.0;
  for (double v : vals) x += v;
  x /= static_cast<double>(vals.size());
  double var = 0.0;
  for (double v : vals) var += (v - x) * (v - x);
  double sigma = std::sqrt(var / static_cast<double>(vals.size()));
  return 2.0 * x / (x * x + 1.0 + sigma);
}

double quadrant_ssim(const Grid& pred, const Grid& gt, int64_t y0, int64_t y1,
                     int64_t x0, int64_t x1) {
  int64_t n = (y1 - y0) * (x1 - x0);
  if (n <= 0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (int64_t y = y0; y < y1; ++y)
    for (int64_t x = x0; x < x1; ++x) {
      mx += pred.at(y, x);
      my += gt.at(y, x);
    }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (int64_t y = y0; y < y1; ++y)
    for (int64_t x = x0; x < x1; ++x) {
      sx += (pred.at(y, x) - mx) * (pred.at(y, x) - mx);
      sy += (gt.at(y, x) - my) * (gt.at(y, x) - my);
      sxy += (pred.at(y, x) - mx) * (gt.at(y, x) - my);
    }
  double d = static_cast<double>(n) - 1.0 + DBL_EPSILON;
  sx /= d;
  sy /= d;
  sxy /= d;
  double alpha = 4.0 * mx * my * sxy;
  double beta = (mx * mx + my * my) * (sx + sy);
  if (alpha == beta) return 1.0;
  if (alpha != 0.0) return alpha / (beta + DBL_EPSILON);
  return 0.0;
}

}  // namespace

double s_measure(const Grid& pred, const Grid& gt, double alpha) {
  int64_t n = gt.h * gt.w;
  double fg = 0.0, pm = 0.0;
  for (size_t i = 0; i < gt.v.size(); ++i) {
    if (gt.v[i] != 0.0) fg += 1.0;
    pm += pred.v[i];
  }
  pm /= static_cast<double>(n);
  if (fg == 0.0) return 1.0 - pm;
  if (fg == static_cast<double>(n)) return pm;

  double u = fg / static_cast<double>(n);
  double s_obj = u * object_term(pred, gt, true) + (1.0 - u) * object_term(pred, gt, false);

  double sum_x = 0.0, sum_y = 0.0;
  for (int64_t y = 0; y < gt.h; ++y)
    for (int64_t x = 0; x < gt.w; ++x)
      if (gt.at(y, x) != 0.0) {
        sum_x += static_cast<double>(x + 1);
        sum_y += static_cast<double>(y + 1);
      }
  int64_t cx = static_cast<int64_t>(std::floor(sum_x / fg + 0.5));
  int64_t cy = static_cast<int64_t>(std::floor(sum_y / fg + 0.5));
  double area = static_cast<double>(n);
  double w1 = static_cast<double>(cx * cy) / area;
  double w2 = static_cast<double>((gt.w - cx) * cy) / area;
  double w3 = static_cast<double>(cx * (gt.h - cy)) / area;
  double w4 = 1.0 - w1 - w2 - w3;
  double s_reg = w1 * quadrant_ssim(pred, gt, 0, cy, 0, cx) +
                 w2 * quadrant_ssim(pred, gt, 0, cy, cx, gt.w) +
                 w3 * quadrant_ssim(pred, gt, cy, gt.h, 0, cx) +
                 w4 * quadrant_ssim(pred, gt, cy, gt.h, cx, gt.w);
  double s = alpha * s_obj + (1.0 - alpha) * s_reg;
  return std::max(s, 0.0);
}

double e_measure_mean(const Grid& pred, const Grid& gt) {
  int64_t n = gt.h * gt.w;
  double fg = 0.0;
  for (double v : gt.v) fg += (v != 0.0) ? 1.0 : 0.0;

  double acc = 0.0;
  for (int i = 0; i < 256; ++i) {
    double t = static_cast<double>(i + 1) / 256.0;
    std::vector<double> bin(gt.v.size());
    for (size_t j = 0; j < pred.v.size(); ++j) bin[j] = pred.v[j] >= t ? 1.0 : 0.0;

    double score;
    if (fg == 0.0) {
      double s = 0.0;
      for (double b : bin) s += 1.0 - b;
      score = s / static_cast<double>(n);
    } else if (fg == static_cast<double>(n)) {
      double s = 0.0;
      for (double b : bin) s += b;
      score = s / static_cast<double>(n);
    } else {
      double mu_f = 0.0, mu_g = 0.0;
      for (size_t j = 0; j < bin.size(); ++j) {
        mu_f += bin[j];
        mu_g += (gt.v[j] != 0.0) ? 1.0 : 0.0;
      }
      mu_f /= static_cast<double>(n);
      mu_g /= static_cast<double>(n);
      double s = 0.0;
      for (size_t j = 0; j < bin.size(); ++j) {
        double af = bin[j] - mu_f;
        double ag = ((gt.v[j] != 0.0) ? 1.0 : 0.0) - mu_g;
        double den = ag * ag + af * af;
        double align = den == 0.0 ? 0.0 : 2.0 * ag * af / den;
        s += (align + 1.0) * (align + 1.0) / 4.0;
      }
      score = s / static_cast<double>(n);
    }
    acc += score;
  }
  return acc / 256.0;
}

std::vector<double> adapter_forward(const double* x, int64_t n, int64_t d, int64_t b,
                                    const double* dw, const double* db,
                                    const double* uw, const double* ub) {
  std::vector<double> out(static_cast<size_t>(n * d));
  for (int64_t r = 0; r < n; ++r) {
    std::vector<double> hid(static_cast<size_t>(b));
    for (int64_t j = 0; j < b; ++j) {
      double acc = db[static_cast<size_t>(j)];
      for (int64_t i = 0; i < d; ++i)
        acc += dw[static_cast<size_t>(j * d + i)] * x[static_cast<size_t>(r * d + i)];
      hid[static_cast<size_t>(j)] = gelu(acc);
    }
    for (int64_t i = 0; i < d; ++i) {
      double acc = ub[static_cast<size_t>(i)];
      for (int64_t j = 0; j < b; ++j)
        acc += uw[static_cast<size_t>(i * b + j)] * hid[static_cast<size_t>(j)];
      out[static_cast<size_t>(r * d + i)] =
          x[static_cast<size_t>(r * d + i)] + gelu(acc);
    }
  }
  return out;
}

}  // namespace oracles
