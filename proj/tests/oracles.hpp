#pragma once

#include <vector>

#include "sam3unet/tensor.hpp"

// Independent scalar-loop reference implementations used as test oracles.
// These deliberately share no code with the library implementations: plain
// nested loops over std::vector<double>, following the published formulas.
namespace oracles {

struct Grid {
  int64_t h = 0, w = 0;
  std::vector<double> v;
  double& at(int64_t y, int64_t x) { return v[static_cast<size_t>(y * w + x)]; }
  double at(int64_t y, int64_t x) const { return v[static_cast<size_t>(y * w + x)]; }
};

Grid from_tensor2d(const sam3unet::Tensor& t);

// Losses (single image; logits/gt/weights as grids).
Grid weight_map(const Grid& gt, int k, double lambda);
double weighted_bce(const Grid& logits, const Grid& gt, const Grid& w);
double weighted_iou(const Grid& logits, const Grid& gt, const Grid& w, double eps);
double structure_loss(const Grid& logits, const Grid& gt, int k, double lambda,
                      double eps);

// Metrics.
double mae(const Grid& pred, const Grid& gt);
double iou(const Grid& pred, const Grid& gt, double threshold);
double f_adaptive(const Grid& pred, const Grid& gt, double beta2);
double f_max(const Grid& pred, const Grid& gt, double beta2);
double s_measure(const Grid& pred, const Grid& gt, double alpha);
double e_measure_mean(const Grid& pred, const Grid& gt);

// Model pieces (scalar-loop forward passes).
/// x: (n, d) rows; adapter with down (b,d)+bias, up (d,b)+bias; returns
/// x + gelu(up(gelu(down(x)))).
std::vector<double> adapter_forward(const double* x, int64_t n, int64_t d, int64_t b,
                                    const double* dw, const double* db,
                                    const double* uw, const double* ub);

double gelu(double v);

}  // namespace oracles
