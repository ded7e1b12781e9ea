#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sam3unet/tensor.hpp"

namespace testutil {

using sam3unet::Tensor;

/// Max relative error between analytic gradients and central finite
/// differences for every element of every listed parameter. The callable
/// must rebuild the graph and return the scalar loss.
inline double fd_max_rel_err(const std::function<Tensor()>& loss_fn,
                             std::vector<Tensor> params, double h = 1e-5) {
  for (auto& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  loss.backward();

  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    if (analytic.empty()) analytic.assign(static_cast<size_t>(p.numel()), 0.0);
    for (int64_t i = 0; i < p.numel(); ++i) {
      double keep = p.data()[i];
      p.data()[i] = keep + h;
      double up = loss_fn().item();
      p.data()[i] = keep - h;
      double dn = loss_fn().item();
      p.data()[i] = keep;
      double fd = (up - dn) / (2.0 * h);
      double a = analytic[static_cast<size_t>(i)];
      double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

template <class VecA, class VecB>
double max_abs_diff(const VecA& a, const VecB& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testutil
