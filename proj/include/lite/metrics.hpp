#pragma once

#include <cmath>
#include <stdexcept>

#include "lite/tensor.hpp"

namespace lite {

struct RegressionMetrics {
  double mse = 0;
  double rmse = 0;
  double r2 = 0;
};

template <typename T>
double mse(const Tensor<T>& pred, const Tensor<T>& target) {
  pred.require_same_shape(target, "mse");
  if (pred.empty()) throw std::invalid_argument("mse: empty input");
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

template <typename T>
double rmse(const Tensor<T>& pred, const Tensor<T>& target) {
  return std::sqrt(mse(pred, target));
}

// R^2 = 1 - SS_res / SS_tot, SS_tot about the target mean.
template <typename T>
RegressionMetrics regression_metrics(const Tensor<T>& pred, const Tensor<T>& target) {
  RegressionMetrics m;
  m.mse = mse(pred, target);
  m.rmse = std::sqrt(m.mse);
  double mean = 0;
  for (std::size_t i = 0; i < target.size(); ++i) mean += target[i];
  mean /= static_cast<double>(target.size());
  double ss_tot = 0;
  for (std::size_t i = 0; i < target.size(); ++i) ss_tot += (target[i] - mean) * (target[i] - mean);
  if (ss_tot == 0) throw std::domain_error("R^2 undefined: target has zero variance");
  m.r2 = 1.0 - m.mse * static_cast<double>(target.size()) / ss_tot;
  return m;
}

}  // namespace lite
