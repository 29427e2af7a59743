#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lite/autodiff.hpp"

namespace lite {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  // Applies one update from the accumulated gradients. Throws NumericError
  // before touching any parameter if a gradient is not finite.
  void step() {
    for (auto* p : params_) {
      if (p->grad.shape() != p->value.shape()) {
        throw ShapeError("adam: gradient shape mismatch for " + p->name);
      }
      if (!p->grad.all_finite()) throw NumericError("adam: non-finite gradient in " + p->name);
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(cfg_.epsilon);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      T* w = p.value.ptr();
      const T* g = p.grad.ptr();
      T* m = m_[k].ptr();
      T* v = v_[k].ptr();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = b1 * m[i] + (T{1} - b1) * g[i];
        v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
        w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
      }
    }
  }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace lite
