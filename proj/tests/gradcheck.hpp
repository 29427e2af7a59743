#pragma once

// Central finite-difference oracle. Independent of the backward code paths:
// it only ever calls forward passes.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lite/autodiff.hpp"

namespace lite::testing {

using Builder = std::function<Var<double>(Graph<double>&, std::vector<Var<double>>&)>;

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

inline double eval_loss(const Builder& build, const std::vector<Tensor<double>>& inputs) {
  Graph<double> g(false);
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return build(g, vars).value()[0];
}

// ||analytic - numeric||_2 / (||analytic||_2 + ||numeric||_2), worst over inputs.
inline double gradcheck(const Builder& build, std::vector<Tensor<double>> inputs,
                        double h = 1e-5) {
  Graph<double> g;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t));
  auto loss = build(g, vars);
  g.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double>& analytic = g.grad(vars[k]);
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + h;
      const double up = eval_loss(build, inputs);
      inputs[k][i] = orig - h;
      const double down = eval_loss(build, inputs);
      inputs[k][i] = orig;
      const double numeric = (up - down) / (2 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double denom = std::sqrt(a2) + std::sqrt(n2);
    if (denom > 1e-12) worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

}  // namespace lite::testing
