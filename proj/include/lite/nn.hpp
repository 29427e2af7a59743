#pragma once

// Parameterised building blocks shared by the autoencoder and the predictor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lite/ops.hpp"
#include "lite/rng.hpp"

namespace lite::nn {

// Uniform in [-bound, bound]; each parameter gets its own stream so that
// adding a layer never perturbs the initial values of the others.
template <typename T>
Parameter<T> uniform_param(std::string name, Shape shape, double bound, std::uint64_t seed,
                           std::uint64_t stream) {
  Rng rng = make_rng(seed, stream);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return Parameter<T>(std::move(name), std::move(t));
}

template <typename T>
struct Dense {
  Parameter<T> weight;  // [in, out]
  Parameter<T> bias;    // [out]

  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed,
        std::uint64_t stream) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = uniform_param<T>(name + ".weight", {in, out}, bound, seed, stream);
    bias = uniform_param<T>(name + ".bias", {out}, bound, seed, stream + 1);
  }

  std::size_t in() const { return weight.value.dim(0); }
  std::size_t out() const { return weight.value.dim(1); }

  Var<T> operator()(Graph<T>& g, Var<T> x) {
    return ops::dense(x, g.param(weight), g.param(bias));
  }

  void collect(std::vector<Parameter<T>*>& out_params) {
    out_params.push_back(&weight);
    out_params.push_back(&bias);
  }
};

inline std::size_t se_hidden(std::size_t channels, std::size_t reduction = 8) {
  return std::max<std::size_t>(1, channels / reduction);
}

inline std::size_t se_param_count(std::size_t channels, std::size_t reduction = 8) {
  if (channels == 0) return 0;
  const std::size_t d = se_hidden(channels, reduction);
  return channels * d + d + d * channels + channels;
}

// Squeeze-and-excitation over axis 1 of a [B, C, L] or [B, C] tensor.
template <typename T>
struct SeBlock {
  Dense<T> fc1;  // C -> d
  Dense<T> fc2;  // d -> C

  SeBlock() = default;
  SeBlock(const std::string& name, std::size_t channels, std::size_t reduction,
          std::uint64_t seed, std::uint64_t stream)
      : fc1(name + ".fc1", channels, se_hidden(channels, reduction), seed, stream),
        fc2(name + ".fc2", se_hidden(channels, reduction), channels, seed, stream + 2) {}

  std::size_t channels() const { return fc1.in(); }

  // Gate values s in (0,1)^C, one row per batch element.
  Var<T> gate(Graph<T>& g, Var<T> x) {
    auto squeezed = ops::mean_last_axis(x);
    return ops::sigmoid(fc2(g, ops::relu(fc1(g, squeezed))));
  }

  Var<T> operator()(Graph<T>& g, Var<T> x) { return ops::scale_channels(x, gate(g, x)); }

  void collect(std::vector<Parameter<T>*>& out_params) {
    fc1.collect(out_params);
    fc2.collect(out_params);
  }
};

// One LSTM direction with separate input-side and hidden-side biases.
template <typename T>
struct LstmDirection {
  Parameter<T> wx;  // [I, 4h]
  Parameter<T> wh;  // [h, 4h]
  Parameter<T> bx;  // [4h]
  Parameter<T> bh;  // [4h]
  bool reverse = false;

  LstmDirection() = default;
  LstmDirection(const std::string& name, std::size_t input, std::size_t hidden, bool rev,
                std::uint64_t seed, std::uint64_t stream)
      : reverse(rev) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    wx = uniform_param<T>(name + ".wx", {input, 4 * hidden}, bound, seed, stream);
    wh = uniform_param<T>(name + ".wh", {hidden, 4 * hidden}, bound, seed, stream + 1);
    bx = uniform_param<T>(name + ".bx", {4 * hidden}, bound, seed, stream + 2);
    bh = uniform_param<T>(name + ".bh", {4 * hidden}, bound, seed, stream + 3);
  }

  std::size_t hidden() const { return wh.value.dim(0); }

  // [B, T, I] -> [B, T, h] in input time order.
  Var<T> operator()(Graph<T>& g, Var<T> x) {
    return ops::lstm_direction(x, g.param(wx), g.param(wh), g.param(bx), g.param(bh), reverse);
  }

  // The state after consuming the whole sequence: t = T-1 forward, t = 0 reversed.
  Var<T> final_hidden(Graph<T>& g, Var<T> x) {
    auto seq = (*this)(g, x);
    const std::size_t steps = x.value().dim(1);
    return ops::time_step(seq, reverse ? 0 : steps - 1);
  }

  void collect(std::vector<Parameter<T>*>& out_params) {
    out_params.insert(out_params.end(), {&wx, &wh, &bx, &bh});
  }
};

template <typename T>
std::size_t count_params(const std::vector<Parameter<T>*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

}  // namespace lite::nn
