#pragma once

// Symmetric 1-D convolutional autoencoder: five strided Conv1d stages on the
// distributed-unit side, five ConvTranspose1d stages on the controller side.
//   encode: [B, 1, 152] -> [B, 15, 5]      decode: [B, 15, 5] -> [B, 1, 152]

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lite/checkpoint.hpp"
#include "lite/kernels.hpp"
#include "lite/nn.hpp"

namespace lite {

struct StageSpec {
  const char* name;
  bool transpose;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t padding;
  std::size_t output_padding;
  bool relu;  // false: linear output
};

inline constexpr std::size_t kWindowFeatures = 152;
inline constexpr std::size_t kLatentChannels = 15;
inline constexpr std::size_t kLatentLength = 5;
inline constexpr std::size_t kLatentFeatures = kLatentChannels * kLatentLength;

// Padding is 2 for K=5 and 1 for K=3; decoder output paddings (1,0,1,1,1)
// land exactly on the encoder lengths 10, 19, 38, 76, 152.
inline constexpr std::array<StageSpec, 10> kAeStages = {{
    {"E1", false, 1, 64, 5, 2, 2, 0, true},
    {"E2", false, 64, 512, 3, 2, 1, 0, true},
    {"E3", false, 512, 256, 3, 2, 1, 0, true},
    {"E4", false, 256, 128, 3, 2, 1, 0, true},
    {"E5", false, 128, 15, 3, 2, 1, 0, false},
    {"D1", true, 15, 128, 3, 2, 1, 1, true},
    {"D2", true, 128, 256, 3, 2, 1, 0, true},
    {"D3", true, 256, 512, 3, 2, 1, 1, true},
    {"D4", true, 512, 64, 3, 2, 1, 1, true},
    {"D5", true, 64, 1, 5, 2, 2, 1, false},
}};

inline std::size_t stage_param_count(const StageSpec& s) {
  return s.in_channels * s.out_channels * s.kernel + s.out_channels;
}

inline std::size_t stage_out_len(const StageSpec& s, std::size_t in_len) {
  return s.transpose
             ? kernels::conv_transpose_out_len(in_len, s.kernel, s.stride, s.padding,
                                               s.output_padding)
             : kernels::conv_out_len(in_len, s.kernel, s.stride, s.padding);
}

struct CompressionRatio {
  double retained_fraction;
  double reduction_percent;
  std::size_t raw_bytes_per_window;
  std::size_t latent_bytes_per_window;
};

inline CompressionRatio compression_ratio() {
  const double retained = static_cast<double>(kLatentFeatures) / kWindowFeatures;
  return {retained, 100.0 * (1.0 - retained), kWindowFeatures * sizeof(float),
          kLatentFeatures * sizeof(float)};
}

template <typename T>
class Autoencoder {
 public:
  struct Stage {
    StageSpec spec;
    Parameter<T> weight;
    Parameter<T> bias;
  };

  explicit Autoencoder(std::uint64_t seed = 0) {
    std::uint64_t stream = 1000;
    for (const auto& s : kAeStages) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.in_channels * s.kernel));
      const std::string base = std::string("ae.") + s.name;
      Shape wshape = s.transpose ? Shape{s.in_channels, s.out_channels, s.kernel}
                                 : Shape{s.out_channels, s.in_channels, s.kernel};
      stages_.push_back(Stage{s, nn::uniform_param<T>(base + ".weight", wshape, bound, seed, stream),
                              nn::uniform_param<T>(base + ".bias", {s.out_channels}, bound, seed,
                                                   stream + 1)});
      stream += 2;
    }
  }

  const std::vector<Stage>& stages() const { return stages_; }

  Var<T> encode(Graph<T>& g, Var<T> x) {
    const auto& s = x.shape();
    if (s.size() != 3 || s[1] != 1 || s[2] != kWindowFeatures) {
      throw ShapeError("encode: expected input [B,1,152], got " + shape_str(s));
    }
    return run(g, x, 0, 5);
  }

  Var<T> decode(Graph<T>& g, Var<T> latent) {
    const auto& s = latent.shape();
    if (s.size() != 3 || s[1] != kLatentChannels || s[2] != kLatentLength) {
      throw ShapeError("decode: expected latent [B,15,5], got " + shape_str(s));
    }
    return run(g, latent, 5, 10);
  }

  Var<T> reconstruct(Graph<T>& g, Var<T> x) { return decode(g, encode(g, x)); }

  // Inference helpers on a non-recording graph.
  Tensor<T> encode(const Tensor<T>& x) {
    Graph<T> g(false);
    return encode(g, g.constant(x)).value();
  }
  Tensor<T> decode(const Tensor<T>& latent) {
    Graph<T> g(false);
    return decode(g, g.constant(latent)).value();
  }
  Tensor<T> reconstruct(const Tensor<T>& x) {
    Graph<T> g(false);
    return reconstruct(g, g.constant(x)).value();
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& st : stages_) {
      out.push_back(&st.weight);
      out.push_back(&st.bias);
    }
    return out;
  }
  std::vector<Parameter<T>*> encoder_parameters() { return slice(0, 5); }
  std::vector<Parameter<T>*> decoder_parameters() { return slice(5, 10); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& st : stages_) n += st.weight.value.size() + st.bias.value.size();
    return n;
  }

  std::vector<std::uint8_t> save() { return checkpoint::save_params(parameters()); }
  void load(std::span<const std::uint8_t> bytes) { checkpoint::load_params(bytes, parameters()); }

 private:
  Var<T> run(Graph<T>& g, Var<T> x, std::size_t first, std::size_t last) {
    for (std::size_t i = first; i < last; ++i) {
      auto& st = stages_[i];
      const auto& s = st.spec;
      auto w = g.param(st.weight);
      auto b = g.param(st.bias);
      x = s.transpose ? ops::conv_transpose1d(x, w, b, s.stride, s.padding, s.output_padding)
                      : ops::conv1d(x, w, b, s.stride, s.padding);
      if (s.relu) x = ops::relu(x);
    }
    return x;
  }

  std::vector<Parameter<T>*> slice(std::size_t first, std::size_t last) {
    std::vector<Parameter<T>*> out;
    for (std::size_t i = first; i < last; ++i) {
      out.push_back(&stages_[i].weight);
      out.push_back(&stages_[i].bias);
    }
    return out;
  }

  std::vector<Stage> stages_;
};

// Closed-form count over a stage range of the table.
inline std::size_t ae_param_count(std::size_t first = 0, std::size_t last = kAeStages.size()) {
  std::size_t n = 0;
  for (std::size_t i = first; i < last; ++i) n += stage_param_count(kAeStages[i]);
  return n;
}

}  // namespace lite
