#pragma once

// SE-enhanced asymmetric BiLSTM regressor. Input [B, W, 8] (time-major per
// sample), output [B, 8]: the next-step gain of each access point.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lite/checkpoint.hpp"
#include "lite/kernels.hpp"
#include "lite/nn.hpp"

namespace lite {

inline constexpr std::size_t kPredictorInputs = 8;
inline constexpr std::size_t kPredictorOutputs = 8;
inline constexpr std::size_t kSeReduction = 8;

enum class SePlacement { None, BeforeBiLSTM, PreFC, AfterFC };

inline std::string to_string(SePlacement p) {
  switch (p) {
    case SePlacement::None: return "none";
    case SePlacement::BeforeBiLSTM: return "before";
    case SePlacement::PreFC: return "pre-fc";
    case SePlacement::AfterFC: return "after-fc";
  }
  return "?";
}

inline SePlacement parse_placement(const std::string& s) {
  if (s == "none") return SePlacement::None;
  if (s == "before" || s == "before-bilstm") return SePlacement::BeforeBiLSTM;
  if (s == "pre-fc" || s == "prefc") return SePlacement::PreFC;
  if (s == "after-fc" || s == "afterfc") return SePlacement::AfterFC;
  throw std::invalid_argument("unknown SE placement '" + s +
                              "' (expected none|before|pre-fc|after-fc)");
}

struct PredictorConfig {
  std::size_t forward_hidden = 64;
  std::size_t backward_hidden = 128;
  SePlacement placement = SePlacement::BeforeBiLSTM;

  bool operator==(const PredictorConfig&) const = default;

  std::size_t se_channels() const {
    switch (placement) {
      case SePlacement::BeforeBiLSTM: return kPredictorInputs;
      case SePlacement::PreFC: return forward_hidden + backward_hidden;
      case SePlacement::AfterFC: return kPredictorOutputs;
      case SePlacement::None: return 0;
    }
    return 0;
  }

  void validate() const {
    if (forward_hidden < 1 || backward_hidden < 1) {
      throw std::invalid_argument("predictor hidden sizes must be >= 1");
    }
  }
};

inline std::size_t param_count(const PredictorConfig& c) {
  const std::size_t I = kPredictorInputs, O = kPredictorOutputs;
  return kernels::lstm_param_count(I, c.forward_hidden) +
         kernels::lstm_param_count(I, c.backward_hidden) +
         (c.forward_hidden + c.backward_hidden) * O + O +
         nn::se_param_count(c.se_channels(), kSeReduction);
}

// Reference model for complexity comparisons: symmetric (256, 256), no SE.
inline PredictorConfig baseline_config() { return {256, 256, SePlacement::None}; }

inline double param_reduction(const PredictorConfig& c) {
  return 100.0 * (1.0 - static_cast<double>(param_count(c)) /
                            static_cast<double>(param_count(baseline_config())));
}

template <typename T>
class Predictor {
 public:
  explicit Predictor(PredictorConfig cfg = {}, std::uint64_t seed = 0)
      : cfg_(cfg),
        fwd_("pred.lstm_fwd", kPredictorInputs, cfg.forward_hidden, false, seed, 2000),
        bwd_("pred.lstm_bwd", kPredictorInputs, cfg.backward_hidden, true, seed, 2010),
        head_("pred.head", cfg.forward_hidden + cfg.backward_hidden, kPredictorOutputs, seed,
              2020) {
    cfg_.validate();
    if (cfg_.placement != SePlacement::None) {
      se_.emplace("pred.se", cfg_.se_channels(), kSeReduction, seed, 2030);
    }
  }

  const PredictorConfig& config() const { return cfg_; }

  Var<T> forward(Graph<T>& g, Var<T> x) {
    check_input(x.shape());
    if (cfg_.placement == SePlacement::BeforeBiLSTM) {
      // channels = access points, squeezed over time
      x = ops::swap_last_two((*se_)(g, ops::swap_last_two(x)));
    }
    auto z = ops::concat_features(fwd_.final_hidden(g, x), bwd_.final_hidden(g, x));
    if (cfg_.placement == SePlacement::PreFC) z = (*se_)(g, z);
    auto y = head_(g, z);
    if (cfg_.placement == SePlacement::AfterFC) y = (*se_)(g, y);
    return y;
  }

  Tensor<T> predict(const Tensor<T>& x) {
    Graph<T> g(false);
    return forward(g, g.constant(x)).value();
  }

  // Inference path: no tape, blocked LSTM kernel that keeps only the final
  // hidden state.
  Tensor<T> predict_fast(const Tensor<T>& x) const {
    check_input(x.shape());
    const std::size_t B = x.dim(0), W = x.dim(1);
    const Tensor<T>* in = &x;
    Tensor<T> gated;
    if (cfg_.placement == SePlacement::BeforeBiLSTM) {
      Tensor<T> mean({B, kPredictorInputs});
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < W; ++t)
          for (std::size_t c = 0; c < kPredictorInputs; ++c)
            mean[b * kPredictorInputs + c] += x[(b * W + t) * kPredictorInputs + c];
      for (auto& v : mean.data()) v /= static_cast<T>(W);
      auto gate = se_gate(mean);
      gated = x;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < W; ++t)
          for (std::size_t c = 0; c < kPredictorInputs; ++c)
            gated[(b * W + t) * kPredictorInputs + c] *= gate[b * kPredictorInputs + c];
      in = &gated;
    }
    const auto hf = kernels::lstm_final_hidden(*in, fwd_.wx.value, fwd_.wh.value, fwd_.bx.value,
                                               fwd_.bh.value, false);
    const auto hb = kernels::lstm_final_hidden(*in, bwd_.wx.value, bwd_.wh.value, bwd_.bx.value,
                                               bwd_.bh.value, true);
    const std::size_t F = cfg_.forward_hidden, Bk = cfg_.backward_hidden;
    Tensor<T> z({B, F + Bk});
    kernels::MatMap<T> zm(z.ptr(), B, F + Bk);
    zm.leftCols(F) = hf;
    zm.rightCols(Bk) = hb;
    if (cfg_.placement == SePlacement::PreFC) scale_rows(z, se_gate(z));
    auto y = kernels::dense_forward(z, head_.weight.value, head_.bias.value);
    if (cfg_.placement == SePlacement::AfterFC) scale_rows(y, se_gate(y));
    return y;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    if (se_) se_->collect(out);
    fwd_.collect(out);
    bwd_.collect(out);
    head_.collect(out);
    return out;
  }

  std::size_t param_count() { return nn::count_params(parameters()); }

  std::vector<std::uint8_t> save() { return checkpoint::save_params(parameters()); }
  void load(std::span<const std::uint8_t> bytes) { checkpoint::load_params(bytes, parameters()); }

  nn::LstmDirection<T>& forward_lstm() { return fwd_; }
  nn::LstmDirection<T>& backward_lstm() { return bwd_; }
  nn::Dense<T>& head() { return head_; }
  std::optional<nn::SeBlock<T>>& se() { return se_; }

 private:
  static void check_input(const Shape& s) {
    if (s.size() != 3 || s[2] != kPredictorInputs) {
      throw ShapeError("predict: expected input [B,W,8] with feature width 8, got " +
                       shape_str(s));
    }
  }

  Tensor<T> se_gate(const Tensor<T>& squeezed) const {
    auto h = kernels::dense_forward(squeezed, se_->fc1.weight.value, se_->fc1.bias.value);
    for (auto& v : h.data()) v = v > T{0} ? v : T{0};
    auto s = kernels::dense_forward(h, se_->fc2.weight.value, se_->fc2.bias.value);
    for (auto& v : s.data()) v = kernels::sigmoid(v);
    return s;
  }

  static void scale_rows(Tensor<T>& x, const Tensor<T>& gate) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= gate[i];
  }

  PredictorConfig cfg_;
  std::optional<nn::SeBlock<T>> se_;
  nn::LstmDirection<T> fwd_;
  nn::LstmDirection<T> bwd_;
  nn::Dense<T> head_;
};

}  // namespace lite
