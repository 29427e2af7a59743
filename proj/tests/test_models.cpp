#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lite/audit.hpp"
#include "lite/autoencoder.hpp"
#include "lite/predictor.hpp"

using namespace lite;

namespace {

template <typename T>
Tensor<T> random_input(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Tensor<T> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<T>(n(rng));
  return t;
}

template <typename T>
void zero_all(const std::vector<Parameter<T>*>& ps) {
  for (auto* p : ps) p->value.fill(T{0});
}

template <typename T>
void zero_biases(const std::vector<Parameter<T>*>& ps) {
  for (auto* p : ps)
    if (p->name.ends_with(".bias")) p->value.fill(T{0});
}

Tensor<double> reverse_time(const Tensor<double>& x) {
  Tensor<double> out(x.shape());
  const std::size_t B = x.dim(0), W = x.dim(1), C = x.dim(2);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < W; ++t)
      for (std::size_t c = 0; c < C; ++c) out.at(b, W - 1 - t, c) = x.at(b, t, c);
  return out;
}

}  // namespace

// ----------------------------------------------------------- autoencoder

TEST(Autoencoder, StageTableIsExact) {
  const std::size_t channels[] = {1, 64, 512, 256, 128, 15};
  const std::size_t kernels[] = {5, 3, 3, 3, 3};
  Autoencoder<float> ae(1);
  const auto& st = ae.stages();
  ASSERT_EQ(st.size(), 10u);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& e = st[i].spec;
    EXPECT_FALSE(e.transpose);
    EXPECT_EQ(e.in_channels, channels[i]);
    EXPECT_EQ(e.out_channels, channels[i + 1]);
    EXPECT_EQ(e.kernel, kernels[i]);
    EXPECT_EQ(e.stride, 2u);
    EXPECT_EQ(e.relu, i != 4);
    const auto& d = st[5 + i].spec;
    EXPECT_TRUE(d.transpose);
    EXPECT_EQ(d.in_channels, channels[5 - i]);
    EXPECT_EQ(d.out_channels, channels[4 - i]);
    EXPECT_EQ(d.kernel, kernels[4 - i]);
    EXPECT_EQ(d.stride, 2u);
    EXPECT_EQ(d.relu, i != 4);
  }
}

TEST(Autoencoder, StageLengthsMirror) {
  const std::size_t lengths[] = {152, 76, 38, 19, 10, 5};
  std::size_t len = 152;
  for (std::size_t i = 0; i < 5; ++i) {
    len = stage_out_len(kAeStages[i], len);
    EXPECT_EQ(len, lengths[i + 1]);
  }
  for (std::size_t i = 5; i < 10; ++i) {
    len = stage_out_len(kAeStages[i], len);
    EXPECT_EQ(len, lengths[9 - i]);
  }
}

TEST(Autoencoder, ParameterCounts) {
  EXPECT_EQ(stage_param_count(kAeStages[0]), 384u);
  EXPECT_EQ(ae_param_count(0, 5), 596879u);
  EXPECT_EQ(ae_param_count(5, 10), 596865u);
  Autoencoder<float> ae(0);
  EXPECT_EQ(ae.param_count(), 596879u + 596865u);
  EXPECT_EQ(nn::count_params(ae.encoder_parameters()), 596879u);
}

TEST(Autoencoder, ShapesRoundTrip) {
  Autoencoder<float> ae(3);
  for (std::size_t B : {1u, 4u}) {
    auto x = random_input<float>({B, 1, 152}, B);
    auto z = ae.encode(x);
    EXPECT_EQ(z.shape(), (Shape{B, 15, 5}));
    EXPECT_EQ(ae.decode(z).shape(), x.shape());
  }
}

TEST(Autoencoder, CompressionRatio) {
  const auto r = compression_ratio();
  EXPECT_NEAR(r.retained_fraction, 0.4934, 5e-5);
  EXPECT_NEAR(r.reduction_percent, 50.66, 5e-3);
  EXPECT_EQ(r.raw_bytes_per_window, 608u);
  EXPECT_EQ(r.latent_bytes_per_window, 300u);
  EXPECT_EQ(kLatentFeatures, 75u);
}

TEST(Autoencoder, ZeroInputAndBiasesGiveZeroLatent) {
  Autoencoder<double> ae(5);
  zero_biases(ae.parameters());
  auto z = ae.encode(Tensor<double>({2, 1, 152}, 0.0));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  auto y = ae.decode(Tensor<double>({2, 15, 5}, 0.0));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Autoencoder, SeededModelIsReproducible) {
  auto x = random_input<float>({3, 1, 152}, 8);
  Autoencoder<float> a(42), b(42), c(43);
  EXPECT_EQ(a.encode(x), b.encode(x));
  EXPECT_FALSE(a.encode(x) == c.encode(x));
}

TEST(Autoencoder, RejectsWrongShapes) {
  Autoencoder<float> ae(0);
  try {
    ae.encode(Tensor<float>({2, 1, 150}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("152"), std::string::npos);
  }
  EXPECT_THROW(ae.decode(Tensor<float>({2, 5, 15})), ShapeError);
}

TEST(Autoencoder, CheckpointRoundTrip) {
  Autoencoder<float> a(1), b(2);
  b.load(a.save());
  auto x = random_input<float>({2, 1, 152}, 3);
  EXPECT_EQ(a.reconstruct(x), b.reconstruct(x));
  Predictor<float> p;
  EXPECT_THROW(b.load(p.save()), std::exception);
}

// ------------------------------------------------------------- predictor

TEST(Predictor, OutputShapeForEveryPlacement) {
  for (auto pl : {SePlacement::None, SePlacement::BeforeBiLSTM, SePlacement::PreFC,
                  SePlacement::AfterFC}) {
    Predictor<float> p({16, 24, pl}, 1);
    EXPECT_EQ(p.predict(random_input<float>({5, 19, 8}, 2)).shape(), (Shape{5, 8}));
  }
}

TEST(Predictor, ZeroWeightsGiveZeroOutput) {
  Predictor<double> p({12, 20, SePlacement::None}, 4);
  zero_all(p.parameters());
  const auto y = p.predict(random_input<double>({3, 19, 8}, 1));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Predictor, FastPathMatchesGraphPath) {
  for (auto pl : {SePlacement::None, SePlacement::BeforeBiLSTM, SePlacement::PreFC,
                  SePlacement::AfterFC}) {
    Predictor<double> p({64, 128, pl}, 9);
    auto x = random_input<double>({7, 19, 8}, 3);
    EXPECT_LT(max_abs_diff(p.predict(x), p.predict_fast(x)), 1e-12) << to_string(pl);
  }
}

TEST(Predictor, DirectionSwapOracle) {
  const std::size_t h = 10;
  Predictor<double> p({h, h, SePlacement::None}, 21);
  Predictor<double> q({h, h, SePlacement::None}, 99);
  auto& pf = p.forward_lstm();
  auto& pb = p.backward_lstm();
  auto& qf = q.forward_lstm();
  auto& qb = q.backward_lstm();
  qf.wx.value = pb.wx.value;
  qf.wh.value = pb.wh.value;
  qf.bx.value = pb.bx.value;
  qf.bh.value = pb.bh.value;
  qb.wx.value = pf.wx.value;
  qb.wh.value = pf.wh.value;
  qb.bx.value = pf.bx.value;
  qb.bh.value = pf.bh.value;
  // head rows: [forward features; backward features] swap halves
  auto& pw = p.head().weight.value;
  auto& qw = q.head().weight.value;
  for (std::size_t r = 0; r < 2 * h; ++r)
    for (std::size_t c = 0; c < 8; ++c) qw.at((r + h) % (2 * h), c) = pw.at(r, c);
  q.head().bias.value = p.head().bias.value;

  auto x = random_input<double>({4, 19, 8}, 6);
  EXPECT_LT(max_abs_diff(p.predict(x), q.predict(reverse_time(x))), 1e-6);
}

TEST(Predictor, BatchOrderInvariance) {
  Predictor<double> p({32, 48, SePlacement::BeforeBiLSTM}, 5);
  auto x = random_input<double>({6, 19, 8}, 7);
  auto y = p.predict(x);
  const std::size_t perm[] = {3, 0, 5, 1, 4, 2};
  Tensor<double> xp(x.shape());
  for (std::size_t i = 0; i < 6; ++i)
    std::copy_n(x.ptr() + perm[i] * 19 * 8, 19 * 8, xp.ptr() + i * 19 * 8);
  auto yp = p.predict(xp);
  // GEMM blocking may differ in the last bit depending on row position
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(yp.at(i, c), y.at(perm[i], c), 1e-12);
}

TEST(Predictor, RejectsWrongFeatureWidth) {
  Predictor<float> p;
  try {
    p.predict(Tensor<float>({2, 19, 7}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("8"), std::string::npos);
  }
  EXPECT_THROW(Predictor<float>({0, 4, SePlacement::None}), std::invalid_argument);
}

TEST(Predictor, PlacementNamesRoundTrip) {
  for (auto pl : {SePlacement::None, SePlacement::BeforeBiLSTM, SePlacement::PreFC,
                  SePlacement::AfterFC})
    EXPECT_EQ(parse_placement(to_string(pl)), pl);
  EXPECT_THROW(parse_placement("sideways"), std::invalid_argument);
}

TEST(ParamCount, PublishedExamples) {
  EXPECT_EQ(param_count({64, 128, SePlacement::BeforeBiLSTM}), 91169u);
  EXPECT_EQ(param_count({32, 32, SePlacement::PreFC}), 12368u);
  EXPECT_EQ(param_count({128, 160, SePlacement::PreFC}), 202828u);
  EXPECT_EQ(param_count({64, 96, SePlacement::BeforeBiLSTM}), 60961u);
  EXPECT_EQ(param_count({96, 128, SePlacement::PreFC}), 125956u);
  EXPECT_EQ(param_count({256, 128, SePlacement::AfterFC}), 346145u);
  EXPECT_EQ(param_count(baseline_config()), 548872u);
  EXPECT_NEAR(param_reduction({64, 128, SePlacement::BeforeBiLSTM}), 83.39, 0.005);
  EXPECT_NEAR(param_reduction({32, 32, SePlacement::BeforeBiLSTM}), 97.94, 0.005);
}

TEST(ParamCount, ClosedFormMatchesInstantiatedModel) {
  for (auto pl : {SePlacement::None, SePlacement::BeforeBiLSTM, SePlacement::PreFC,
                  SePlacement::AfterFC}) {
    for (auto [f, b] : {std::pair{32, 32}, {64, 128}, {7, 3}}) {
      PredictorConfig cfg{std::size_t(f), std::size_t(b), pl};
      Predictor<float> p(cfg);
      EXPECT_EQ(p.param_count(), param_count(cfg)) << f << "," << b << " " << to_string(pl);
    }
  }
}

TEST(ParamCount, PlacementRelations) {
  for (std::size_t f = 1; f <= 64; f += 7)
    for (std::size_t b = 1; b <= 64; b += 5) {
      const auto before = param_count({f, b, SePlacement::BeforeBiLSTM});
      EXPECT_EQ(before, param_count({f, b, SePlacement::AfterFC}));
      if (f + b > 8) {
        EXPECT_GT(param_count({f, b, SePlacement::PreFC}), before);
      }
    }
}

TEST(Audit, EveryPublishedCellReproduces) {
  const auto rep = audit_parameter_table();
  EXPECT_EQ(rep.cells.size(), 57u);
  EXPECT_EQ(rep.baseline_params, 548872u);
  for (const auto& c : rep.failures())
    ADD_FAILURE() << "(" << c.f << "," << c.b << ") " << to_string(c.placement) << ": "
                  << c.computed_params << " vs " << c.expected_params;
  EXPECT_TRUE(rep.passed());
  EXPECT_NE(render_audit(rep).find("91169"), std::string::npos);
}

TEST(Audit, DetectsAMismatch) {
  AuditCell c{64, 128, SePlacement::BeforeBiLSTM, 91170, 91169, 83.39, 83.39};
  EXPECT_FALSE(c.ok());
  c.expected_params = 91169;
  c.expected_reduction = 83.41;
  EXPECT_FALSE(c.ok());
  c.expected_reduction = 83.395;
  EXPECT_TRUE(c.ok());
}
