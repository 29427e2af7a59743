#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "lite/training.hpp"

using namespace lite;

namespace {

std::vector<EvalPoint> history_of(const std::vector<double>& vals, std::size_t interval = 50) {
  std::vector<EvalPoint> h;
  for (std::size_t i = 0; i < vals.size(); ++i) h.push_back({(i + 1) * interval, 0.0, vals[i]});
  return h;
}

TrainPlan short_plan(std::size_t iterations, std::size_t batch = 8) {
  TrainPlan p;
  p.min_iterations = iterations;
  p.max_iterations = iterations;
  p.eval_interval = std::max<std::size_t>(1, iterations / 4);
  p.batch = batch;
  p.eval_windows = 64;
  p.seed = 5;
  return p;
}

template <typename T>
WindowData<T> synthetic_windows(std::size_t n_traj = 30, std::size_t steps = 26) {
  GeneratorConfig c;
  c.n_trajectories = n_traj;
  c.steps = steps;
  c.seed = 3;
  return make_window_data<T>(generate_trajectories(c));
}

template <typename T>
WindowData<T> constant_windows(T value, std::size_t n = 64) {
  return {Tensor<T>({n, 19, 8}, value), Tensor<T>({n, 8}, value), Tensor<T>({n / 4, 19, 8}, value),
          Tensor<T>({n / 4, 8}, value)};
}

}  // namespace

// ------------------------------------------------------------ early stop

TEST(EarlyStop, MonotoneDecreaseNeverStops) {
  std::vector<double> v;
  for (int i = 0; i < 60; ++i) v.push_back(1.0 - 0.01 * i);
  for (std::size_t k = 1; k <= v.size(); ++k) {
    auto h = history_of({v.begin(), v.begin() + static_cast<long>(k)});
    EXPECT_FALSE(early_stop(h, 5, 1000));
  }
}

TEST(EarlyStop, FlatAfterMinimumStopsAfterPatienceEvaluations) {
  std::vector<double> v;
  for (int i = 0; i < 20; ++i) v.push_back(1.0 - 0.01 * i);  // improving through iteration 1000
  std::size_t stopped_at = 0;
  for (int k = 0; k < 20 && !stopped_at; ++k) {
    v.push_back(v.back());
    auto h = history_of(v);
    if (early_stop(h, 5, 1000)) stopped_at = h.back().iteration;
  }
  EXPECT_EQ(stopped_at, 1000u + 5u * 50u);
}

TEST(EarlyStop, NeverBeforeMinimumIterations) {
  auto h = history_of(std::vector<double>(19, 0.5));  // flat, last at 950
  EXPECT_FALSE(early_stop(h, 5, 1000));
  h.push_back({1000, 0, 0.5});
  EXPECT_TRUE(early_stop(h, 5, 1000));
}

TEST(EarlyStop, ImprovementAtPatienceBoundaryResetsCounter) {
  std::vector<double> v(21, 1.0);
  for (int i = 0; i < 4; ++i) v.push_back(1.0);
  v.push_back(0.9);  // would have been the 5th stale evaluation
  EXPECT_FALSE(early_stop(history_of(v), 5, 1000));
  for (int i = 0; i < 4; ++i) v.push_back(0.9);
  EXPECT_FALSE(early_stop(history_of(v), 5, 1000));
  v.push_back(0.9 - 5e-7);  // below the improvement threshold
  EXPECT_TRUE(early_stop(history_of(v), 5, 1000));
}

TEST(EarlyStop, EmptyHistoryRejected) { EXPECT_THROW(early_stop({}, 5, 0), std::invalid_argument); }

// ------------------------------------------------------------ deltas/plan

TEST(Delta, PublishedExamples) {
  EXPECT_DOUBLE_EQ(delta_rmse_pct(0.134, 0.134), 0.0);
  EXPECT_NEAR(delta_rmse_pct(0.127, 0.134), 5.03, 0.3);
  EXPECT_NEAR(delta_rmse_pct(0.142, 0.134), -6.58, 0.7);
}

TEST(Delta, MissingBaselineIsAnError) {
  TrainReport r;
  r.val_rmse = 0.1;
  EXPECT_THROW(attach_delta(r, {{"other", 0.2}}, "BaselineNoAE"), std::invalid_argument);
  attach_delta(r, {{"BaselineNoAE", 0.2}}, "BaselineNoAE");
  EXPECT_DOUBLE_EQ(*r.delta_pct, 50.0);
}

TEST(Plan, ProtocolRequiresThousandIterations) {
  TrainPlan p;
  EXPECT_NO_THROW(p.check_protocol());
  p.min_iterations = 999;
  EXPECT_THROW(p.check_protocol(), std::invalid_argument);
  p = {};
  p.alpha = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.max_iterations = 10;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Report, CsvRowAndJson) {
  TrainReport r;
  r.strategy = Strategy::CompressionAware;
  r.predictor = PredictorConfig{64, 128, SePlacement::BeforeBiLSTM};
  r.seed = 7;
  r.val_rmse = 0.125;
  r.params = 91169;
  EXPECT_EQ(TrainReport::csv_header(), "strategy,f,b,placement,seed,rmse,delta_pct,params,wall_clock_s");
  EXPECT_EQ(r.csv_row(), "CompressionAware,64,128,before,7,0.125000,,91169,0.000");
  auto j = r.to_json();
  EXPECT_EQ(j["strategy"], "CompressionAware");
  EXPECT_EQ(j["predictor"]["placement"], "before");
  EXPECT_EQ(parse_strategy("EndToEnd"), Strategy::EndToEnd);
}

// ---------------------------------------------------------------- layout

TEST(Layout, FlattenedIsApMajor) {
  Tensor<double> x({2, 19, 8});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  auto f = to_ae_input(x, AeLayout::Flattened);
  ASSERT_EQ(f.shape(), (Shape{2, 1, 152}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 19; ++t)
      for (std::size_t a = 0; a < 8; ++a) EXPECT_EQ(f.at(b, 0, a * 19 + t), x.at(b, t, a));
  EXPECT_EQ(from_ae_output(f, 2, 19, 8), x);
}

TEST(Layout, PerApEncodesEachSeries) {
  Tensor<double> x({2, 152, 8});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  auto f = to_ae_input(x, AeLayout::PerAp);
  ASSERT_EQ(f.shape(), (Shape{16, 1, 152}));
  EXPECT_EQ(f.at(1 * 8 + 3, 0, 7), x.at(1, 7, 3));
  EXPECT_EQ(from_ae_output(f, 2, 152, 8), x);
  EXPECT_THROW(to_ae_input(Tensor<double>({2, 19, 8}), AeLayout::PerAp), ShapeError);
  EXPECT_THROW(to_ae_input(Tensor<double>({2, 20, 8}), AeLayout::Flattened), ShapeError);
}

TEST(Baselines, LastValueRmse) {
  Tensor<double> x({2, 3, 8}, 1.0), y({2, 8}, 1.0);
  EXPECT_EQ(last_value_rmse(x, y), 0.0);
  for (std::size_t a = 0; a < 8; ++a) y.at(1, a) = 3.0;
  EXPECT_DOUBLE_EQ(last_value_rmse(x, y), std::sqrt(2.0));
}

// ------------------------------------------------------------ strategies

TEST(Strategies, ConstantDatasetIsLearned) {
  auto d = constant_windows<float>(0.7f);
  auto plan = short_plan(300, 4);
  Autoencoder<float> ae(1);
  auto ra = train_autoencoder(ae, d, plan);
  EXPECT_LT(ra.val_rmse, 1e-2);
  Predictor<float> p({8, 8, SePlacement::BeforeBiLSTM}, 1);
  auto rb = train_baseline(p, d, plan);
  EXPECT_LT(rb.val_rmse, 1e-2);
  auto ri = independent_report(p, ae, d, plan, rb, ra);
  EXPECT_LT(ri.val_rmse, 1e-2);
  EXPECT_EQ(ri.strategy, Strategy::Independent);
  EXPECT_EQ(ri.to_json()["strategy"], "Independent");
}

TEST(Strategies, CompressionAwareLeavesAutoencoderUntouched) {
  auto d = synthetic_windows<float>();
  Autoencoder<float> ae(2);
  train_autoencoder(ae, d, short_plan(20));
  const auto digest = checkpoint::digest(ae.save());
  Predictor<float> p({8, 8, SePlacement::BeforeBiLSTM}, 2);
  auto r = train_compression_aware(ae, p, d, short_plan(40));
  EXPECT_EQ(checkpoint::digest(ae.save()), digest);
  EXPECT_TRUE(std::isfinite(r.val_rmse));
  EXPECT_EQ(r.strategy, Strategy::CompressionAware);
}

TEST(Strategies, DecodedInputsDoNotHelpARawPredictor) {
  auto d = synthetic_windows<float>(60);
  auto plan = short_plan(200);
  auto res = [&] {
    Autoencoder<float> ae(4);
    Predictor<float> p({16, 16, SePlacement::BeforeBiLSTM}, 4);
    return train_independent(ae, p, d, plan);
  }();
  EXPECT_GE(res.report.val_rmse, res.predictor_raw.val_rmse);
}

TEST(Strategies, ReportRmseRecomputesFromPredictions) {
  auto d = synthetic_windows<float>();
  Predictor<float> p({8, 8, SePlacement::PreFC}, 6);
  auto r = train_baseline(p, d, short_plan(30));
  const auto pred = predict_windows(p, d.val_x);
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::pow(double(pred[i]) - double(d.val_y[i]), 2);
  EXPECT_NEAR(r.val_rmse, std::sqrt(acc / pred.size()), 1e-9);
  EXPECT_DOUBLE_EQ(r.val_rmse, std::sqrt(r.val_mse));
}

TEST(Strategies, DeterministicForSameSeed) {
  auto d = synthetic_windows<float>();
  auto run = [&] {
    Predictor<float> p({8, 12, SePlacement::AfterFC}, 9);
    return train_baseline(p, d, short_plan(40)).val_rmse;
  };
  EXPECT_EQ(run(), run());
}

TEST(Strategies, BestParametersAreRestored) {
  auto d = synthetic_windows<float>();
  Predictor<float> p({8, 8, SePlacement::None}, 3);
  auto plan = short_plan(60);
  plan.eval_windows = 100000;
  auto r = train_baseline(p, d, plan);
  double best = r.history.front().val_loss;
  for (const auto& e : r.history) best = std::min(best, e.val_loss);
  EXPECT_NEAR(r.val_mse, best, 1e-6 * std::max(1.0, best));
}

TEST(Strategies, DivergenceRestoresLastGoodState) {
  auto d = synthetic_windows<float>();
  d.train_x[5] = std::numeric_limits<float>::quiet_NaN();
  Predictor<float> p({8, 8, SePlacement::None}, 3);
  const auto before = p.save();
  auto plan = short_plan(400);
  plan.batch = d.train_x.dim(0);  // the poisoned window is in every batch
  EXPECT_THROW(train_baseline(p, d, plan), TrainingDiverged);
  EXPECT_EQ(p.save(), before);
}

TEST(Strategies, EndToEndLimitingCases) {
  auto d = synthetic_windows<double>();
  Tensor<double> x = slice_rows(d.train_x, 0, 3), y = slice_rows(d.train_y, 0, 3);
  Autoencoder<double> ae(8);
  Predictor<double> p({4, 4, SePlacement::BeforeBiLSTM}, 8);

  {  // alpha = 1: only the reconstruction term, no predictor gradient
    Graph<double> g;
    auto loss = e2e_loss(g, ae, p, g.constant(x), g.constant(y), 1.0, AeLayout::Flattened);
    for (auto* q : p.parameters()) q->zero_grad();
    g.backward(loss);
    for (auto* q : p.parameters())
      for (double v : q->grad.data()) EXPECT_EQ(v, 0.0);
    const auto in = to_ae_input(x, AeLayout::Flattened);
    EXPECT_NEAR(loss.value()[0], mse(ae.reconstruct(in), in), 1e-12);
  }
  {  // alpha = 0: the loss is the prediction MSE on reconstructed inputs
    Graph<double> g;
    auto loss = e2e_loss(g, ae, p, g.constant(x), g.constant(y), 0.0, AeLayout::Flattened);
    const auto rec = reconstruct_windows(ae, x, AeLayout::Flattened);
    EXPECT_NEAR(loss.value()[0], mse(p.predict(rec), y), 1e-12);
  }
}

TEST(Strategies, EndToEndGradientReachesEncoder) {
  auto d = synthetic_windows<double>();
  Tensor<double> x = slice_rows(d.train_x, 0, 2), y = slice_rows(d.train_y, 0, 2);
  Autoencoder<double> ae(12);
  Predictor<double> p({3, 2, SePlacement::BeforeBiLSTM}, 12);
  auto loss_at = [&] {
    Graph<double> g(false);
    return e2e_loss(g, ae, p, g.constant(x), g.constant(y), 0.5, AeLayout::Flattened).value()[0];
  };
  for (auto* q : ae.parameters()) q->zero_grad();
  {
    Graph<double> g;
    g.backward(e2e_loss(g, ae, p, g.constant(x), g.constant(y), 0.5, AeLayout::Flattened));
  }
  std::mt19937_64 rng(1);
  double diff2 = 0, a2 = 0, n2 = 0;
  for (auto* q : ae.encoder_parameters()) {
    std::uniform_int_distribution<std::size_t> pick(0, q->value.size() - 1);
    for (int k = 0; k < 3; ++k) {
      const std::size_t i = pick(rng);
      const double orig = q->value[i], h = 1e-6;
      q->value[i] = orig + h;
      const double up = loss_at();
      q->value[i] = orig - h;
      const double down = loss_at();
      q->value[i] = orig;
      const double numeric = (up - down) / (2 * h), analytic = q->grad[i];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
  }
  ASSERT_GT(a2, 0.0);
  EXPECT_LT(std::sqrt(diff2) / (std::sqrt(a2) + std::sqrt(n2)), 1e-4);
}

TEST(Strategies, AutoencoderLossDecreasesOverFirstEpochs) {
  // Ten passes over the synthetic training set, one evaluation per pass, so
  // each history entry carries that epoch's mean minibatch loss.
  auto d = synthetic_windows<float>(20, 60);
  const std::size_t batch = 32, per_epoch = (d.train_x.dim(0) + batch - 1) / batch;
  TrainPlan plan = short_plan(10 * per_epoch, batch);
  plan.eval_interval = per_epoch;
  Autoencoder<float> ae(21);
  auto r = train_autoencoder(ae, d, plan);
  ASSERT_EQ(r.history.size(), 10u);
  for (std::size_t i = 1; i < 10; ++i)
    EXPECT_LT(r.history[i].train_loss, r.history[i - 1].train_loss) << "epoch " << i;
}
