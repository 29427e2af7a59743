#pragma once

// Training strategies for the compression + prediction pipeline:
//   BaselineNoAE      predictor on raw windows
//   Independent       AE and predictor trained apart, predictor evaluated on
//                     decode(encode(S))
//   CompressionAware  AE frozen, predictor trained on its reconstructions
//   EndToEnd          alpha * reconstruction MSE + (1 - alpha) * prediction MSE
//
// An iteration is one minibatch update; validation runs every
// eval_interval iterations on a fixed subset of validation windows.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lite/autoencoder.hpp"
#include "lite/channel.hpp"
#include "lite/json_util.hpp"
#include "lite/metrics.hpp"
#include "lite/optim.hpp"
#include "lite/predictor.hpp"

namespace lite {

enum class Strategy { Autoencoder, BaselineNoAE, Independent, CompressionAware, EndToEnd };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Autoencoder: return "Autoencoder";
    case Strategy::BaselineNoAE: return "BaselineNoAE";
    case Strategy::Independent: return "Independent";
    case Strategy::CompressionAware: return "CompressionAware";
    case Strategy::EndToEnd: return "EndToEnd";
  }
  return "?";
}

// Command-line spelling.
inline std::string cli_name(Strategy s) {
  switch (s) {
    case Strategy::Autoencoder: return "autoencoder";
    case Strategy::BaselineNoAE: return "baseline-no-ae";
    case Strategy::Independent: return "independent";
    case Strategy::CompressionAware: return "compression-aware";
    case Strategy::EndToEnd: return "end-to-end";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  for (auto v : {Strategy::Autoencoder, Strategy::BaselineNoAE, Strategy::Independent,
                 Strategy::CompressionAware, Strategy::EndToEnd})
    if (to_string(v) == s || cli_name(v) == s) return v;
  throw std::invalid_argument("unknown strategy '" + s +
                              "' (expected autoencoder|baseline-no-ae|independent|compression-aware|end-to-end)");
}

// How a [W, n_ap] window feeds the AE. Flattened: one AP-major vector of
// n_ap * W = 152 values. PerAp: each AP's W = 152 series encoded on its own.
enum class AeLayout { Flattened, PerAp };

inline std::string to_string(AeLayout l) { return l == AeLayout::Flattened ? "flattened" : "per-ap"; }

inline AeLayout parse_layout(const std::string& s) {
  if (s == "flattened") return AeLayout::Flattened;
  if (s == "per-ap") return AeLayout::PerAp;
  throw std::invalid_argument("unknown AE layout '" + s + "' (expected flattened|per-ap)");
}

struct TrainingDiverged : NumericError {
  using NumericError::NumericError;
};

struct TrainPlan {
  double lr = 0.01;
  std::size_t batch = 32;
  std::size_t min_iterations = 1000;
  std::size_t max_iterations = 2000;
  std::size_t patience = 20;
  std::size_t eval_interval = 50;
  std::size_t eval_windows = 1024;
  double alpha = 0.5;
  std::uint64_t seed = 2025;
  AeLayout layout = AeLayout::Flattened;

  void validate() const {
    if (!(lr > 0) || !std::isfinite(lr)) throw std::invalid_argument("plan: lr must be > 0");
    if (batch < 1) throw std::invalid_argument("plan: batch must be >= 1");
    if (eval_interval < 1) throw std::invalid_argument("plan: eval_interval must be >= 1");
    if (patience < 1) throw std::invalid_argument("plan: patience must be >= 1");
    if (eval_windows < 1) throw std::invalid_argument("plan: eval_windows must be >= 1");
    if (max_iterations < min_iterations) {
      throw std::invalid_argument("plan: max_iterations must be >= min_iterations");
    }
    if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("plan: alpha must lie in [0, 1]");
  }

  // Experiments train for at least 1000 iterations.
  void check_protocol() const {
    validate();
    if (min_iterations < 1000) {
      throw std::invalid_argument("plan: min_iterations must be >= 1000 for experiment runs");
    }
  }

  json to_json() const {
    return {{"lr", lr},         {"batch", batch},         {"min_iterations", min_iterations},
            {"max_iterations", max_iterations},           {"patience", patience},
            {"eval_interval", eval_interval},             {"eval_windows", eval_windows},
            {"alpha", alpha},   {"seed", seed},           {"layout", to_string(layout)}};
  }
};

struct EvalPoint {
  std::size_t iteration = 0;
  double train_loss = 0;  // mean over the interval
  double val_loss = 0;
};

inline constexpr double kMinImprovement = 1e-6;

// True once `min_iterations` are done and the last `patience` evaluations
// have not improved on the best so far by more than 1e-6.
inline bool early_stop(const std::vector<EvalPoint>& history, std::size_t patience,
                       std::size_t min_iterations) {
  if (history.empty()) throw std::invalid_argument("early_stop: empty history");
  if (history.back().iteration < min_iterations) return false;
  double best = history.front().val_loss;
  std::size_t since = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].val_loss < best - kMinImprovement) {
      best = history[i].val_loss;
      since = 0;
    } else {
      ++since;
    }
  }
  return since >= patience;
}

struct TrainReport {
  Strategy strategy = Strategy::BaselineNoAE;
  std::optional<PredictorConfig> predictor;
  std::uint64_t seed = 0;
  std::vector<EvalPoint> history;
  std::size_t iterations = 0;
  std::size_t best_iteration = 0;
  std::string stop_reason;
  double val_rmse = 0;
  double val_mse = 0;
  std::optional<double> delta_pct;
  std::string baseline;
  std::size_t params = 0;
  double wall_clock_s = 0;
  std::string config_digest;

  json to_json() const {
    json hist = json::array();
    for (const auto& e : history)
      hist.push_back({{"iteration", e.iteration}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    json j = {{"strategy", to_string(strategy)},
              {"seed", seed},
              {"iterations", iterations},
              {"best_iteration", best_iteration},
              {"stop_reason", stop_reason},
              {"val_mse", val_mse},
              {"val_rmse", val_rmse},
              {"params", params},
              {"wall_clock_s", wall_clock_s},
              {"config_digest", config_digest},
              {"history", hist}};
    if (predictor) {
      j["predictor"] = {{"f", predictor->forward_hidden},
                        {"b", predictor->backward_hidden},
                        {"placement", to_string(predictor->placement)}};
    }
    if (delta_pct) {
      j["delta_pct"] = *delta_pct;
      j["baseline"] = baseline;
    }
    return j;
  }

  static std::string csv_header() {
    return "strategy,f,b,placement,seed,rmse,delta_pct,params,wall_clock_s";
  }

  std::string csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%s,%llu,%.6f,%s,%zu,%.3f", to_string(strategy).c_str(),
                  predictor ? predictor->forward_hidden : 0, predictor ? predictor->backward_hidden : 0,
                  predictor ? to_string(predictor->placement).c_str() : "", static_cast<unsigned long long>(seed),
                  val_rmse, delta_pct ? std::to_string(*delta_pct).c_str() : "", params, wall_clock_s);
    return buf;
  }
};

inline double delta_rmse_pct(double rmse, double baseline_rmse) {
  if (!(baseline_rmse > 0)) throw std::invalid_argument("delta: baseline RMSE must be > 0");
  return 100.0 * (baseline_rmse - rmse) / baseline_rmse;
}

// Attaches the improvement over a named baseline run.
inline void attach_delta(TrainReport& rep, const std::map<std::string, double>& runs,
                         const std::string& baseline) {
  auto it = runs.find(baseline);
  if (it == runs.end()) throw std::invalid_argument("delta requested against missing baseline '" + baseline + "'");
  rep.delta_pct = delta_rmse_pct(rep.val_rmse, it->second);
  rep.baseline = baseline;
}

// ------------------------------------------------------------------ data

template <typename T>
struct WindowData {
  Tensor<T> train_x, train_y;  // [N, W, n_ap], [N, n_ap]
  Tensor<T> val_x, val_y;
  std::size_t window() const { return train_x.dim(1); }
  std::size_t n_ap() const { return train_x.dim(2); }
};

template <typename T>
WindowData<T> make_window_data(const TrajectoryDataset& ds) {
  auto tr = window_dataset(ds, Split::Train);
  auto va = window_dataset(ds, Split::Validation);
  if (tr.count() == 0) throw std::invalid_argument("no training windows (trajectories too short?)");
  if (va.count() == 0) throw std::invalid_argument("no validation windows (need N >= 10 trajectories)");
  return {tr.inputs.template cast<T>(), tr.targets.template cast<T>(), va.inputs.template cast<T>(),
          va.targets.template cast<T>()};
}

// [B, W, A] -> AE input, tensor and graph forms.
inline Shape ae_input_shape(AeLayout layout, std::size_t B, std::size_t W, std::size_t A) {
  if (layout == AeLayout::Flattened) {
    if (A * W != kWindowFeatures) {
      throw ShapeError("flattened AE layout needs n_ap * window = 152, got " + std::to_string(A) + " x " +
                       std::to_string(W));
    }
    return {B, 1, A * W};
  }
  if (W != kWindowFeatures) throw ShapeError("per-ap AE layout needs window = 152, got " + std::to_string(W));
  return {B * A, 1, W};
}

template <typename T>
Var<T> to_ae_input(Var<T> x, AeLayout layout) {
  const auto& s = x.shape();
  return ops::reshape(ops::swap_last_two(x), ae_input_shape(layout, s[0], s[1], s[2]));
}

template <typename T>
Var<T> from_ae_output(Var<T> y, std::size_t B, std::size_t W, std::size_t A) {
  return ops::swap_last_two(ops::reshape(y, {B, A, W}));
}

template <typename T>
Tensor<T> to_ae_input(const Tensor<T>& x, AeLayout layout) {
  Graph<T> g(false);
  return to_ae_input(g.constant(x), layout).value();
}

template <typename T>
Tensor<T> from_ae_output(const Tensor<T>& y, std::size_t B, std::size_t W, std::size_t A) {
  Graph<T> g(false);
  return from_ae_output(g.constant(y), B, W, A).value();
}

template <typename T>
Var<T> ae_roundtrip(Graph<T>& g, Autoencoder<T>& ae, Var<T> x, AeLayout layout) {
  const auto s = x.shape();
  return from_ae_output(ae.reconstruct(g, to_ae_input(x, layout)), s[0], s[1], s[2]);
}

// decode(encode(x)) for a stack of windows, in chunks.
template <typename T>
Tensor<T> reconstruct_windows(Autoencoder<T>& ae, const Tensor<T>& x, AeLayout layout,
                              std::size_t chunk = 256) {
  Tensor<T> out(x.shape());
  const std::size_t n = x.dim(0), stride = x.size() / n;
  for (std::size_t first = 0; first < n; first += chunk) {
    const std::size_t m = std::min(chunk, n - first);
    Graph<T> g(false);
    auto r = ae_roundtrip(g, ae, g.constant(slice_rows(x, first, m)), layout).value();
    std::copy_n(r.ptr(), r.size(), out.ptr() + first * stride);
  }
  return out;
}

template <typename T>
Tensor<T> predict_windows(const Predictor<T>& p, const Tensor<T>& x, std::size_t chunk = 250) {
  const std::size_t n = x.dim(0);
  Tensor<T> out({n, kPredictorOutputs});
  for (std::size_t first = 0; first < n; first += chunk) {
    const std::size_t m = std::min(chunk, n - first);
    auto y = p.predict_fast(slice_rows(x, first, m));
    std::copy_n(y.ptr(), y.size(), out.ptr() + first * kPredictorOutputs);
  }
  return out;
}

// RMSE of repeating the last observed step.
template <typename T>
double last_value_rmse(const Tensor<T>& x, const Tensor<T>& y) {
  const std::size_t n = x.dim(0), W = x.dim(1), A = x.dim(2);
  Tensor<T> last({n, A});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < A; ++a) last.at(i, a) = x.at(i, W - 1, a);
  return rmse(last, y);
}

struct Evaluation {
  double mse = 0;
  double rmse = 0;
};

// Validation RMSE in normalized space; with an AE the predictor sees
// decode(encode(S)).
template <typename T>
Evaluation evaluate(const Predictor<T>& p, Autoencoder<T>* ae, const WindowData<T>& d,
                    AeLayout layout = AeLayout::Flattened) {
  const Tensor<T> x = ae ? reconstruct_windows(*ae, d.val_x, layout) : d.val_x;
  const double m = mse(predict_windows(p, x), d.val_y);
  return {m, std::sqrt(m)};
}

template <typename T>
RegressionMetrics reconstruction_metrics(Autoencoder<T>& ae, const WindowData<T>& d,
                                         AeLayout layout = AeLayout::Flattened) {
  return regression_metrics(reconstruct_windows(ae, d.val_x, layout), d.val_x);
}

inline void write_predictions_csv(const std::string& path, const Tensor<float>& pred,
                                  const Tensor<float>& target) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "row,ap,prediction,target\n";
  out.precision(9);
  for (std::size_t i = 0; i < pred.dim(0); ++i)
    for (std::size_t a = 0; a < pred.dim(1); ++a)
      out << i << "," << a << "," << pred.at(i, a) << "," << target.at(i, a) << "\n";
}

// ------------------------------------------------------------------ loop

namespace detail {

template <typename T>
std::vector<Tensor<T>> snapshot(const std::vector<Parameter<T>*>& ps) {
  std::vector<Tensor<T>> out;
  for (auto* p : ps) out.push_back(p->value);
  return out;
}

template <typename T>
void restore(const std::vector<Parameter<T>*>& ps, const std::vector<Tensor<T>>& snap) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = snap[i];
}

inline std::vector<std::size_t> eval_subset(std::size_t n, std::size_t budget, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (budget >= n) return idx;
  Rng rng = make_rng(seed, 0xe7a1);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(budget);
  std::sort(idx.begin(), idx.end());
  return idx;
}

class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(std::min(batch, n)), rng_(make_rng(seed, 0xba7c)) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next() {
    if (pos_ + batch_ > order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    std::vector<std::size_t> b(order_.begin() + pos_, order_.begin() + pos_ + batch_);
    pos_ += batch_;
    return b;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  Rng rng_;
};

struct LoopOutcome {
  std::vector<EvalPoint> history;
  std::size_t iterations = 0;
  std::size_t best_iteration = 0;
  std::string stop_reason;
};

// step(batch indices) runs forward + backward and returns the loss; eval()
// returns the validation loss. Parameters end at the best evaluation.
template <typename T>
LoopOutcome train_loop(const std::vector<Parameter<T>*>& params, std::size_t n_train,
                       const TrainPlan& plan, const std::function<double(const std::vector<std::size_t>&)>& step,
                       const std::function<double()>& eval, const std::string& context) {
  Adam<T> opt(params, {plan.lr});
  BatchSampler sampler(n_train, plan.batch, plan.seed);
  LoopOutcome out;
  auto best = snapshot(params);
  double best_val = std::numeric_limits<double>::infinity();
  double interval_loss = 0;
  std::size_t interval_n = 0;

  auto diverge = [&](std::size_t it, const std::string& what) {
    restore(params, best);
    throw TrainingDiverged(context + ": " + what + " at iteration " + std::to_string(it) +
                           "; parameters restored to the last good state (iteration " +
                           std::to_string(out.best_iteration) + ")");
  };

  for (std::size_t it = 1; it <= plan.max_iterations; ++it) {
    opt.zero_grad();
    double loss = 0;
    try {
      loss = step(sampler.next());
    } catch (const NumericError& e) {
      diverge(it, e.what());
    }
    if (!std::isfinite(loss)) diverge(it, "non-finite training loss");
    try {
      opt.step();
    } catch (const NumericError& e) {
      diverge(it, e.what());
    }
    interval_loss += loss;
    ++interval_n;
    out.iterations = it;
    if (it % plan.eval_interval != 0 && it != plan.max_iterations) continue;

    const double val = eval();
    if (!std::isfinite(val)) diverge(it, "non-finite validation loss");
    out.history.push_back({it, interval_loss / static_cast<double>(interval_n), val});
    interval_loss = 0;
    interval_n = 0;
    if (val < best_val - kMinImprovement) {
      best_val = val;
      best = snapshot(params);
      out.best_iteration = it;
    }
    if (early_stop(out.history, plan.patience, plan.min_iterations)) {
      out.stop_reason = "early stop";
      break;
    }
  }
  if (out.stop_reason.empty()) out.stop_reason = "iteration budget";
  restore(params, best);
  return out;
}

inline std::string digest_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_digest(Strategy s, const TrainPlan& plan,
                                 const std::optional<PredictorConfig>& pc) {
  json j = {{"strategy", to_string(s)}, {"plan", plan.to_json()}};
  if (pc) j["predictor"] = {pc->forward_hidden, pc->backward_hidden, to_string(pc->placement)};
  return digest_hex(j.dump());
}

template <typename T>
TrainReport make_report(Strategy s, const TrainPlan& plan, const std::optional<PredictorConfig>& pc,
                        LoopOutcome loop, std::size_t params,
                        std::chrono::steady_clock::time_point start) {
  TrainReport rep;
  rep.strategy = s;
  rep.predictor = pc;
  rep.seed = plan.seed;
  rep.history = std::move(loop.history);
  rep.iterations = loop.iterations;
  rep.best_iteration = loop.best_iteration;
  rep.stop_reason = std::move(loop.stop_reason);
  rep.params = params;
  rep.config_digest = config_digest(s, plan, pc);
  rep.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

template <typename T>
void set_eval(TrainReport& rep, Evaluation e) {
  rep.val_mse = e.mse;
  rep.val_rmse = e.rmse;
}

}  // namespace detail

// --------------------------------------------------------------- strategies

template <typename T>
TrainReport train_autoencoder(Autoencoder<T>& ae, const WindowData<T>& d, const TrainPlan& plan) {
  plan.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto sub = detail::eval_subset(d.val_x.dim(0), plan.eval_windows, plan.seed);
  const Tensor<T> val_in = to_ae_input(take_rows(d.val_x, sub), plan.layout);
  auto step = [&](const std::vector<std::size_t>& idx) {
    Graph<T> g;
    auto x = g.constant(to_ae_input(take_rows(d.train_x, idx), plan.layout));
    auto loss = ops::mse_loss(ae.reconstruct(g, x), x);
    g.backward(loss);
    return static_cast<double>(loss.value()[0]);
  };
  auto eval = [&] { return mse(ae.reconstruct(val_in), val_in); };
  auto loop = detail::train_loop<T>(ae.parameters(), d.train_x.dim(0), plan, step, eval, "autoencoder");
  auto rep = detail::make_report<T>(Strategy::Autoencoder, plan, std::nullopt, std::move(loop),
                                    ae.param_count(), start);
  const double m = mse(reconstruct_windows(ae, d.val_x, plan.layout), d.val_x);
  detail::set_eval<T>(rep, {m, std::sqrt(m)});
  return rep;
}

namespace detail {

// Predictor training on raw windows, or on reconstructions of a frozen AE.
template <typename T>
LoopOutcome fit_predictor(Predictor<T>& p, Autoencoder<T>* frozen, const WindowData<T>& d,
                          const TrainPlan& plan, const std::string& context) {
  const auto sub = eval_subset(d.val_x.dim(0), plan.eval_windows, plan.seed);
  Tensor<T> val_x = take_rows(d.val_x, sub);
  if (frozen) val_x = reconstruct_windows(*frozen, val_x, plan.layout);
  const Tensor<T> val_y = take_rows(d.val_y, sub);
  auto step = [&](const std::vector<std::size_t>& idx) {
    Graph<T> g;
    Tensor<T> xb = take_rows(d.train_x, idx);
    if (frozen) {
      Graph<T> inf(false);
      xb = ae_roundtrip(inf, *frozen, inf.constant(std::move(xb)), plan.layout).value();
    }
    auto loss = ops::mse_loss(p.forward(g, g.constant(std::move(xb))), g.constant(take_rows(d.train_y, idx)));
    g.backward(loss);
    return static_cast<double>(loss.value()[0]);
  };
  auto eval = [&] { return mse(predict_windows(p, val_x), val_y); };
  return train_loop<T>(p.parameters(), d.train_x.dim(0), plan, step, eval, context);
}

}  // namespace detail

template <typename T>
TrainReport train_baseline(Predictor<T>& p, const WindowData<T>& d, const TrainPlan& plan) {
  plan.validate();
  const auto start = std::chrono::steady_clock::now();
  auto loop = detail::fit_predictor<T>(p, nullptr, d, plan, "baseline predictor");
  auto rep = detail::make_report<T>(Strategy::BaselineNoAE, plan, p.config(), std::move(loop),
                                    p.param_count(), start);
  detail::set_eval<T>(rep, evaluate<T>(p, nullptr, d));
  return rep;
}

// Evaluation half of the independent strategy: an already-trained raw
// predictor consumes AE reconstructions.
template <typename T>
TrainReport independent_report(Predictor<T>& p, Autoencoder<T>& ae, const WindowData<T>& d,
                               const TrainPlan& plan, const TrainReport& predictor_run,
                               const TrainReport& ae_run) {
  TrainReport rep = predictor_run;
  rep.strategy = Strategy::Independent;
  rep.config_digest = detail::config_digest(Strategy::Independent, plan, p.config());
  rep.wall_clock_s = predictor_run.wall_clock_s + ae_run.wall_clock_s;
  rep.delta_pct.reset();
  detail::set_eval<T>(rep, evaluate(p, &ae, d, plan.layout));
  return rep;
}

template <typename T>
struct IndependentResult {
  TrainReport autoencoder;
  TrainReport predictor_raw;
  TrainReport report;
};

template <typename T>
IndependentResult<T> train_independent(Autoencoder<T>& ae, Predictor<T>& p, const WindowData<T>& d,
                                       const TrainPlan& plan) {
  IndependentResult<T> r;
  r.autoencoder = train_autoencoder(ae, d, plan);
  r.predictor_raw = train_baseline(p, d, plan);
  r.report = independent_report(p, ae, d, plan, r.predictor_raw, r.autoencoder);
  return r;
}

template <typename T>
TrainReport train_compression_aware(Autoencoder<T>& ae, Predictor<T>& p, const WindowData<T>& d,
                                    const TrainPlan& plan) {
  plan.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto before = checkpoint::digest(ae.save());
  auto loop = detail::fit_predictor<T>(p, &ae, d, plan, "compression-aware predictor");
  if (checkpoint::digest(ae.save()) != before) {
    throw std::logic_error("compression-aware training mutated the frozen autoencoder");
  }
  auto rep = detail::make_report<T>(Strategy::CompressionAware, plan, p.config(), std::move(loop),
                                    p.param_count(), start);
  detail::set_eval<T>(rep, evaluate(p, &ae, d, plan.layout));
  return rep;
}

// alpha * MSE(recon, S) + (1 - alpha) * MSE(predict(decode(encode(S))), y)
template <typename T>
Var<T> e2e_loss(Graph<T>& g, Autoencoder<T>& ae, Predictor<T>& p, Var<T> x, Var<T> y, T alpha,
                AeLayout layout) {
  const auto s = x.shape();
  auto in = to_ae_input(x, layout);
  auto rec = ae.reconstruct(g, in);
  auto pred = p.forward(g, from_ae_output(rec, s[0], s[1], s[2]));
  return ops::weighted_sum(ops::mse_loss(rec, in), alpha, ops::mse_loss(pred, y), T(1) - alpha);
}

template <typename T>
TrainReport train_e2e(Autoencoder<T>& ae, Predictor<T>& p, const WindowData<T>& d, const TrainPlan& plan) {
  plan.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto sub = detail::eval_subset(d.val_x.dim(0), plan.eval_windows, plan.seed);
  const Tensor<T> val_x = take_rows(d.val_x, sub), val_y = take_rows(d.val_y, sub);
  auto params = ae.parameters();
  for (auto* q : p.parameters()) params.push_back(q);
  const T alpha = static_cast<T>(plan.alpha);
  auto step = [&](const std::vector<std::size_t>& idx) {
    Graph<T> g;
    auto loss = e2e_loss(g, ae, p, g.constant(take_rows(d.train_x, idx)), g.constant(take_rows(d.train_y, idx)),
                         alpha, plan.layout);
    g.backward(loss);
    return static_cast<double>(loss.value()[0]);
  };
  auto eval = [&] {
    const Tensor<T> rec = reconstruct_windows(ae, val_x, plan.layout);
    return plan.alpha * mse(rec, val_x) + (1 - plan.alpha) * mse(predict_windows(p, rec), val_y);
  };
  auto loop = detail::train_loop<T>(params, d.train_x.dim(0), plan, step, eval,
                                    "end-to-end training (conflicting reconstruction/prediction gradients)");
  auto rep = detail::make_report<T>(Strategy::EndToEnd, plan, p.config(), std::move(loop),
                                    p.param_count() + ae.param_count(), start);
  detail::set_eval<T>(rep, evaluate(p, &ae, d, plan.layout));
  return rep;
}

}  // namespace lite
