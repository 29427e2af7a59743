#pragma once

// Experiment drivers: the strategy comparison on one dataset, the
// dataset-size sweep, and the text tables rendered from their reports.

#include <array>
#include <cstdio>
#include <functional>
#include <future>
#include <memory>
#include <mutex>

#include "lite/audit.hpp"
#include "lite/config.hpp"
#include "lite/diversity.hpp"

namespace lite {

using Logger = std::function<void(const std::string&)>;

// 1 validation, 2 numeric.
inline int error_kind(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const std::domain_error*>(&e)) return 2;
  return 1;
}

inline std::string run_id(const TrainReport& r) { return cli_name(r.strategy) + "-" + r.config_digest; }

inline TrainReport report_from_json(const json& j) {
  TrainReport r;
  r.strategy = parse_strategy(j.at("strategy").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.best_iteration = j.at("best_iteration").get<std::size_t>();
  r.stop_reason = j.at("stop_reason").get<std::string>();
  r.val_mse = j.at("val_mse").get<double>();
  r.val_rmse = j.at("val_rmse").get<double>();
  r.params = j.at("params").get<std::size_t>();
  r.wall_clock_s = j.at("wall_clock_s").get<double>();
  r.config_digest = j.at("config_digest").get<std::string>();
  for (const auto& e : j.at("history"))
    r.history.push_back({e.at("iteration").get<std::size_t>(), e.at("train_loss").get<double>(),
                         e.at("val_loss").get<double>()});
  if (j.contains("predictor")) {
    const auto& p = j["predictor"];
    r.predictor = PredictorConfig{p.at("f").get<std::size_t>(), p.at("b").get<std::size_t>(),
                                  parse_placement(p.at("placement").get<std::string>())};
  }
  if (j.contains("delta_pct")) {
    r.delta_pct = j["delta_pct"].get<double>();
    r.baseline = j.at("baseline").get<std::string>();
  }
  return r;
}

// ------------------------------------------------------------ strategy suite

inline constexpr const char* kDeltaReference = "BiLSTM baseline";

// Every model of the comparison, trained on one dataset with one seed. The
// reconstruction-trained AE is shared by the independent and
// compression-aware rows; end-to-end starts from a fresh AE.
template <typename T>
struct StrategySuite {
  explicit StrategySuite(const ExperimentConfig& c)
      : ae(c.training.seed),
        e2e_ae(c.training.seed),
        bilstm_raw(baseline_config(), c.training.seed),
        se_raw(c.predictor, c.training.seed),
        se_ca(c.predictor, c.training.seed),
        e2e_pred(c.predictor, c.training.seed) {}

  Autoencoder<T> ae, e2e_ae;
  Predictor<T> bilstm_raw, se_raw, se_ca, e2e_pred;
  std::unique_ptr<Predictor<T>> se_after_fc;

  TrainReport ae_run;
  RegressionMetrics ae_metrics;
  double last_value_rmse = 0;
  TrainReport bilstm_baseline, se_baseline, indep_bilstm, indep_se, compression_aware, end_to_end;
  std::optional<TrainReport> after_fc;

  // Comparison-table order.
  std::vector<TrainReport> rows() const {
    return {bilstm_baseline, se_baseline, indep_bilstm, indep_se, compression_aware, end_to_end};
  }
};

struct SuiteOptions {
  bool after_fc = false;  // also train the predictor with the SE block after the FC head
  Logger log;
};

template <typename T>
std::unique_ptr<StrategySuite<T>> run_strategy_suite(const WindowData<T>& d, const ExperimentConfig& c,
                                                     const SuiteOptions& opt = {}) {
  auto log = [&](const std::string& m) {
    if (opt.log) opt.log(m);
  };
  auto done = [&](const TrainReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-16s rmse %.5f  %zu iterations (%s)  %.1fs", to_string(r.strategy).c_str(),
                  r.val_rmse, r.iterations, r.stop_reason.c_str(), r.wall_clock_s);
    log(buf);
  };
  const TrainPlan& plan = c.training;
  auto s = std::make_unique<StrategySuite<T>>(c);
  s->last_value_rmse = last_value_rmse(d.val_x, d.val_y);

  log("training autoencoder");
  s->ae_run = train_autoencoder(s->ae, d, plan);
  s->ae_metrics = reconstruction_metrics(s->ae, d, plan.layout);
  done(s->ae_run);
  log("training BiLSTM baseline");
  s->bilstm_baseline = train_baseline(s->bilstm_raw, d, plan);
  done(s->bilstm_baseline);
  log("training SE-BiLSTM baseline");
  s->se_baseline = train_baseline(s->se_raw, d, plan);
  done(s->se_baseline);
  s->indep_bilstm = independent_report(s->bilstm_raw, s->ae, d, plan, s->bilstm_baseline, s->ae_run);
  s->indep_se = independent_report(s->se_raw, s->ae, d, plan, s->se_baseline, s->ae_run);
  log("training compression-aware SE-BiLSTM");
  s->compression_aware = train_compression_aware(s->ae, s->se_ca, d, plan);
  done(s->compression_aware);
  log("training end-to-end");
  s->end_to_end = train_e2e(s->e2e_ae, s->e2e_pred, d, plan);
  done(s->end_to_end);
  if (opt.after_fc) {
    PredictorConfig pc = c.predictor;
    pc.placement = SePlacement::AfterFC;
    s->se_after_fc = std::make_unique<Predictor<T>>(pc, plan.seed);
    log("training SE-BiLSTM with SE after FC");
    s->after_fc = train_baseline(*s->se_after_fc, d, plan);
    done(*s->after_fc);
  }

  const std::map<std::string, double> ref{{kDeltaReference, s->bilstm_baseline.val_rmse}};
  for (TrainReport* r : {&s->bilstm_baseline, &s->se_baseline, &s->indep_bilstm, &s->indep_se,
                         &s->compression_aware, &s->end_to_end})
    attach_delta(*r, ref, kDeltaReference);
  if (s->after_fc) attach_delta(*s->after_fc, ref, kDeltaReference);
  return s;
}

// ------------------------------------------------------------ dataset sweep

inline constexpr std::array<const char*, 6> kSweepColumns = {
    "se_bilstm", "bilstm", "indep_ae_bilstm", "indep_ae_se_bilstm", "compression_aware", "end_to_end"};

struct SweepRow {
  std::size_t n = 0;
  bool ok = false;
  int error_kind = 0;
  std::string error;
  DiversityReport diversity;
  RegressionMetrics ae;
  std::array<double, 6> rmse{};
  std::array<std::string, 6> runs;
  std::string ae_run;
  double wall_clock_s = 0;

  json to_json() const {
    json j = {{"n", n}, {"ok", ok}};
    if (!ok) {
      j["error"] = error;
      j["error_kind"] = error_kind;
      return j;
    }
    j["pearson"] = {{"mean", diversity.mean},
                    {"std", diversity.std},
                    {"median", diversity.median},
                    {"pairs", diversity.n_pairs},
                    {"stepwise", diversity.stepwise}};
    j["ae"] = {{"mse", ae.mse}, {"rmse", ae.rmse}, {"r2", ae.r2}, {"run", ae_run}};
    json p = json::object();
    for (std::size_t k = 0; k < rmse.size(); ++k) p[kSweepColumns[k]] = {{"rmse", rmse[k]}, {"run", runs[k]}};
    j["rmse"] = p;
    j["wall_clock_s"] = wall_clock_s;
    return j;
  }

  static SweepRow from_json(const json& j) {
    SweepRow r;
    r.n = j.at("n").get<std::size_t>();
    r.ok = j.at("ok").get<bool>();
    if (!r.ok) {
      r.error = j.at("error").get<std::string>();
      r.error_kind = j.at("error_kind").get<int>();
      return r;
    }
    const auto& pe = j.at("pearson");
    r.diversity.mean = pe.at("mean").get<double>();
    r.diversity.std = pe.at("std").get<double>();
    r.diversity.median = pe.at("median").get<double>();
    r.diversity.n_pairs = pe.at("pairs").get<std::size_t>();
    r.diversity.stepwise = pe.at("stepwise").get<std::vector<double>>();
    const auto& a = j.at("ae");
    r.ae = {a.at("mse").get<double>(), a.at("rmse").get<double>(), a.at("r2").get<double>()};
    r.ae_run = a.at("run").get<std::string>();
    for (std::size_t k = 0; k < r.rmse.size(); ++k) {
      const auto& c = j.at("rmse").at(kSweepColumns[k]);
      r.rmse[k] = c.at("rmse").get<double>();
      r.runs[k] = c.at("run").get<std::string>();
    }
    r.wall_clock_s = j.at("wall_clock_s").get<double>();
    return r;
  }
};

template <typename T>
struct SweepOptions {
  std::size_t pair_budget = 50000;
  std::size_t threads = 1;  // concurrent N values
  bool after_fc = false;
  Logger log;
  // Called with every completed suite, e.g. to keep models or reports.
  std::function<void(std::size_t n, const StrategySuite<T>&)> on_suite;
};

template <typename T>
SweepRow sweep_one(const ExperimentConfig& base, std::size_t n, const SweepOptions<T>& opt) {
  SweepRow row;
  row.n = n;
  const auto start = std::chrono::steady_clock::now();
  auto log = [&](const std::string& m) {
    if (opt.log) opt.log("[N=" + std::to_string(n) + "] " + m);
  };
  try {
    if (n < 2) throw std::invalid_argument("N=" + std::to_string(n) + ": trajectory diversity needs N >= 2");
    ExperimentConfig c = base;
    c.data.n_trajectories = n;
    c.validate();
    log("generating " + std::to_string(n) + " trajectories");
    const auto ds = generate_trajectories(c.data, c.window);
    row.diversity = diversity_report(ds, opt.pair_budget, c.data.seed);
    const auto d = make_window_data<T>(ds);
    SuiteOptions so;
    so.after_fc = opt.after_fc;
    so.log = log;
    auto s = run_strategy_suite(d, c, so);
    row.ae = s->ae_metrics;
    const std::string prefix = "n" + std::to_string(n) + "/";
    row.ae_run = prefix + run_id(s->ae_run);
    const std::array<const TrainReport*, 6> order = {&s->se_baseline,  &s->bilstm_baseline,
                                                     &s->indep_bilstm, &s->indep_se,
                                                     &s->compression_aware, &s->end_to_end};
    for (std::size_t k = 0; k < order.size(); ++k) {
      row.rmse[k] = order[k]->val_rmse;
      row.runs[k] = prefix + run_id(*order[k]);
    }
    if (opt.on_suite) opt.on_suite(n, *s);
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
    row.error_kind = error_kind(e);
    log("failed: " + row.error);
  }
  row.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

// Failures stay inside their own row; the other N values still run.
template <typename T>
std::vector<SweepRow> sweep_n(const ExperimentConfig& base, const std::vector<std::size_t>& ns,
                              SweepOptions<T> opt = {}) {
  if (ns.empty()) throw std::invalid_argument("sweep-n: empty N list");
  std::vector<SweepRow> rows(ns.size());
  if (opt.threads <= 1) {
    for (std::size_t i = 0; i < ns.size(); ++i) rows[i] = sweep_one<T>(base, ns[i], opt);
    return rows;
  }
  std::mutex mu;
  auto user_log = opt.log;
  if (user_log) {
    opt.log = [&](const std::string& m) {
      std::lock_guard lock(mu);
      user_log(m);
    };
  }
  auto user_cb = opt.on_suite;
  if (user_cb) {
    opt.on_suite = [&](std::size_t n, const StrategySuite<T>& s) {
      std::lock_guard lock(mu);
      user_cb(n, s);
    };
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(opt.threads, ns.size()); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < ns.size();) rows[i] = sweep_one<T>(base, ns[i], opt);
    });
  }
  for (auto& th : pool) th.join();
  return rows;
}

// ------------------------------------------------------------------ tables

inline std::string model_label(const TrainReport& r) {
  if (r.strategy == Strategy::Autoencoder) return "AE";
  std::string m = r.predictor && r.predictor->placement == SePlacement::None ? "BiLSTM" : "SE-BiLSTM";
  if (r.predictor && r.predictor->placement != SePlacement::None &&
      r.predictor->placement != SePlacement::BeforeBiLSTM) {
    m += " (SE " + to_string(r.predictor->placement) + ")";
  }
  return r.strategy == Strategy::BaselineNoAE ? m : "AE -> " + m;
}

inline std::string strategy_label(Strategy s) {
  switch (s) {
    case Strategy::Autoencoder: return "Reconstruction";
    case Strategy::BaselineNoAE: return "Without AE";
    case Strategy::Independent: return "Independent";
    case Strategy::CompressionAware: return "Compression-aware";
    case Strategy::EndToEnd: return "End-to-end";
  }
  return "?";
}

inline std::string render_strategy_table(const std::vector<TrainReport>& rows) {
  std::string out;
  char line[320];
  std::snprintf(line, sizeof line, "%-28s | %-18s | %-8s | %-10s | %-8s | %s\n", "Model", "Training strategy", "RMSE",
                "dRMSE(%)", "Params", "Run");
  out += line;
  out += std::string(110, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-28s | %-18s | %8.4f | %+10.2f | %8zu | %s\n", model_label(r).c_str(),
                  strategy_label(r.strategy).c_str(), r.val_rmse, r.delta_pct.value_or(0.0), r.params,
                  run_id(r).c_str());
    out += line;
  }
  return out;
}

inline std::string render_sweep_table(const std::vector<SweepRow>& rows) {
  std::string out;
  char line[400];
  std::snprintf(line, sizeof line,
                "%6s | %-22s | %-24s | %-9s %-9s %-9s %-9s %-9s %-9s\n", "N", "Pearson mean/std/median",
                "AE MSE/RMSE/R2", "SE-BiLSTM", "BiLSTM", "AE->BiL", "AE->SE", "CompAw", "E2E");
  out += line;
  out += std::string(130, '-') + "\n";
  for (const auto& r : rows) {
    if (!r.ok) {
      std::snprintf(line, sizeof line, "%6zu | failed: %s\n", r.n, r.error.c_str());
      out += line;
      continue;
    }
    std::snprintf(line, sizeof line,
                  "%6zu | %6.3f %6.3f %6.3f   | %7.4f %7.4f %7.4f | %-9.4f %-9.4f %-9.4f %-9.4f %-9.4f %-9.4f\n", r.n,
                  r.diversity.mean, r.diversity.std, r.diversity.median, r.ae.mse, r.ae.rmse, r.ae.r2, r.rmse[0],
                  r.rmse[1], r.rmse[2], r.rmse[3], r.rmse[4], r.rmse[5]);
    out += line;
  }
  return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "n,pearson_mean,pearson_std,pearson_median,ae_mse,ae_rmse,ae_r2";
  for (const char* c : kSweepColumns) out += std::string(",") + c;
  out += ",error\n";
  char buf[64];
  for (const auto& r : rows) {
    out += std::to_string(r.n);
    if (!r.ok) {
      out += std::string(12, ',') + "\"" + r.error + "\"\n";
      continue;
    }
    for (double v : {r.diversity.mean, r.diversity.std, r.diversity.median, r.ae.mse, r.ae.rmse, r.ae.r2}) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      out += buf;
    }
    for (double v : r.rmse) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      out += buf;
    }
    out += ",\n";
  }
  return out;
}

// Plot data: mean pairwise correlation per time step, one column per N.
inline std::string stepwise_csv(const std::vector<SweepRow>& rows) {
  std::vector<const SweepRow*> ok;
  std::size_t steps = 0;
  for (const auto& r : rows)
    if (r.ok) {
      ok.push_back(&r);
      steps = std::max(steps, r.diversity.stepwise.size());
    }
  std::string out = "step";
  for (const auto* r : ok) out += ",n" + std::to_string(r->n);
  out += "\n";
  char buf[64];
  for (std::size_t t = 0; t < steps; ++t) {
    out += std::to_string(t);
    for (const auto* r : ok) {
      if (t < r->diversity.stepwise.size()) {
        std::snprintf(buf, sizeof buf, ",%.9g", r->diversity.stepwise[t]);
        out += buf;
      } else {
        out += ",";
      }
    }
    out += "\n";
  }
  return out;
}

inline std::string render_bench_table(const std::vector<BenchResult>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s | %-9s | %5s | %14s | %12s | %s\n", "Model", "Optimized", "Batch",
                "Lat/sample(ms)", "QPS", "Imp. (%)");
  out += line;
  out += std::string(78, '-') + "\n";
  for (const auto& r : rows) {
    char imp[32] = "";
    if (r.improvement_pct) std::snprintf(imp, sizeof imp, "%+.1f", *r.improvement_pct);
    std::snprintf(line, sizeof line, "%-12s | %-9s | %5zu | %14.6f | %12.1f | %s\n", r.model.c_str(),
                  r.optimized ? "yes" : "no", r.batch, r.ls_ms, r.qps, imp);
    out += line;
  }
  return out;
}

}  // namespace lite
