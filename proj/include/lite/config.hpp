#pragma once

// Experiment configuration: one JSON file with sections
//   data, ae, predictor, training, bench
// plus an optional top-level "seed" that sets both the generator and the
// training seed. Unknown keys are rejected.

#include <fstream>
#include <string>

#include "lite/bench.hpp"
#include "lite/dataset_io.hpp"
#include "lite/training.hpp"

namespace lite {

struct ExperimentConfig {
  GeneratorConfig data;
  std::size_t window = 19;
  PredictorConfig predictor;  // (64, 128), SE before the BiLSTM
  TrainPlan training;
  Strategy strategy = Strategy::BaselineNoAE;
  BenchOptions bench;

  ExperimentConfig() { data.steps = 60; }

  void set_seed(std::uint64_t seed) {
    data.seed = seed;
    training.seed = seed;
  }

  void validate() const {
    data.validate();
    predictor.validate();
    training.check_protocol();
    if (window < 1) throw ConfigError("data.window must be >= 1");
    if (training.layout == AeLayout::Flattened && window * data.n_ap != kWindowFeatures) {
      throw ConfigError("data: flattened AE layout needs n_ap * window = 152");
    }
    if (training.layout == AeLayout::PerAp && window != kWindowFeatures) {
      throw ConfigError("data: per-ap AE layout needs window = 152");
    }
    if (data.n_ap != kPredictorInputs) throw ConfigError("data.n_ap must be 8 (predictor input width)");
    if (bench.repetitions < 3) throw ConfigError("bench.repetitions must be >= 3");
    if (bench.batch < 1 || bench.threads < 1) throw ConfigError("bench.batch and bench.threads must be >= 1");
  }

  json to_json() const {
    json d = lite::to_json(data);
    d["window"] = window;
    json t = training.to_json();
    t["strategy"] = to_string(strategy);
    t.erase("layout");
    t.erase("seed");
    return {{"seed", training.seed},
            {"data", d},
            {"ae", {{"layout", to_string(training.layout)}}},
            {"predictor",
             {{"f", predictor.forward_hidden},
              {"b", predictor.backward_hidden},
              {"placement", to_string(predictor.placement)}}},
            {"training", t},
            {"bench",
             {{"batch", bench.batch},
              {"warmup", bench.warmup},
              {"repetitions", bench.repetitions},
              {"threads", bench.threads}}}};
  }
};

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "config", {"seed", "data", "ae", "predictor", "training", "bench"});
  if (j.contains("data")) {
    c.data = generator_from_json(j["data"], c.data);
    read_opt(j["data"], "window", c.window);
  }
  if (j.contains("ae")) {
    check_keys(j["ae"], "ae", {"layout"});
    if (j["ae"].contains("layout")) c.training.layout = parse_layout(j["ae"]["layout"].get<std::string>());
  }
  if (j.contains("predictor")) {
    const auto& p = j["predictor"];
    check_keys(p, "predictor", {"f", "b", "placement"});
    read_opt(p, "f", c.predictor.forward_hidden);
    read_opt(p, "b", c.predictor.backward_hidden);
    if (p.contains("placement")) c.predictor.placement = parse_placement(p["placement"].get<std::string>());
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    check_keys(t, "training",
               {"strategy", "lr", "batch", "min_iterations", "max_iterations", "patience", "eval_interval",
                "eval_windows", "alpha"});
    if (t.contains("strategy")) c.strategy = parse_strategy(t["strategy"].get<std::string>());
    read_opt(t, "lr", c.training.lr);
    read_opt(t, "batch", c.training.batch);
    read_opt(t, "min_iterations", c.training.min_iterations);
    read_opt(t, "max_iterations", c.training.max_iterations);
    read_opt(t, "patience", c.training.patience);
    read_opt(t, "eval_interval", c.training.eval_interval);
    read_opt(t, "eval_windows", c.training.eval_windows);
    read_opt(t, "alpha", c.training.alpha);
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    check_keys(b, "bench", {"batch", "warmup", "repetitions", "threads"});
    read_opt(b, "batch", c.bench.batch);
    read_opt(b, "warmup", c.bench.warmup);
    read_opt(b, "repetitions", c.bench.repetitions);
    read_opt(b, "threads", c.bench.threads);
  }
  if (j.contains("seed")) c.set_seed(j["seed"].get<std::uint64_t>());
  else c.training.seed = c.data.seed;
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace lite
