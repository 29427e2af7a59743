#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "lite/experiment.hpp"

using namespace lite;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LITE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lite_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

// ------------------------------------------------------------------ config

TEST(Config, DefaultsMatchTheCommittedRun) {
  ExperimentConfig c;
  EXPECT_EQ(c.data.n_trajectories, 2500u);
  EXPECT_EQ(c.data.steps, 60u);
  EXPECT_EQ(c.window, 19u);
  EXPECT_EQ(c.predictor, (PredictorConfig{64, 128, SePlacement::BeforeBiLSTM}));
  EXPECT_EQ(c.training.lr, 0.01);
  EXPECT_EQ(c.training.batch, 32u);
  EXPECT_EQ(c.training.min_iterations, 1000u);
  EXPECT_EQ(c.bench.batch, 250u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, UnknownKeysNameTheField) {
  try {
    config_from_json(json::parse(R"({"training": {"lr": 0.01, "lerning_rate": 1}})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lerning_rate"), std::string::npos) << e.what();
  }
  EXPECT_THROW(config_from_json(json::parse(R"({"model": {}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"data": {"rooms": 3}})")), ConfigError);
}

TEST(Config, TopLevelSeedDrivesDataAndTraining) {
  auto c = config_from_json(json::parse(R"({"seed": 77, "data": {"seed": 5}})"));
  EXPECT_EQ(c.data.seed, 77u);
  EXPECT_EQ(c.training.seed, 77u);
  auto d = config_from_json(json::parse(R"({"data": {"seed": 5}})"));
  EXPECT_EQ(d.training.seed, 5u);
}

TEST(Config, JsonRoundTrip) {
  auto c = config_from_json(json::parse(
      R"({"seed": 3, "data": {"n_trajectories": 40, "diversity": 2.0}, "predictor": {"f": 32, "b": 96,
          "placement": "pre-fc"}, "training": {"strategy": "end-to-end", "alpha": 0.25, "max_iterations": 1500},
          "bench": {"batch": 100, "repetitions": 7}})"));
  auto back = config_from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.strategy, Strategy::EndToEnd);
  EXPECT_EQ(back.predictor.placement, SePlacement::PreFC);
  EXPECT_EQ(back.data.diversity, 2.0);
}

TEST(Config, ValidationRejectsOutOfProtocolValues) {
  auto bad = [](const char* text) { return config_from_json(json::parse(text)); };
  EXPECT_THROW(bad(R"({"training": {"min_iterations": 10, "max_iterations": 10}})").validate(),
               std::invalid_argument);
  EXPECT_THROW(bad(R"({"data": {"window": 20}})").validate(), ConfigError);
  EXPECT_THROW(bad(R"({"data": {"n_ap": 4}})").validate(), std::invalid_argument);
  EXPECT_THROW(bad(R"({"bench": {"repetitions": 2}})").validate(), ConfigError);
  EXPECT_THROW(bad(R"({"training": {"alpha": 1.5}})").validate(), std::invalid_argument);
  EXPECT_THROW(bad(R"({"predictor": {"placement": "middle"}})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"training": {"strategy": "joint"}})"), std::invalid_argument);
}

TEST(Config, StrategyNamesParseInBothSpellings) {
  for (auto s : {Strategy::Autoencoder, Strategy::BaselineNoAE, Strategy::Independent, Strategy::CompressionAware,
                 Strategy::EndToEnd}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_EQ(parse_strategy(cli_name(s)), s);
  }
}

// -------------------------------------------------------------- experiment

TEST(Experiment, ErrorKinds) {
  EXPECT_EQ(error_kind(NumericError("x")), 2);
  EXPECT_EQ(error_kind(TrainingDiverged("x")), 2);
  EXPECT_EQ(error_kind(UndefinedCorrelation("x")), 2);
  EXPECT_EQ(error_kind(ConfigError("x")), 1);
  EXPECT_EQ(error_kind(ShapeError("x")), 1);
  EXPECT_EQ(error_kind(FormatError("x")), 1);
}

TEST(Experiment, ReportJsonRoundTrip) {
  TrainReport r;
  r.strategy = Strategy::CompressionAware;
  r.predictor = PredictorConfig{64, 128, SePlacement::BeforeBiLSTM};
  r.seed = 9;
  r.history = {{50, 0.5, 0.4}, {100, 0.3, 0.35}};
  r.iterations = 100;
  r.best_iteration = 100;
  r.stop_reason = "iteration budget";
  r.val_mse = 0.04;
  r.val_rmse = 0.2;
  r.params = 91169;
  r.wall_clock_s = 1.5;
  r.config_digest = "abc";
  r.delta_pct = -3.0;
  r.baseline = kDeltaReference;
  const auto back = report_from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_EQ(run_id(back), "compression-aware-abc");
}

TEST(Experiment, SweepRejectsEmptyListAndIsolatesBadN) {
  EXPECT_THROW(sweep_n<float>(ExperimentConfig{}, {}), std::invalid_argument);
  ExperimentConfig c;
  c.training.min_iterations = 10;  // never reached: both rows fail before training
  const auto rows = sweep_n<float>(c, {1, 0});
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.error_kind, 1);
    EXPECT_NE(r.error.find("N >= 2"), std::string::npos);
  }
  const auto j = rows[0].to_json();
  EXPECT_EQ(SweepRow::from_json(j).to_json(), j);
  EXPECT_NE(render_sweep_table(rows).find("failed"), std::string::npos);
}

TEST(Experiment, SweepRowJsonAndPlotData) {
  SweepRow a;
  a.n = 200;
  a.ok = true;
  a.diversity = {0.5, 0.1, 0.52, {0.4, 0.5, 0.6}, 100};
  a.ae = {0.3, std::sqrt(0.3), 0.6};
  a.rmse = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  a.runs = {"a", "b", "c", "d", "e", "f"};
  a.ae_run = "ae";
  SweepRow b = a;
  b.n = 1000;
  b.diversity.stepwise = {0.7, 0.8};
  EXPECT_EQ(SweepRow::from_json(a.to_json()).to_json(), a.to_json());
  EXPECT_EQ(stepwise_csv({a, b}), "step,n200,n1000\n0,0.4,0.7\n1,0.5,0.8\n2,0.6,\n");
  const auto csv = sweep_csv({a});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "n,pearson_mean,pearson_std,pearson_median,ae_mse,ae_rmse,ae_r2,se_bilstm,bilstm,indep_ae_bilstm,"
            "indep_ae_se_bilstm,compression_aware,end_to_end,error");
}

TEST(Experiment, StrategyTableShowsRunIdsAndDeltas) {
  TrainReport base;
  base.strategy = Strategy::BaselineNoAE;
  base.predictor = baseline_config();
  base.val_rmse = 0.134;
  base.config_digest = "d1";
  TrainReport se = base;
  se.predictor = PredictorConfig{};
  se.val_rmse = 0.127;
  se.config_digest = "d2";
  const std::map<std::string, double> ref{{kDeltaReference, base.val_rmse}};
  attach_delta(base, ref, kDeltaReference);
  attach_delta(se, ref, kDeltaReference);
  const auto t = render_strategy_table({base, se});
  EXPECT_NE(t.find("baseline-no-ae-d2"), std::string::npos);
  EXPECT_NE(t.find("+5.22"), std::string::npos) << t;
  EXPECT_EQ(model_label(base), "BiLSTM");
  EXPECT_EQ(model_label(se), "SE-BiLSTM");
}

// --------------------------------------------------------------------- cli

TEST(Cli, AuditPassesWithExitZero) {
  const auto dir = scratch("audit");
  EXPECT_EQ(run_cli("audit-params --out-dir " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "audit.txt"));
}

TEST(Cli, UsageAndConfigErrorsExitOne) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("--precision f16 audit-params"), 1);
  write(dir / "bad.json", R"({"training": {"lerning_rate": 1}})");
  EXPECT_EQ(run_cli("--config " + (dir / "bad.json").string() + " generate --out-dir " + dir.string()), 1);
  EXPECT_FALSE(fs::exists(dir / "dataset.ldat"));
}

TEST(Cli, GenerateIsDeterministic) {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  ASSERT_EQ(run_cli("--seed 4 --out-dir " + a.string() + " generate --trajectories 20"), 0);
  ASSERT_EQ(run_cli("--seed 4 --out-dir " + b.string() + " generate --trajectories 20"), 0);
  EXPECT_EQ(read_file_bytes((a / "dataset.ldat").string()), read_file_bytes((b / "dataset.ldat").string()));
  const auto ds = load_dataset((a / "dataset.ldat").string());
  EXPECT_EQ(ds.trajectories.size(), 20u);
  ASSERT_TRUE(ds.generator.has_value());
  EXPECT_EQ(ds.generator->seed, 4u);
}

TEST(Cli, MissingPrerequisitesExitOne) {
  const auto dir = scratch("prereq");
  EXPECT_EQ(run_cli("--out-dir " + dir.string() + " train --strategy baseline-no-ae"), 1);
  ASSERT_EQ(run_cli("--out-dir " + dir.string() + " generate --trajectories 20"), 0);
  EXPECT_EQ(run_cli("--out-dir " + dir.string() + " train --strategy compression-aware"), 1);
  EXPECT_EQ(run_cli("--out-dir " + dir.string() + " bench"), 1);
  EXPECT_FALSE(fs::exists(dir / "runs"));
}

TEST(Cli, SweepIsolatesInvalidN) {
  const auto dir = scratch("sweep");
  EXPECT_EQ(run_cli("--out-dir " + dir.string() + " sweep-n --n 1"), 1);
  const auto rows = json::parse(std::ifstream(dir / "sweep.json"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0]["ok"].get<bool>());
}

TEST(Cli, ReportWithoutArtifactsStillRendersAudit) {
  const auto dir = scratch("report");
  EXPECT_EQ(run_cli("--out-dir " + dir.string() + " report"), 0);
  std::ifstream in(dir / "report.md");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("91169"), std::string::npos);
}
