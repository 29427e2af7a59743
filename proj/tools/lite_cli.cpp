// lite: generate datasets, train, audit, sweep, benchmark and render reports.
//
// Exit codes: 0 ok, 1 validation/usage error, 2 numeric failure (divergence,
// undefined statistics), 3 parameter audit mismatch.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lite/experiment.hpp"
#include "lite/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lite;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  std::size_t threads = 1;
  std::string precision = "f32";
};

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.set_seed(*g.seed);
  if (g.threads < 1) throw UsageError("--threads must be >= 1");
  c.bench.threads = g.threads;
  return c;
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string history_csv(const TrainReport& r) {
  std::string out = "iteration,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : r.history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e.iteration, e.train_loss, e.val_loss);
    out += buf;
  }
  return out;
}

std::string predictor_tag(const PredictorConfig& c) {
  return std::to_string(c.forward_hidden) + "x" + std::to_string(c.backward_hidden) + "-" + to_string(c.placement);
}

// ------------------------------------------------------------------ generate

int cmd_generate(const Globals& g, std::optional<std::size_t> n, const std::string& preset,
                 const std::vector<std::string>& csv, std::string output) {
  auto c = resolve_config(g);
  if (preset == "small") c.data.n_trajectories = 200;
  if (n) c.data.n_trajectories = *n;
  if (output.empty()) output = (fs::path(g.out_dir) / "dataset.ldat").string();
  fs::create_directories(fs::path(output).parent_path().empty() ? "." : fs::path(output).parent_path());

  TrajectoryDataset ds;
  if (!csv.empty()) {
    ds = dataset_from_csv(csv, c.window, c.data.seed);
  } else {
    c.validate();
    ds = generate_trajectories(c.data, c.window);
  }
  save_dataset(output, ds);
  std::printf("wrote %s (%zu trajectories, %zu APs, digest %s)\n", output.c_str(), ds.trajectories.size(), ds.n_ap,
              hex64(checkpoint::digest(read_file_bytes(output))).c_str());
  const auto div = diversity_report(ds, 50000, c.data.seed);
  std::printf("pairwise Pearson correlation over %zu pairs: mean %.4f  std %.4f  median %.4f\n", div.n_pairs, div.mean,
              div.std, div.median);
  return 0;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
  std::string strategy;
  std::string dataset;
  std::string ae_checkpoint;
};

template <typename T>
struct RunWriter {
  fs::path out;
  json config;

  fs::path ckpt(const std::string& name) const { return out / "checkpoints" / (name + ".ckpt"); }

  void save(const std::string& name, const std::vector<std::uint8_t>& bytes) const {
    fs::create_directories(out / "checkpoints");
    write_file_bytes(ckpt(name).string(), bytes);
  }

  // One directory per run, named after the strategy and the digest of the
  // full configuration, holding everything needed to replay it.
  TrainReport record(TrainReport rep, const std::map<std::string, std::string>& checkpoints) const {
    rep.config_digest = detail::digest_hex(config.dump() + to_string(rep.strategy) +
                                           (rep.predictor ? predictor_tag(*rep.predictor) : ""));
    const fs::path dir = out / "runs" / run_id(rep);
    json j = rep.to_json();
    json ck = json::object();
    for (const auto& [k, v] : checkpoints) ck[k] = {{"path", v}, {"digest", hex64(checkpoint::digest(read_file_bytes(v)))}};
    j["checkpoints"] = ck;
    write_text(dir / "config.json", config.dump(2) + "\n");
    write_text(dir / "report.json", j.dump(2) + "\n");
    write_text(dir / "metrics.csv", history_csv(rep));
    write_text(dir / "summary.csv", TrainReport::csv_header() + "\n" + rep.csv_row() + "\n");
    std::printf("%-16s %-24s rmse %.5f  iterations %zu (%s)  run %s\n", to_string(rep.strategy).c_str(),
                model_label(rep).c_str(), rep.val_rmse, rep.iterations, rep.stop_reason.c_str(), dir.string().c_str());
    return rep;
  }
};

template <typename T>
int train_typed(const Globals& g, const ExperimentConfig& c, const TrainArgs& a) {
  const std::string dataset = a.dataset.empty() ? (fs::path(g.out_dir) / "dataset.ldat").string() : a.dataset;
  if (!fs::exists(dataset)) {
    throw UsageError("dataset " + dataset + " not found; run `lite generate --out-dir " + g.out_dir +
                     "` first or pass --dataset");
  }
  const auto ds = load_dataset(dataset, c.data.seed);
  if (ds.window != c.window) {
    throw UsageError("dataset window " + std::to_string(ds.window) + " differs from config data.window " +
                     std::to_string(c.window));
  }
  const auto d = make_window_data<T>(ds);
  const TrainPlan& plan = c.training;
  RunWriter<T> w{g.out_dir, c.to_json()};
  w.config["precision"] = g.precision;
  w.config["dataset"] = {{"path", dataset}, {"digest", hex64(checkpoint::digest(read_file_bytes(dataset)))}};
  const std::string ptag = "predictor-" + predictor_tag(c.predictor);
  const std::string ae_path = a.ae_checkpoint.empty() ? w.ckpt("autoencoder").string() : a.ae_checkpoint;

  auto load_ae = [&](Autoencoder<T>& ae) {
    if (!fs::exists(ae_path)) {
      throw UsageError("strategy " + a.strategy + " needs a trained autoencoder checkpoint (" + ae_path +
                       "); run `lite train --strategy autoencoder` first or pass --ae-checkpoint");
    }
    ae.load(read_file_bytes(ae_path));
  };

  const std::string s = a.strategy;
  if (s == "all") {
    SuiteOptions so;
    so.log = [](const std::string& m) { std::printf("%s\n", m.c_str()); };
    auto suite = run_strategy_suite(d, c, so);
    w.save("autoencoder", suite->ae.save());
    w.save("predictor-" + predictor_tag(baseline_config()), suite->bilstm_raw.save());
    w.save(ptag, suite->se_raw.save());
    w.save("compression-aware-" + ptag, suite->se_ca.save());
    w.save("end-to-end-autoencoder", suite->e2e_ae.save());
    w.save("end-to-end-" + ptag, suite->e2e_pred.save());
    const std::string ae_ck = w.ckpt("autoencoder").string();
    const std::string bl_ck = w.ckpt("predictor-" + predictor_tag(baseline_config())).string();
    const std::string se_ck = w.ckpt(ptag).string();
    w.record(suite->ae_run, {{"autoencoder", ae_ck}});
    const std::vector<TrainReport> table = {
        w.record(suite->bilstm_baseline, {{"predictor", bl_ck}}),
        w.record(suite->se_baseline, {{"predictor", se_ck}}),
        w.record(suite->indep_bilstm, {{"autoencoder", ae_ck}, {"predictor", bl_ck}}),
        w.record(suite->indep_se, {{"autoencoder", ae_ck}, {"predictor", se_ck}}),
        w.record(suite->compression_aware,
                 {{"autoencoder", ae_ck}, {"predictor", w.ckpt("compression-aware-" + ptag).string()}}),
        w.record(suite->end_to_end, {{"autoencoder", w.ckpt("end-to-end-autoencoder").string()},
                                     {"predictor", w.ckpt("end-to-end-" + ptag).string()}})};
    std::printf("\n%s", render_strategy_table(table).c_str());
    return 0;
  }

  switch (parse_strategy(s)) {
    case Strategy::Autoencoder: {
      Autoencoder<T> ae(plan.seed);
      auto rep = train_autoencoder(ae, d, plan);
      w.save("autoencoder", ae.save());
      w.record(rep, {{"autoencoder", w.ckpt("autoencoder").string()}});
      const auto m = reconstruction_metrics(ae, d, plan.layout);
      std::printf("reconstruction: mse %.6f  rmse %.6f  r2 %.6f\n", m.mse, m.rmse, m.r2);
      return 0;
    }
    case Strategy::BaselineNoAE: {
      Predictor<T> p(c.predictor, plan.seed);
      auto rep = train_baseline(p, d, plan);
      w.save(ptag, p.save());
      w.record(rep, {{"predictor", w.ckpt(ptag).string()}});
      return 0;
    }
    case Strategy::Independent: {
      Autoencoder<T> ae(plan.seed);
      TrainReport ae_run;
      if (fs::exists(ae_path)) {
        ae.load(read_file_bytes(ae_path));
      } else {
        ae_run = train_autoencoder(ae, d, plan);
        w.save("autoencoder", ae.save());
        w.record(ae_run, {{"autoencoder", ae_path}});
      }
      Predictor<T> p(c.predictor, plan.seed);
      auto raw = train_baseline(p, d, plan);
      w.save(ptag, p.save());
      w.record(raw, {{"predictor", w.ckpt(ptag).string()}});
      w.record(independent_report(p, ae, d, plan, raw, ae_run),
               {{"autoencoder", ae_path}, {"predictor", w.ckpt(ptag).string()}});
      return 0;
    }
    case Strategy::CompressionAware: {
      Autoencoder<T> ae;
      load_ae(ae);
      Predictor<T> p(c.predictor, plan.seed);
      auto rep = train_compression_aware(ae, p, d, plan);
      w.save("compression-aware-" + ptag, p.save());
      w.record(rep, {{"autoencoder", ae_path}, {"predictor", w.ckpt("compression-aware-" + ptag).string()}});
      return 0;
    }
    case Strategy::EndToEnd: {
      Autoencoder<T> ae(plan.seed);
      Predictor<T> p(c.predictor, plan.seed);
      auto rep = train_e2e(ae, p, d, plan);
      w.save("end-to-end-autoencoder", ae.save());
      w.save("end-to-end-" + ptag, p.save());
      w.record(rep, {{"autoencoder", w.ckpt("end-to-end-autoencoder").string()},
                     {"predictor", w.ckpt("end-to-end-" + ptag).string()}});
      return 0;
    }
  }
  return 0;
}

int cmd_train(const Globals& g, TrainArgs a) {
  auto c = resolve_config(g);
  if (!a.strategy.empty() && a.strategy != "all") c.strategy = parse_strategy(a.strategy);
  if (a.strategy.empty()) a.strategy = cli_name(c.strategy);
  c.validate();
  return g.precision == "f64" ? train_typed<double>(g, c, a) : train_typed<float>(g, c, a);
}

// --------------------------------------------------------------------- audit

int cmd_audit(const Globals& g) {
  const auto rep = audit_parameter_table();
  const std::string text = render_audit(rep);
  std::printf("%s", text.c_str());
  write_text(fs::path(g.out_dir) / "audit.txt", text);
  if (rep.passed()) {
    std::printf("all %zu cells match\n", rep.cells.size());
    return 0;
  }
  for (const auto& c : rep.failures()) {
    std::printf("MISMATCH (%zu,%zu) %s: params %zu vs published %zu, reduction %.2f%% vs %.2f%%\n", c.f, c.b,
                to_string(c.placement).c_str(), c.computed_params, c.expected_params, c.computed_reduction,
                c.expected_reduction);
  }
  return 3;
}

// ------------------------------------------------------------------- sweep-n

template <typename T>
int sweep_typed(const Globals& g, const ExperimentConfig& c, const std::vector<std::size_t>& ns) {
  SweepOptions<T> opt;
  opt.threads = g.threads;
  opt.log = [](const std::string& m) {
    std::printf("%s\n", m.c_str());
    std::fflush(stdout);
  };
  // every sweep cell links to a logged report under sweep_runs/
  opt.on_suite = [&](std::size_t n, const StrategySuite<T>& s) {
    const fs::path dir = fs::path(g.out_dir) / "sweep_runs" / ("n" + std::to_string(n));
    std::vector<TrainReport> reps = s.rows();
    reps.push_back(s.ae_run);
    for (const auto& r : reps) write_text(dir / (run_id(r) + ".json"), r.to_json().dump(2) + "\n");
  };
  const auto rows = sweep_n<T>(c, ns, opt);
  json j = json::array();
  for (const auto& r : rows) j.push_back(r.to_json());
  const fs::path out = g.out_dir;
  write_text(out / "sweep.json", j.dump(2) + "\n");
  write_text(out / "sweep.csv", sweep_csv(rows));
  write_text(out / "stepwise_correlation.csv", stepwise_csv(rows));
  const std::string table = render_sweep_table(rows);
  write_text(out / "sweep.txt", table);
  std::printf("\n%s", table.c_str());
  for (const auto& r : rows)
    if (!r.ok) return r.error_kind;
  return 0;
}

int cmd_sweep(const Globals& g, const std::vector<std::size_t>& ns) {
  auto c = resolve_config(g);
  c.validate();
  return g.precision == "f64" ? sweep_typed<double>(g, c, ns) : sweep_typed<float>(g, c, ns);
}

// --------------------------------------------------------------------- bench

template <typename T>
int bench_typed(const Globals& g, const ExperimentConfig& c, std::string bilstm_ck, std::string se_ck) {
  const fs::path ckdir = fs::path(g.out_dir) / "checkpoints";
  const PredictorConfig se_cfg{c.predictor.forward_hidden, c.predictor.backward_hidden, SePlacement::BeforeBiLSTM};
  if (bilstm_ck.empty()) bilstm_ck = (ckdir / ("predictor-" + predictor_tag(baseline_config()) + ".ckpt")).string();
  if (se_ck.empty()) se_ck = (ckdir / ("predictor-" + predictor_tag(se_cfg) + ".ckpt")).string();
  for (const auto& p : {bilstm_ck, se_ck}) {
    if (!fs::exists(p)) {
      throw UsageError("checkpoint " + p +
                       " not found; train the predictors first (`lite train --strategy all`, or "
                       "`--strategy baseline-no-ae` with each predictor config) or pass --bilstm-checkpoint/--se-checkpoint");
    }
  }
  Predictor<T> bilstm(baseline_config()), se(se_cfg);
  bilstm.load(read_file_bytes(bilstm_ck));
  se.load(read_file_bytes(se_ck));

  GeneratorConfig gc = c.data;
  gc.n_trajectories = 20;
  const auto pool = make_window_data<T>(generate_trajectories(gc, c.window)).train_x;
  auto windows = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i % pool.dim(0);
    return take_rows(pool, idx);
  };
  const auto xb = windows(c.bench.batch), x1 = windows(1);

  BenchOptions opt = c.bench;
  BenchOptions one = opt;
  one.batch = 1;
  one.repetitions = std::max<std::size_t>(opt.repetitions, 25);
  std::vector<BenchResult> rows;
  rows.push_back(bench("BiLSTM", false, [&] { bilstm.predict(xb); }, opt));
  rows.push_back(bench("BiLSTM", true, [&] { bilstm.predict_fast(xb); }, opt));
  rows.push_back(bench("SE-BiLSTM", false, [&] { se.predict(xb); }, opt));
  rows.push_back(bench("SE-BiLSTM", true, [&] { se.predict_fast(xb); }, opt));
  rows.push_back(bench("BiLSTM", true, [&] { bilstm.predict_fast(x1); }, one));
  rows.push_back(bench("SE-BiLSTM", true, [&] { se.predict_fast(x1); }, one));
  for (auto& r : rows) attach_reference(r, rows[0]);

  std::string csv = BenchResult::csv_header() + "\n";
  for (const auto& r : rows) csv += r.csv_row() + "\n";
  write_text(fs::path(g.out_dir) / "bench.csv", csv);
  std::printf("%s", render_bench_table(rows).c_str());
  return 0;
}

int cmd_bench(const Globals& g, const std::string& bilstm_ck, const std::string& se_ck) {
  auto c = resolve_config(g);
  c.validate();
  return g.precision == "f64" ? bench_typed<double>(g, c, bilstm_ck, se_ck)
                              : bench_typed<float>(g, c, bilstm_ck, se_ck);
}

// -------------------------------------------------------------------- report

std::vector<BenchResult> read_bench_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  std::getline(in, line);
  if (line != BenchResult::csv_header()) throw FormatError(p.string() + ": unexpected header");
  std::vector<BenchResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() == 5) f.emplace_back();
    if (f.size() != 6) throw FormatError(p.string() + ": malformed row '" + line + "'");
    BenchResult r;
    r.model = f[0];
    r.optimized = f[1] == "1";
    r.batch = std::stoul(f[2]);
    r.ls_ms = std::stod(f[3]);
    r.qps = std::stod(f[4]);
    if (!f[5].empty()) r.improvement_pct = std::stod(f[5]);
    rows.push_back(r);
  }
  return rows;
}

int cmd_report(const Globals& g) {
  const fs::path out = g.out_dir;
  std::string md = "# Report\n\n";
  std::size_t sections = 0;

  const auto audit = audit_parameter_table();
  md += "## Parameter audit\n\n```\n" + render_audit(audit) + "```\n\n";

  std::vector<TrainReport> runs;
  if (fs::exists(out / "runs")) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(out / "runs"))
      if (fs::exists(e.path() / "report.json")) files.push_back(e.path() / "report.json");
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto r = report_from_json(json::parse(read_text(f)));
      if (r.strategy != Strategy::Autoencoder) runs.push_back(std::move(r));
    }
  }
  if (!runs.empty()) {
    auto key = [](const TrainReport& r) {
      const bool plain = r.predictor && r.predictor->placement == SePlacement::None;
      return std::make_pair(static_cast<int>(r.strategy), plain ? 0 : 1);
    };
    std::stable_sort(runs.begin(), runs.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    // Deltas recomputed against the BiLSTM baseline run when one is present.
    for (const auto& r : runs) {
      if (r.strategy == Strategy::BaselineNoAE && r.predictor && *r.predictor == baseline_config()) {
        const std::map<std::string, double> ref{{kDeltaReference, r.val_rmse}};
        for (auto& x : runs) attach_delta(x, ref, kDeltaReference);
        break;
      }
    }
    md += "## Strategy comparison\n\n```\n" + render_strategy_table(runs) + "```\n\n";
    ++sections;
  }
  if (fs::exists(out / "bench.csv")) {
    md += "## Inference benchmark\n\n```\n" + render_bench_table(read_bench_csv(out / "bench.csv")) + "```\n\n";
    ++sections;
  }
  if (fs::exists(out / "sweep.json")) {
    std::vector<SweepRow> rows;
    for (const auto& j : json::parse(read_text(out / "sweep.json"))) rows.push_back(SweepRow::from_json(j));
    md += "## Dataset size sweep\n\n```\n" + render_sweep_table(rows) + "```\n\n";
    write_text(out / "stepwise_correlation.csv", stepwise_csv(rows));
    md += "Step-wise correlation plot data: stepwise_correlation.csv\n\n";
    ++sections;
  }
  write_text(out / "report.md", md);
  std::printf("%s", md.c_str());
  if (sections == 0) std::printf("(no training, bench or sweep artifacts under %s yet)\n", out.string().c_str());
  return audit.passed() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LITE channel compression and prediction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for data generation and training");
  app.add_option("--out-dir", g.out_dir, "directory for datasets, runs, checkpoints and reports")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for bench and sweep-n")->capture_default_str();
  app.add_option("--precision", g.precision, "floating point precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();

  std::optional<std::size_t> gen_n;
  std::string preset = "default", gen_out;
  std::vector<std::string> csv;
  auto* gen = app.add_subcommand("generate", "generate (or import) a trajectory dataset");
  gen->add_option("--trajectories", gen_n, "number of trajectories (overrides config)");
  gen->add_option("--preset", preset, "default: 2500 trajectories; small: 200")
      ->check(CLI::IsMember({"default", "small"}));
  gen->add_option("--csv", csv, "import trajectories from CSV files (rows = steps, columns = APs)")
      ->check(CLI::ExistingFile);
  gen->add_option("--output", gen_out, "dataset path (default <out-dir>/dataset.ldat)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train one strategy, or all of them");
  train->add_option("--strategy", ta.strategy,
                    "autoencoder|baseline-no-ae|independent|compression-aware|end-to-end|all");
  train->add_option("--dataset", ta.dataset, "dataset path (default <out-dir>/dataset.ldat)");
  train->add_option("--ae-checkpoint", ta.ae_checkpoint, "trained autoencoder checkpoint");

  auto* audit = app.add_subcommand("audit-params", "recompute the published parameter table");

  std::vector<std::size_t> ns{200, 1000, 2500};
  auto* sweep = app.add_subcommand("sweep-n", "dataset size sweep");
  sweep->add_option("--n", ns, "trajectory counts, comma separated")->delimiter(',')->capture_default_str();

  std::string bilstm_ck, se_ck;
  auto* bench_cmd = app.add_subcommand("bench", "latency/throughput of plain and optimized inference");
  bench_cmd->add_option("--bilstm-checkpoint", bilstm_ck, "BiLSTM (256,256) checkpoint");
  bench_cmd->add_option("--se-checkpoint", se_ck, "SE-BiLSTM checkpoint");

  auto* report = app.add_subcommand("report", "render tables from the artifacts in --out-dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(g, gen_n, preset, csv, gen_out);
    if (*train) return cmd_train(g, ta);
    if (*audit) return cmd_audit(g);
    if (*sweep) return cmd_sweep(g, ns);
    if (*bench_cmd) return cmd_bench(g, bilstm_ck, se_ck);
    if (*report) return cmd_report(g);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return error_kind(e);
  }
  return 0;
}
