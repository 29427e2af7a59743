#pragma once

// Latency/throughput harness: per-sample latency ls (ms) from the median of
// repeated timed batches, qps = 1000 / ls.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace lite {

struct BenchResult {
  std::string model;
  bool optimized = false;
  std::size_t batch = 250;
  std::size_t threads = 1;
  std::size_t repetitions = 0;
  std::size_t samples_per_rep = 0;
  double median_ms = 0;
  double min_ms = 0;
  double max_ms = 0;
  double ls_ms = 0;
  double qps = 0;
  std::optional<double> improvement_pct;
  std::string reference;

  static std::string csv_header() { return "model,optimized_flag,batch,ls_ms,qps,improvement_pct"; }

  std::string csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%d,%zu,%.9g,%.9g,%s", model.c_str(), optimized ? 1 : 0, batch,
                  ls_ms, qps, improvement_pct ? std::to_string(*improvement_pct).c_str() : "");
    return buf;
  }
};

struct BenchOptions {
  std::size_t batch = 250;
  std::size_t warmup = 3;
  std::size_t repetitions = 5;
  std::size_t threads = 1;
};

inline double qps_from_latency(double ls_ms) { return 1000.0 / ls_ms; }

inline double improvement_pct(double qps, double qps_ref) {
  if (!(qps_ref > 0)) throw std::invalid_argument("improvement: reference qps must be > 0");
  return 100.0 * (qps / qps_ref - 1.0);
}

inline void attach_reference(BenchResult& r, const BenchResult& ref) {
  r.improvement_pct = improvement_pct(r.qps, ref.qps);
  r.reference = ref.model + (ref.optimized ? " (optimized)" : "");
}

// `run_batch` processes one batch of `opt.batch` samples. With threads > 1
// every worker runs its own batch concurrently per repetition.
inline BenchResult bench(const std::string& model, bool optimized, const std::function<void()>& run_batch,
                         BenchOptions opt = {}) {
  if (opt.repetitions < 3) throw std::invalid_argument("bench: repetitions must be >= 3");
  if (opt.batch < 1 || opt.threads < 1) throw std::invalid_argument("bench: batch and threads must be >= 1");
  for (std::size_t i = 0; i < opt.warmup; ++i) run_batch();

  std::size_t inner = 1;
  std::vector<double> times;
  std::atomic<std::size_t> processed{0};
  for (int attempt = 0; attempt < 20; ++attempt) {
    times.clear();
    bool zero = false;
    for (std::size_t r = 0; r < opt.repetitions; ++r) {
      processed = 0;
      const auto t0 = std::chrono::steady_clock::now();
      auto work = [&] {
        for (std::size_t k = 0; k < inner; ++k) {
          run_batch();
          processed += opt.batch;
        }
      };
      if (opt.threads == 1) {
        work();
      } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < opt.threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
      }
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      zero = zero || ms <= 0.0;
      times.push_back(ms);
    }
    if (!zero) break;
    inner *= 4;  // clock too coarse for this workload
  }

  BenchResult res;
  res.model = model;
  res.optimized = optimized;
  res.batch = opt.batch;
  res.threads = opt.threads;
  res.repetitions = opt.repetitions;
  res.samples_per_rep = processed.load();
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size() / 2;
  res.median_ms = times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]);
  res.min_ms = times.front();
  res.max_ms = times.back();
  if (!(res.median_ms > 0)) throw std::runtime_error("bench: could not obtain a non-zero measurement");
  res.ls_ms = res.median_ms / static_cast<double>(res.samples_per_rep);
  res.qps = qps_from_latency(res.ls_ms);
  return res;
}

}  // namespace lite
