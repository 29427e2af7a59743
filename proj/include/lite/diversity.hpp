#pragma once

// Pearson correlation and the trajectory-diversity report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lite/channel.hpp"
#include "lite/rng.hpp"

namespace lite {

struct UndefinedCorrelation : std::domain_error {
  using std::domain_error::domain_error;
};

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) throw UndefinedCorrelation("pearson: constant input, correlation undefined");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

struct DiversityReport {
  double mean = 0;
  double std = 0;
  double median = 0;
  std::vector<double> stepwise;  // per step index, mean correlation over pairs
  std::size_t n_pairs = 0;
};

inline std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::size_t n,
                                                                     std::size_t budget,
                                                                     std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t total = n * (n - 1) / 2;
  if (total <= budget) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    return pairs;
  }
  Rng rng = make_rng(seed, 0xd1e5);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (pairs.size() < budget) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i != j) pairs.emplace_back(std::min(i, j), std::max(i, j));
  }
  return pairs;
}

// For each sampled pair and each AP: Pearson over the aligned gain
// sequences. The step curve correlates the two trajectories' AP gain
// vectors at each step index.
inline DiversityReport diversity_report(const TrajectoryDataset& ds, std::size_t pair_budget,
                                        std::uint64_t seed) {
  const auto& trs = ds.trajectories;
  if (trs.size() < 2) throw std::invalid_argument("diversity_report: need at least 2 trajectories");
  if (pair_budget == 0) throw std::invalid_argument("diversity_report: pair budget must be >= 1");
  const auto pairs = sample_pairs(trs.size(), pair_budget, seed);

  std::size_t steps = trs.front().steps();
  for (const auto& t : trs) steps = std::min(steps, t.steps());

  std::vector<double> corr;
  std::vector<double> step_sum(steps, 0.0);
  std::vector<std::size_t> step_n(steps, 0);
  std::vector<double> a(steps), b(steps);
  for (const auto& [i, j] : pairs) {
    const auto& ti = trs[i];
    const auto& tj = trs[j];
    for (std::size_t ap = 0; ap < ds.n_ap; ++ap) {
      for (std::size_t t = 0; t < steps; ++t) {
        a[t] = ti.gain(t, ap);
        b[t] = tj.gain(t, ap);
      }
      corr.push_back(pearson(a, b));
    }
    if (ds.n_ap >= 2) {
      std::vector<double> va(ds.n_ap), vb(ds.n_ap);
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t ap = 0; ap < ds.n_ap; ++ap) {
          va[ap] = ti.gain(t, ap);
          vb[ap] = tj.gain(t, ap);
        }
        step_sum[t] += pearson(va, vb);
        ++step_n[t];
      }
    }
  }

  DiversityReport rep;
  rep.n_pairs = pairs.size();
  const double n = static_cast<double>(corr.size());
  rep.mean = std::accumulate(corr.begin(), corr.end(), 0.0) / n;
  double var = 0;
  for (double c : corr) var += (c - rep.mean) * (c - rep.mean);
  rep.std = std::sqrt(var / n);
  std::sort(corr.begin(), corr.end());
  const std::size_t m = corr.size() / 2;
  rep.median = corr.size() % 2 ? corr[m] : 0.5 * (corr[m - 1] + corr[m]);
  for (std::size_t t = 0; t < steps; ++t)
    if (step_n[t]) rep.stepwise.push_back(step_sum[t] / static_cast<double>(step_n[t]));
  return rep;
}

}  // namespace lite
