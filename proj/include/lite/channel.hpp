#pragma once

// Per-AP large-scale gain trajectories: CSI aggregation, synthetic mobility
// generation, train/validation split, z-score normalization and windowing.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lite/rng.hpp"
#include "lite/tensor.hpp"

namespace lite {

struct Point {
  double x = 0;
  double y = 0;
};

// ----------------------------------------------------------- aggregation

struct ChannelSnapshot {
  std::size_t n_ap = 0;
  std::size_t n_ant = 0;
  std::size_t n_sb = 0;
  std::vector<std::complex<double>> gains_complex;  // [n_ap, n_ant, n_sb]
  std::vector<double> gains_beta;                   // [n_ap]
  std::int64_t timestamp = 0;
};

// Exactly one representation may be present at ingestion.
inline void validate_snapshot(const ChannelSnapshot& s) {
  if (s.n_ap == 0) throw std::invalid_argument("snapshot: n_ap must be >= 1");
  const bool has_complex = !s.gains_complex.empty(), has_beta = !s.gains_beta.empty();
  if (has_complex == has_beta) {
    throw std::invalid_argument("snapshot: exactly one of complex CSI or beta must be present");
  }
  if (has_beta && s.gains_beta.size() != s.n_ap) throw ShapeError("snapshot: beta length != n_ap");
}

// beta_a = mean over antennas and subcarriers of |h|^2.
inline std::vector<double> aggregate_csi(const ChannelSnapshot& s, bool to_db = false) {
  if (s.gains_complex.empty()) throw std::invalid_argument("aggregate_csi: no complex CSI present");
  if (s.n_ap == 0) throw std::invalid_argument("aggregate_csi: n_ap must be >= 1");
  if (s.n_ant == 0 || s.n_sb == 0) {
    throw std::invalid_argument("aggregate_csi: empty antenna or subcarrier axis");
  }
  if (s.gains_complex.size() != s.n_ap * s.n_ant * s.n_sb) {
    throw ShapeError("aggregate_csi: tensor size does not match [n_ap, n_ant, n_sb]");
  }
  std::vector<double> beta(s.n_ap);
  const std::size_t per_ap = s.n_ant * s.n_sb;
  for (std::size_t a = 0; a < s.n_ap; ++a) {
    double acc = 0;
    for (std::size_t i = 0; i < per_ap; ++i) acc += std::norm(s.gains_complex[a * per_ap + i]);
    beta[a] = acc / static_cast<double>(per_ap);
    if (to_db) beta[a] = 10.0 * std::log10(beta[a]);
  }
  return beta;
}

// ------------------------------------------------------------- generator

struct GeneratorConfig {
  double room_x = 20.0;
  double room_y = 20.0;
  std::size_t n_ap = 8;
  std::vector<Point> ap_positions;  // empty: 4x2 grid over the room
  std::size_t n_trajectories = 2500;
  std::size_t steps = 60;
  double dt = 0.1;          // s
  double speed_min = 0.5;   // m/s
  double speed_max = 1.5;
  double path_loss_exponent = 2.5;
  double ref_gain_db = -30.0;  // at 1 m
  double height_diff = 1.5;    // AP above UE, m
  double shadowing_sigma_db = 4.0;
  double decorrelation_m = 2.0;
  double knot_spacing_m = 0.5;
  double diversity = 1.0;
  bool output_db = true;
  std::uint64_t seed = 2025;

  std::vector<Point> resolved_aps() const {
    if (!ap_positions.empty()) return ap_positions;
    std::vector<Point> aps;
    const std::size_t cols = (n_ap + 1) / 2;
    for (std::size_t i = 0; i < n_ap; ++i) {
      const std::size_t r = i / cols, c = i % cols;
      const std::size_t rows = (n_ap + cols - 1) / cols;
      aps.push_back({room_x * (c + 0.5) / cols, room_y * (r + 0.5) / rows});
    }
    return aps;
  }

  void validate() const {
    if (n_trajectories < 1) throw std::invalid_argument("generator: n_trajectories must be >= 1");
    if (n_ap < 1) throw std::invalid_argument("generator: n_ap must be >= 1");
    if (steps < 1) throw std::invalid_argument("generator: steps must be >= 1");
    if (decorrelation_m <= 0) {
      throw std::invalid_argument("generator: decorrelation distance must be > 0");
    }
    if (diversity <= 0) throw std::invalid_argument("generator: diversity must be > 0");
    if (knot_spacing_m <= 0) throw std::invalid_argument("generator: knot spacing must be > 0");
    if (speed_min < 0 || speed_max < speed_min) {
      throw std::invalid_argument("generator: invalid speed range");
    }
    if (room_x <= 0 || room_y <= 0) throw std::invalid_argument("generator: invalid room size");
    const auto aps = resolved_aps();
    if (aps.size() != n_ap) throw std::invalid_argument("generator: ap_positions size != n_ap");
    for (const auto& p : aps) {
      if (p.x < 0 || p.x > room_x || p.y < 0 || p.y > room_y) {
        throw std::invalid_argument("generator: AP position outside the room");
      }
    }
  }

  // The diversity knob widens the waypoint scatter and shortens the
  // shadowing decorrelation distance together.
  double waypoint_spread() const { return std::min(1.0, 0.15 * diversity); }
  double effective_decorrelation() const { return decorrelation_m / diversity; }
};

struct Trajectory {
  std::uint32_t id = 0;
  std::vector<Point> waypoints;
  double speed = 0;
  std::uint64_t rng_seed = 0;
  std::size_t n_ap = 0;
  std::vector<float> gains;  // [steps, n_ap] row-major

  std::size_t steps() const { return n_ap ? gains.size() / n_ap : 0; }
  float gain(std::size_t t, std::size_t ap) const { return gains[t * n_ap + ap]; }
  std::vector<double> ap_series(std::size_t ap) const {
    std::vector<double> s(steps());
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = gain(t, ap);
    return s;
  }
};

namespace detail {

inline Point clamp_to_room(Point p, const GeneratorConfig& c) {
  return {std::clamp(p.x, 0.0, c.room_x), std::clamp(p.y, 0.0, c.room_y)};
}

// Common route endpoints for a dataset; individual trajectories scatter
// around them.
inline std::pair<Point, Point> route_anchors(const GeneratorConfig& c) {
  Rng rng = make_rng(c.seed, 0);
  std::uniform_real_distribution<double> u(0.1, 0.4);
  Point a{c.room_x * u(rng), c.room_y * u(rng)};
  Point b{c.room_x * (1.0 - u(rng)), c.room_y * (1.0 - u(rng))};
  return {a, b};
}

// Exponentially correlated shadowing sampled at knots along the travelled
// distance and interpolated linearly between them.
class ShadowingTrack {
 public:
  ShadowingTrack(double sigma, double dc, double spacing, Rng& rng)
      : sigma_(sigma), rho_(std::exp(-spacing / dc)), spacing_(spacing), rng_(rng) {
    knots_.push_back(sigma_ * normal_(rng_));
  }

  double at(double distance) {
    const double pos = distance / spacing_;
    const auto k = static_cast<std::size_t>(std::floor(pos));
    while (knots_.size() < k + 2) {
      knots_.push_back(rho_ * knots_.back() +
                       std::sqrt(1.0 - rho_ * rho_) * sigma_ * normal_(rng_));
    }
    const double frac = pos - static_cast<double>(k);
    return (1.0 - frac) * knots_[k] + frac * knots_[k + 1];
  }

 private:
  double sigma_, rho_, spacing_;
  Rng& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::vector<double> knots_;
};

}  // namespace detail

// Deterministic in (config.seed, id) alone.
inline Trajectory generate_trajectory(const GeneratorConfig& c, std::uint32_t id) {
  Trajectory tr;
  tr.id = id;
  tr.n_ap = c.n_ap;
  tr.rng_seed = stream_seed(c.seed, 1 + static_cast<std::uint64_t>(id));
  Rng rng(tr.rng_seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);

  const auto [anchor_a, anchor_b] = detail::route_anchors(c);
  const double spread = c.waypoint_spread();
  auto jitter = [&](Point p) {
    return detail::clamp_to_room({p.x + spread * c.room_x * unit(rng), p.y + spread * c.room_y * unit(rng)}, c);
  };
  std::uniform_real_distribution<double> speed_dist(c.speed_min, c.speed_max);
  tr.speed = c.speed_max > c.speed_min ? speed_dist(rng) : c.speed_min;
  tr.waypoints.push_back(jitter(anchor_a));
  tr.waypoints.push_back(jitter(anchor_b));

  const auto aps = c.resolved_aps();
  const double dc = c.effective_decorrelation();
  const double spacing = std::min(c.knot_spacing_m, dc / 2.0);
  std::vector<detail::ShadowingTrack> shadow;
  shadow.reserve(c.n_ap);
  for (std::size_t a = 0; a < c.n_ap; ++a) shadow.emplace_back(c.shadowing_sigma_db, dc, spacing, rng);

  Point pos = tr.waypoints[0];
  std::size_t target = 1;
  double travelled = 0;
  tr.gains.resize(c.steps * c.n_ap);
  for (std::size_t t = 0; t < c.steps; ++t) {
    for (std::size_t a = 0; a < c.n_ap; ++a) {
      const double dx = pos.x - aps[a].x, dy = pos.y - aps[a].y;
      const double d = std::sqrt(dx * dx + dy * dy + c.height_diff * c.height_diff);
      double g = c.ref_gain_db - 10.0 * c.path_loss_exponent * std::log10(std::max(d, 1.0)) +
                 shadow[a].at(travelled);
      if (!c.output_db) g = std::pow(10.0, g / 10.0);
      tr.gains[t * c.n_ap + a] = static_cast<float>(g);
    }
    // advance along the waypoint chain; a reached waypoint spawns the next
    // one around the opposite anchor
    double remaining = tr.speed * c.dt;
    while (remaining > 0) {
      const Point w = tr.waypoints[target];
      const double dx = w.x - pos.x, dy = w.y - pos.y;
      const double dist = std::sqrt(dx * dx + dy * dy);
      if (dist > remaining) {
        pos = {pos.x + dx / dist * remaining, pos.y + dy / dist * remaining};
        travelled += remaining;
        remaining = 0;
      } else {
        pos = w;
        travelled += dist;
        remaining -= dist;
        tr.waypoints.push_back(jitter(target % 2 == 1 ? anchor_a : anchor_b));
        ++target;
      }
    }
  }
  return tr;
}

// ---------------------------------------------------------------- dataset

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
};

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  std::size_t n_ap = 8;
  std::size_t window = 19;
  std::size_t horizon = 1;
  std::vector<std::uint32_t> train_ids;
  std::vector<std::uint32_t> val_ids;
  std::optional<NormStats> norm;
  std::optional<GeneratorConfig> generator;
  std::uint64_t split_seed = 0;

  const Trajectory& by_id(std::uint32_t id) const {
    auto it = std::find_if(trajectories.begin(), trajectories.end(),
                           [id](const Trajectory& t) { return t.id == id; });
    if (it == trajectories.end()) throw std::out_of_range("no trajectory with id " + std::to_string(id));
    return *it;
  }
};

// Validation gets floor(N/10) trajectories, training the rest.
inline void split_dataset(TrajectoryDataset& ds, std::uint64_t seed) {
  std::vector<std::uint32_t> ids;
  for (const auto& t : ds.trajectories) ids.push_back(t.id);
  std::sort(ids.begin(), ids.end());
  Rng rng = make_rng(seed, 0x5917);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_val = ids.size() / 10;
  ds.val_ids.assign(ids.begin(), ids.begin() + static_cast<long>(n_val));
  ds.train_ids.assign(ids.begin() + static_cast<long>(n_val), ids.end());
  std::sort(ds.val_ids.begin(), ds.val_ids.end());
  std::sort(ds.train_ids.begin(), ds.train_ids.end());
  ds.split_seed = seed;
}

// Per-AP mean and population std over every time step of the training
// trajectories. A zero std is replaced by 1.
inline NormStats compute_normalization(const TrajectoryDataset& ds) {
  if (ds.train_ids.empty()) throw std::logic_error("normalization needs a training split");
  std::vector<double> sum(ds.n_ap, 0.0), sq(ds.n_ap, 0.0);
  std::size_t count = 0;
  for (auto id : ds.train_ids) {
    const auto& tr = ds.by_id(id);
    for (std::size_t t = 0; t < tr.steps(); ++t)
      for (std::size_t a = 0; a < ds.n_ap; ++a) sum[a] += tr.gain(t, a);
    count += tr.steps();
  }
  NormStats st{std::vector<double>(ds.n_ap), std::vector<double>(ds.n_ap)};
  for (std::size_t a = 0; a < ds.n_ap; ++a) st.mean[a] = sum[a] / static_cast<double>(count);
  for (auto id : ds.train_ids) {
    const auto& tr = ds.by_id(id);
    for (std::size_t t = 0; t < tr.steps(); ++t)
      for (std::size_t a = 0; a < ds.n_ap; ++a) {
        const double d = tr.gain(t, a) - st.mean[a];
        sq[a] += d * d;
      }
  }
  for (std::size_t a = 0; a < ds.n_ap; ++a) {
    const double sd = std::sqrt(sq[a] / static_cast<double>(count));
    st.std[a] = sd > 0 ? sd : 1.0;
  }
  return st;
}

inline double normalize(double v, const NormStats& s, std::size_t ap) {
  return (v - s.mean[ap]) / s.std[ap];
}
inline double denormalize(double v, const NormStats& s, std::size_t ap) {
  return v * s.std[ap] + s.mean[ap];
}

inline TrajectoryDataset generate_trajectories(const GeneratorConfig& c, std::size_t window = 19) {
  c.validate();
  TrajectoryDataset ds;
  ds.n_ap = c.n_ap;
  ds.window = window;
  ds.generator = c;
  ds.trajectories.reserve(c.n_trajectories);
  for (std::size_t i = 0; i < c.n_trajectories; ++i) {
    ds.trajectories.push_back(generate_trajectory(c, static_cast<std::uint32_t>(i)));
  }
  split_dataset(ds, c.seed);
  ds.norm = compute_normalization(ds);
  return ds;
}

// ---------------------------------------------------------------- windows

enum class Split { Train, Validation, All };

// inputs [N, W, n_ap] (time-major per window), targets [N, n_ap]; both in
// normalized units.
struct WindowSet {
  Tensor<float> inputs;
  Tensor<float> targets;
  std::size_t skipped_trajectories = 0;
  std::size_t count() const { return inputs.empty() ? 0 : inputs.dim(0); }
};

inline WindowSet window_dataset(const TrajectoryDataset& ds, Split which) {
  if (!ds.norm) throw std::logic_error("window_dataset: normalization stats missing");
  const auto& st = *ds.norm;
  std::vector<std::uint32_t> ids;
  if (which == Split::Train) ids = ds.train_ids;
  else if (which == Split::Validation) ids = ds.val_ids;
  else for (const auto& t : ds.trajectories) ids.push_back(t.id);

  const std::size_t W = ds.window, A = ds.n_ap, H = ds.horizon;
  std::vector<float> in, tg;
  WindowSet out;
  for (auto id : ids) {
    const auto& tr = ds.by_id(id);
    if (tr.steps() < W + H) {
      ++out.skipped_trajectories;
      continue;
    }
    for (std::size_t s = 0; s + W + H <= tr.steps(); ++s) {
      for (std::size_t t = 0; t < W; ++t)
        for (std::size_t a = 0; a < A; ++a)
          in.push_back(static_cast<float>(normalize(tr.gain(s + t, a), st, a)));
      for (std::size_t a = 0; a < A; ++a)
        tg.push_back(static_cast<float>(normalize(tr.gain(s + W + H - 1, a), st, a)));
    }
  }
  const std::size_t n = tg.size() / A;
  if (n == 0) return out;
  out.inputs = Tensor<float>({n, W, A}, std::move(in));
  out.targets = Tensor<float>({n, A}, std::move(tg));
  return out;
}

inline std::size_t windows_per_trajectory(std::size_t steps, std::size_t window,
                                          std::size_t horizon = 1) {
  return steps >= window + horizon ? steps - window - horizon + 1 : 0;
}

// Rows [first, first + n) of a [N, ...] tensor, or an arbitrary row list.
template <typename T>
Tensor<T> take_rows(const Tensor<T>& t, const std::vector<std::size_t>& rows) {
  Shape s = t.shape();
  const std::size_t stride = t.size() / s[0];
  s[0] = rows.size();
  Tensor<T> out(s);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(t.ptr() + rows[i] * stride, stride, out.ptr() + i * stride);
  return out;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& t, std::size_t first, std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), first);
  return take_rows(t, rows);
}

}  // namespace lite
