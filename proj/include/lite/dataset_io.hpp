#pragma once

// LDAT dataset files, their JSON manifest sidecar, and CSV trace import.
//
//   "LDAT" | version u8 | n_ap u16 | W u16 | N u32 | T u32
//   N x [T, n_ap] f32 little-endian gain matrices
//
// The manifest lives next to the data file as <path>.json.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lite/bytes.hpp"
#include "lite/channel.hpp"
#include "lite/json_util.hpp"

namespace lite {

inline constexpr char kLdatMagic[4] = {'L', 'D', 'A', 'T'};
inline constexpr std::uint8_t kLdatVersion = 1;

inline json to_json(const GeneratorConfig& c) {
  json aps = json::array();
  for (const auto& p : c.resolved_aps()) aps.push_back({p.x, p.y});
  return {{"room_x", c.room_x},
          {"room_y", c.room_y},
          {"n_ap", c.n_ap},
          {"ap_positions", aps},
          {"n_trajectories", c.n_trajectories},
          {"steps", c.steps},
          {"dt", c.dt},
          {"speed_min", c.speed_min},
          {"speed_max", c.speed_max},
          {"path_loss_exponent", c.path_loss_exponent},
          {"ref_gain_db", c.ref_gain_db},
          {"height_diff", c.height_diff},
          {"shadowing_sigma_db", c.shadowing_sigma_db},
          {"decorrelation_m", c.decorrelation_m},
          {"knot_spacing_m", c.knot_spacing_m},
          {"diversity", c.diversity},
          {"output_db", c.output_db},
          {"seed", c.seed}};
}

inline GeneratorConfig generator_from_json(const json& j, GeneratorConfig c = {}) {
  check_keys(j, "data",
             {"room_x", "room_y", "n_ap", "ap_positions", "n_trajectories", "steps", "dt",
              "speed_min", "speed_max", "path_loss_exponent", "ref_gain_db", "height_diff",
              "shadowing_sigma_db", "decorrelation_m", "knot_spacing_m", "diversity", "output_db",
              "seed", "window"});
  read_opt(j, "room_x", c.room_x);
  read_opt(j, "room_y", c.room_y);
  read_opt(j, "n_ap", c.n_ap);
  read_opt(j, "n_trajectories", c.n_trajectories);
  read_opt(j, "steps", c.steps);
  read_opt(j, "dt", c.dt);
  read_opt(j, "speed_min", c.speed_min);
  read_opt(j, "speed_max", c.speed_max);
  read_opt(j, "path_loss_exponent", c.path_loss_exponent);
  read_opt(j, "ref_gain_db", c.ref_gain_db);
  read_opt(j, "height_diff", c.height_diff);
  read_opt(j, "shadowing_sigma_db", c.shadowing_sigma_db);
  read_opt(j, "decorrelation_m", c.decorrelation_m);
  read_opt(j, "knot_spacing_m", c.knot_spacing_m);
  read_opt(j, "diversity", c.diversity);
  read_opt(j, "output_db", c.output_db);
  read_opt(j, "seed", c.seed);
  if (j.contains("ap_positions")) {
    c.ap_positions.clear();
    for (const auto& p : j.at("ap_positions")) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("ap_positions: expected [x, y] pairs");
      c.ap_positions.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  }
  return c;
}

inline json manifest_json(const TrajectoryDataset& ds) {
  json m = {{"format", "LDAT"},
            {"version", kLdatVersion},
            {"n_ap", ds.n_ap},
            {"window", ds.window},
            {"horizon", ds.horizon},
            {"n_trajectories", ds.trajectories.size()},
            {"split_seed", ds.split_seed},
            {"train_ids", ds.train_ids},
            {"val_ids", ds.val_ids}};
  if (ds.generator) {
    m["seed"] = ds.generator->seed;
    m["generator"] = to_json(*ds.generator);
  }
  if (ds.norm) m["normalization"] = {{"mean", ds.norm->mean}, {"std", ds.norm->std}};
  json trs = json::array();
  for (const auto& t : ds.trajectories) {
    json wp = json::array();
    for (const auto& p : t.waypoints) wp.push_back({p.x, p.y});
    trs.push_back({{"id", t.id}, {"speed", t.speed}, {"rng_seed", t.rng_seed}, {"waypoints", wp}});
  }
  m["trajectories"] = trs;
  return m;
}

inline std::vector<std::uint8_t> encode_ldat(const TrajectoryDataset& ds) {
  if (ds.trajectories.empty()) throw std::invalid_argument("LDAT: dataset is empty");
  const std::size_t T = ds.trajectories.front().steps();
  for (const auto& t : ds.trajectories) {
    if (t.steps() != T || t.n_ap != ds.n_ap) {
      throw std::invalid_argument("LDAT: all trajectories must share T and n_ap");
    }
  }
  ByteWriter w;
  w.raw({kLdatMagic, 4});
  w.u8(kLdatVersion);
  w.u16(static_cast<std::uint16_t>(ds.n_ap));
  w.u16(static_cast<std::uint16_t>(ds.window));
  w.u32(static_cast<std::uint32_t>(ds.trajectories.size()));
  w.u32(static_cast<std::uint32_t>(T));
  for (const auto& t : ds.trajectories)
    for (float g : t.gains) w.f32(g);
  return w.take();
}

inline TrajectoryDataset decode_ldat(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != std::string(kLdatMagic, 4)) throw FormatError("LDAT: bad magic");
  if (const auto v = r.u8(); v != kLdatVersion) {
    throw FormatError("LDAT: unsupported version " + std::to_string(v));
  }
  TrajectoryDataset ds;
  ds.n_ap = r.u16();
  ds.window = r.u16();
  const std::uint32_t n = r.u32(), steps = r.u32();
  if (ds.n_ap == 0) throw FormatError("LDAT: n_ap is zero");
  if (r.remaining() != std::size_t(n) * steps * ds.n_ap * 4) {
    throw FormatError("LDAT: payload size does not match header");
  }
  ds.trajectories.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& t = ds.trajectories[i];
    t.id = i;
    t.n_ap = ds.n_ap;
    t.gains.resize(std::size_t(steps) * ds.n_ap);
    for (auto& g : t.gains) {
      g = r.f32();
      if (!std::isfinite(g)) throw FormatError("LDAT: non-finite gain in trajectory " + std::to_string(i));
    }
  }
  return ds;
}

inline void apply_manifest(TrajectoryDataset& ds, const json& m) {
  if (m.value("n_ap", ds.n_ap) != ds.n_ap) throw FormatError("manifest: n_ap disagrees with data file");
  ds.horizon = m.value("horizon", std::size_t{1});
  ds.split_seed = m.value("split_seed", std::uint64_t{0});
  if (m.contains("train_ids")) ds.train_ids = m["train_ids"].get<std::vector<std::uint32_t>>();
  if (m.contains("val_ids")) ds.val_ids = m["val_ids"].get<std::vector<std::uint32_t>>();
  if (m.contains("normalization")) {
    ds.norm = NormStats{m["normalization"]["mean"].get<std::vector<double>>(),
                        m["normalization"]["std"].get<std::vector<double>>()};
  }
  if (m.contains("generator")) ds.generator = generator_from_json(m["generator"]);
  if (m.contains("trajectories")) {
    const auto& trs = m["trajectories"];
    if (trs.size() != ds.trajectories.size()) throw FormatError("manifest: trajectory count mismatch");
    for (std::size_t i = 0; i < trs.size(); ++i) {
      auto& t = ds.trajectories[i];
      t.id = trs[i].at("id").get<std::uint32_t>();
      t.speed = trs[i].value("speed", 0.0);
      t.rng_seed = trs[i].value("rng_seed", std::uint64_t{0});
      for (const auto& p : trs[i].value("waypoints", json::array()))
        t.waypoints.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  }
}

inline std::string manifest_path(const std::string& path) { return path + ".json"; }

inline void save_dataset(const std::string& path, const TrajectoryDataset& ds) {
  write_file_bytes(path, encode_ldat(ds));
  std::ofstream out(manifest_path(path));
  if (!out) throw std::runtime_error("cannot write " + manifest_path(path));
  out << manifest_json(ds).dump(2) << "\n";
}

// Without a manifest the dataset is split with `split_seed` and normalized
// from its own training portion.
inline TrajectoryDataset load_dataset(const std::string& path, std::uint64_t split_seed = 0) {
  auto ds = decode_ldat(read_file_bytes(path));
  std::ifstream in(manifest_path(path));
  if (in) {
    json m;
    try {
      in >> m;
    } catch (const json::exception& e) {
      throw FormatError("manifest: " + std::string(e.what()));
    }
    apply_manifest(ds, m);
  }
  if (ds.train_ids.empty() && ds.val_ids.empty()) split_dataset(ds, split_seed);
  if (!ds.norm) ds.norm = compute_normalization(ds);
  return ds;
}

// One row per timestep, one column per AP; a non-numeric first row is
// treated as a header.
inline Trajectory import_csv_trajectory(std::istream& in, std::uint32_t id = 0) {
  Trajectory t;
  t.id = id;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<float> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
        vals.push_back(static_cast<float>(v));
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (row == 1) continue;
      throw FormatError("CSV: non-numeric value on line " + std::to_string(row));
    }
    if (t.n_ap == 0) t.n_ap = vals.size();
    if (vals.size() != t.n_ap) {
      throw FormatError("CSV: line " + std::to_string(row) + " has " + std::to_string(vals.size()) +
                        " columns, expected " + std::to_string(t.n_ap));
    }
    for (float v : vals)
      if (!std::isfinite(v)) throw FormatError("CSV: non-finite gain on line " + std::to_string(row));
    t.gains.insert(t.gains.end(), vals.begin(), vals.end());
  }
  if (t.gains.empty()) throw FormatError("CSV: no data rows");
  return t;
}

inline Trajectory import_csv_trajectory(const std::string& path, std::uint32_t id = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return import_csv_trajectory(in, id);
}

inline TrajectoryDataset dataset_from_csv(const std::vector<std::string>& paths,
                                          std::size_t window = 19, std::uint64_t split_seed = 0) {
  if (paths.empty()) throw std::invalid_argument("CSV import: no files given");
  TrajectoryDataset ds;
  ds.window = window;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    ds.trajectories.push_back(import_csv_trajectory(paths[i], static_cast<std::uint32_t>(i)));
    if (ds.trajectories.back().n_ap != ds.trajectories.front().n_ap) {
      throw FormatError("CSV import: " + paths[i] + " has a different AP count");
    }
  }
  ds.n_ap = ds.trajectories.front().n_ap;
  split_dataset(ds, split_seed);
  if (ds.train_ids.empty()) throw std::invalid_argument("CSV import: no training trajectories");
  ds.norm = compute_normalization(ds);
  return ds;
}

}  // namespace lite
