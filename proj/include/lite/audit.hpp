#pragma once

// Published parameter-count table for the SE-BiLSTM family, and an audit
// that recomputes every cell from the closed form.

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lite/predictor.hpp"

namespace lite {

struct PublishedRow {
  std::size_t f;
  std::size_t b;
  // columns: SE before BiLSTM, SE pre-FC, SE after FC
  std::array<std::size_t, 3> params;
  std::array<double, 3> reduction_pct;
};

inline constexpr std::array<SePlacement, 3> kAuditPlacements = {
    SePlacement::BeforeBiLSTM, SePlacement::PreFC, SePlacement::AfterFC};

inline constexpr std::size_t kPublishedBaselineParams = 548872;

inline constexpr std::array<PublishedRow, 19> kPublishedTable = {{
    {32, 32, {11297, 12368, 11297}, {97.94, 97.75, 97.94}},
    {32, 64, {25121, 27508, 25121}, {95.42, 94.99, 95.42}},
    {64, 32, {25121, 27508, 25121}, {95.42, 94.99, 95.42}},
    {64, 64, {38945, 43160, 38945}, {92.90, 92.14, 92.90}},
    {64, 96, {60961, 67516, 60961}, {88.89, 87.70, 88.89}},
    {96, 64, {60961, 67516, 60961}, {88.89, 87.70, 88.89}},
    {64, 128, {91169, 100576, 91169}, {83.39, 81.68, 83.39}},
    {128, 64, {91169, 100576, 91169}, {83.39, 81.68, 83.39}},
    {96, 128, {113185, 125956, 113185}, {79.38, 77.05, 79.38}},
    {128, 96, {113185, 125956, 113185}, {79.38, 77.05, 79.38}},
    {128, 128, {143393, 160040, 143393}, {73.87, 70.84, 73.87}},
    {128, 160, {181793, 202828, 181793}, {66.88, 63.05, 66.88}},
    {160, 128, {181793, 202828, 181793}, {66.88, 63.05, 66.88}},
    {160, 160, {220193, 246128, 220193}, {59.88, 55.16, 59.88}},
    {128, 192, {228385, 254320, 228385}, {58.39, 53.66, 58.39}},
    {192, 128, {228385, 254320, 228385}, {58.39, 53.66, 58.39}},
    {192, 192, {313377, 350648, 313377}, {42.91, 36.11, 42.91}},
    {128, 256, {346145, 383416, 346145}, {36.94, 30.14, 36.94}},
    {256, 128, {346145, 383416, 346145}, {36.94, 30.14, 36.94}},
}};

struct AuditCell {
  std::size_t f = 0;
  std::size_t b = 0;
  SePlacement placement = SePlacement::None;
  std::size_t expected_params = 0;
  std::size_t computed_params = 0;
  double expected_reduction = 0;
  double computed_reduction = 0;

  bool params_ok() const { return expected_params == computed_params; }
  bool reduction_ok(double tol_pp = 0.01) const {
    return std::abs(expected_reduction - computed_reduction) <= tol_pp + 1e-9;
  }
  bool ok() const { return params_ok() && reduction_ok(); }
};

struct AuditReport {
  std::size_t baseline_params = 0;
  std::vector<AuditCell> cells;

  bool passed() const {
    if (baseline_params != kPublishedBaselineParams) return false;
    for (const auto& c : cells)
      if (!c.ok()) return false;
    return true;
  }

  std::vector<AuditCell> failures() const {
    std::vector<AuditCell> out;
    for (const auto& c : cells)
      if (!c.ok()) out.push_back(c);
    return out;
  }
};

inline AuditReport audit_parameter_table() {
  AuditReport rep;
  rep.baseline_params = param_count(baseline_config());
  for (const auto& row : kPublishedTable) {
    for (std::size_t k = 0; k < kAuditPlacements.size(); ++k) {
      PredictorConfig cfg{row.f, row.b, kAuditPlacements[k]};
      rep.cells.push_back({row.f, row.b, cfg.placement, row.params[k], param_count(cfg),
                           row.reduction_pct[k], param_reduction(cfg)});
    }
  }
  return rep;
}

inline std::string render_audit(const AuditReport& rep) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "baseline (256,256) no SE: %zu params (expected %zu)\n",
                rep.baseline_params, kPublishedBaselineParams);
  out += line;
  std::snprintf(line, sizeof line, "%-10s | %-28s | %-28s | %-28s\n", "(f,b)",
                "SE before BiLSTM", "SE pre-FC", "SE after FC");
  out += line;
  for (std::size_t r = 0; r < rep.cells.size(); r += 3) {
    char fb[32];
    std::snprintf(fb, sizeof fb, "(%zu,%zu)", rep.cells[r].f, rep.cells[r].b);
    std::string row = std::string(fb);
    row.resize(10, ' ');
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& c = rep.cells[r + k];
      std::snprintf(line, sizeof line, " | %7zu %6.2f%% %-4s        ", c.computed_params,
                    c.computed_reduction, c.ok() ? "PASS" : "FAIL");
      row += line;
    }
    out += row + "\n";
  }
  return out;
}

}  // namespace lite
