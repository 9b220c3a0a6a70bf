// Copyright 2026 The Equilens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EQUILENS_REPORT_HPP_
#define EQUILENS_REPORT_HPP_

// Summary tables over match records and plot-data export.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "equilens/interp.hpp"
#include "equilens/match.hpp"
#include "json.hpp"

namespace equilens {

inline constexpr double kExactNashThreshold = 0.005;

struct SummaryRow {
  std::string game;
  std::string mode;
  std::string agent_a;
  std::string agent_b;
  // Mean over the valid records of the group; NaN when none is valid.
  double final_distance = 0.0;
  std::size_t n_records = 0;
  std::size_t n_valid = 0;

  bool valid() const { return n_valid == n_records && n_records > 0; }
  bool exact_nash() const;
  bool self_play() const { return agent_a == agent_b; }
};

struct Summary {
  // Grouped by (game, mode, agent_a, agent_b) in first-seen order.
  std::vector<SummaryRow> rows;

  // game,mode,agent_a,agent_b,final_distance,exact_nash,valid,n
  std::string long_csv() const;
  // Self-play rows: one line per game, one column per (mode, agent).
  std::string self_play_csv() const;
  // Cross-play rows: one line per (game, agent_a, agent_b), one column per mode.
  std::string cross_play_csv() const;
  // Both layouts as aligned text; exact-Nash cells carry a trailing '*'.
  std::string text() const;
};

Summary summarize(const std::vector<MatchRecord>& records);

enum class PlotKind {
  kDistanceVsRound,
  kProbeAccuracyVsLayer,
  kLensProbabilityVsLayer,
  kPVsAlpha,
  kPVsC,
};

const char* to_string(PlotKind k);
PlotKind plot_kind_from_string(std::string_view s);

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};

struct PlotData {
  PlotKind kind = PlotKind::kDistanceVsRound;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<PlotSeries> series;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

PlotData distance_plot(const MatchRecord& record);
PlotData probe_plot(const std::vector<ProbeReport>& reports);
PlotData lens_plot(const LensSeries& series, const ActionLabels& labels);
PlotData sweep_plot(const SweepResult& sweep);

// Writes dir/series.csv and dir/meta.json.
void emit_plot_data(const PlotData& data, const std::filesystem::path& dir);

// Fixed-precision decimal; "nan" for non-finite values.
std::string format_fixed(double x, int decimals);

}  // namespace equilens

#endif  // EQUILENS_REPORT_HPP_
