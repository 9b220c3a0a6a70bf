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

#include "equilens/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace equilens {
namespace {

using nlohmann::ordered_json;

template <typename T>
void add_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

std::vector<std::string> ordered_modes(const std::vector<SummaryRow>& rows) {
  std::vector<std::string> out;
  for (Mode m : all_modes()) {
    for (const auto& r : rows) {
      if (r.mode == to_string(m)) {
        out.push_back(r.mode);
        break;
      }
    }
  }
  return out;
}

std::string cell(const SummaryRow* r, int decimals, bool mark) {
  if (!r) return "";
  if (!r->valid()) return "invalid";
  std::string s = format_fixed(r->final_distance, decimals);
  if (mark && r->exact_nash()) s += '*';
  return s;
}

std::string align(const std::vector<std::vector<std::string>>& table) {
  std::vector<std::size_t> width;
  for (const auto& row : table) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : table) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      const std::string& c = row[i];
      const std::string pad(width[i] - c.size(), ' ');
      line += i == 0 ? c + pad : pad + c;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string join_csv(const std::vector<std::vector<std::string>>& table) {
  std::string out;
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

struct SelfPlayLayout {
  std::vector<std::string> games;
  std::vector<std::string> modes;
  std::vector<std::string> agents;
  std::map<std::tuple<std::string, std::string, std::string>, const SummaryRow*> cells;
};

SelfPlayLayout self_play_layout(const std::vector<SummaryRow>& rows) {
  SelfPlayLayout lay;
  std::vector<SummaryRow> self;
  for (const auto& r : rows) {
    if (!r.self_play()) continue;
    add_unique(lay.games, r.game);
    add_unique(lay.agents, r.agent_a);
    lay.cells[{r.game, r.mode, r.agent_a}] = &r;
    self.push_back(r);
  }
  lay.modes = ordered_modes(self);
  return lay;
}

std::vector<std::vector<std::string>> self_play_table(const SelfPlayLayout& lay, int decimals,
                                                      bool mark) {
  std::vector<std::vector<std::string>> t;
  std::vector<std::string> header{"game"};
  for (const auto& m : lay.modes) {
    for (const auto& a : lay.agents) header.push_back(m + ":" + a);
  }
  t.push_back(header);
  for (const auto& g : lay.games) {
    std::vector<std::string> row{g};
    for (const auto& m : lay.modes) {
      for (const auto& a : lay.agents) {
        const auto it = lay.cells.find({g, m, a});
        row.push_back(cell(it == lay.cells.end() ? nullptr : it->second, decimals, mark));
      }
    }
    t.push_back(row);
  }
  return t;
}

std::vector<std::vector<std::string>> cross_play_table(const std::vector<SummaryRow>& rows,
                                                       int decimals, bool mark) {
  std::vector<SummaryRow> cross;
  for (const auto& r : rows) {
    if (!r.self_play()) cross.push_back(r);
  }
  const auto modes = ordered_modes(cross);
  std::vector<std::tuple<std::string, std::string, std::string>> keys;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, const SummaryRow*> cells;
  for (const auto& r : rows) {
    if (r.self_play()) continue;
    add_unique(keys, {r.game, r.agent_a, r.agent_b});
    cells[{r.game, r.agent_a, r.agent_b, r.mode}] = &r;
  }
  std::vector<std::vector<std::string>> t;
  std::vector<std::string> header{"game", "agent_a", "agent_b"};
  header.insert(header.end(), modes.begin(), modes.end());
  t.push_back(header);
  for (const auto& [g, a, b] : keys) {
    std::vector<std::string> row{g, a, b};
    for (const auto& m : modes) {
      const auto it = cells.find({g, a, b, m});
      row.push_back(cell(it == cells.end() ? nullptr : it->second, decimals, mark));
    }
    t.push_back(row);
  }
  return t;
}

}  // namespace

std::string format_fixed(double x, int decimals) {
  if (!std::isfinite(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  std::string s = buf;
  // Avoid "-0.00".
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

bool SummaryRow::exact_nash() const {
  return valid() && std::isfinite(final_distance) && final_distance < kExactNashThreshold;
}

Summary summarize(const std::vector<MatchRecord>& records) {
  Summary s;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::size_t> index;
  std::vector<double> sums;
  for (const auto& rec : records) {
    const auto key = std::make_tuple(rec.config.game.name, std::string(to_string(rec.config.mode)),
                                     rec.config.agent_a, rec.config.agent_b);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, s.rows.size()).first;
      SummaryRow r;
      std::tie(r.game, r.mode, r.agent_a, r.agent_b) = key;
      s.rows.push_back(r);
      sums.push_back(0.0);
    }
    SummaryRow& r = s.rows[it->second];
    ++r.n_records;
    if (rec.valid && std::isfinite(rec.final_distance)) {
      ++r.n_valid;
      sums[it->second] += rec.final_distance;
    }
  }
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    auto& r = s.rows[i];
    r.final_distance = r.n_valid ? sums[i] / static_cast<double>(r.n_valid)
                                 : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

std::string Summary::long_csv() const {
  std::vector<std::vector<std::string>> t{
      {"game", "mode", "agent_a", "agent_b", "final_distance", "exact_nash", "valid", "n"}};
  for (const auto& r : rows) {
    t.push_back({r.game, r.mode, r.agent_a, r.agent_b, format_fixed(r.final_distance, 6),
                 r.exact_nash() ? "1" : "0", r.valid() ? "1" : "0", std::to_string(r.n_records)});
  }
  return join_csv(t);
}

std::string Summary::self_play_csv() const {
  return join_csv(self_play_table(self_play_layout(rows), 2, false));
}

std::string Summary::cross_play_csv() const { return join_csv(cross_play_table(rows, 3, false)); }

std::string Summary::text() const {
  const auto self = self_play_table(self_play_layout(rows), 2, true);
  const auto cross = cross_play_table(rows, 3, true);
  std::string out;
  if (self.size() > 1) out += "Self-play final Nash distance\n" + align(self);
  if (cross.size() > 1) {
    if (!out.empty()) out += "\n";
    out += "Cross-play final Nash distance\n" + align(cross);
  }
  if (!out.empty()) out += "\n* exact Nash (d < 0.005)\n";
  return out;
}

const char* to_string(PlotKind k) {
  switch (k) {
    case PlotKind::kDistanceVsRound:
      return "distance-vs-round";
    case PlotKind::kProbeAccuracyVsLayer:
      return "probe-accuracy-vs-layer";
    case PlotKind::kLensProbabilityVsLayer:
      return "lens-probability-vs-layer";
    case PlotKind::kPVsAlpha:
      return "p-vs-alpha";
    case PlotKind::kPVsC:
      return "p-vs-c";
  }
  return "distance-vs-round";
}

PlotKind plot_kind_from_string(std::string_view s) {
  for (PlotKind k : {PlotKind::kDistanceVsRound, PlotKind::kProbeAccuracyVsLayer,
                     PlotKind::kLensProbabilityVsLayer, PlotKind::kPVsAlpha, PlotKind::kPVsC}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown plot kind '" + std::string(s) + "'");
}

PlotData distance_plot(const MatchRecord& record) {
  PlotData p;
  p.kind = PlotKind::kDistanceVsRound;
  p.x_label = "round";
  p.y_label = "nash_distance";
  for (std::size_t i = 0; i < record.distance_series.size(); ++i) p.x.push_back(static_cast<double>(i + 1));
  p.series.push_back({record.cell_id, record.distance_series});
  p.meta["cell_id"] = record.cell_id;
  p.meta["game"] = record.config.game.name;
  p.meta["mode"] = to_string(record.config.mode);
  return p;
}

PlotData probe_plot(const std::vector<ProbeReport>& reports) {
  PlotData p;
  p.kind = PlotKind::kProbeAccuracyVsLayer;
  p.x_label = "layer";
  p.y_label = "cv_accuracy";
  PlotSeries s{reports.empty() ? "probe" : reports.front().label, {}};
  for (const auto& r : reports) {
    p.x.push_back(r.layer);
    s.y.push_back(r.mean_accuracy);
  }
  p.series.push_back(std::move(s));
  return p;
}

PlotData lens_plot(const LensSeries& series, const ActionLabels& labels) {
  PlotData p;
  p.kind = PlotKind::kLensProbabilityVsLayer;
  p.x_label = "layer";
  p.y_label = "probability";
  PlotSeries s0{"P(" + labels[0] + ")", {}};
  PlotSeries s1{"P(" + labels[1] + ")", {}};
  for (std::size_t l = 0; l < series.size(); ++l) {
    p.x.push_back(static_cast<double>(l));
    s0.y.push_back(series[l](0));
    s1.y.push_back(series[l](1));
  }
  p.series = {s0, s1};
  return p;
}

PlotData sweep_plot(const SweepResult& sweep) {
  PlotData p;
  p.kind = sweep.knob == "c" ? PlotKind::kPVsC : PlotKind::kPVsAlpha;
  p.x_label = sweep.knob;
  p.y_label = "probability";
  PlotSeries coop{"p_coop", {}};
  PlotSeries nash{"p_nash", {}};
  for (const auto& pt : sweep.points) {
    p.x.push_back(pt.knob);
    coop.y.push_back(pt.p_coop);
    nash.y.push_back(pt.p_nash);
  }
  p.series = {coop, nash};
  p.meta["statistic"] = sweep.statistic;
  p.meta["correlation"] = std::isfinite(sweep.correlation) ? ordered_json(sweep.correlation) : ordered_json(nullptr);
  return p;
}

void emit_plot_data(const PlotData& data, const std::filesystem::path& dir) {
  for (const auto& s : data.series) {
    if (s.y.size() != data.x.size()) throw std::invalid_argument("plot: series length differs from x");
  }
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "series.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "series.csv").string());
  csv << data.x_label;
  for (const auto& s : data.series) csv << ',' << s.name;
  csv << '\n';
  char buf[64];
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", data.x[i]);
    csv << buf;
    for (const auto& s : data.series) {
      std::snprintf(buf, sizeof buf, "%.17g", s.y[i]);
      csv << ',' << buf;
    }
    csv << '\n';
  }
  ordered_json meta;
  meta["kind"] = to_string(data.kind);
  meta["x"] = data.x_label;
  meta["y"] = data.y_label;
  meta["rows"] = data.x.size();
  meta["series"] = ordered_json::array();
  for (const auto& s : data.series) meta["series"].push_back(s.name);
  for (const auto& [k, v] : data.meta.items()) meta[k] = v;
  std::ofstream mj(dir / "meta.json");
  if (!mj) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
  mj << meta.dump(2) << '\n';
}

}  // namespace equilens
