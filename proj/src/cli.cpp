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

#include "equilens/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "equilens/config.hpp"
#include "equilens/interp.hpp"
#include "equilens/report.hpp"
#include "equilens/rng.hpp"
#include "equilens/tokenizer.hpp"

namespace equilens {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned jobs = 1;
  bool include_mixed = true;
  bool include_mixed_set = false;
  std::optional<std::string> template_version;
  std::string runs;
};

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path output_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  const char* env = std::getenv("EQUILENS_OUT");
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  return root / timestamp();
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string fixed(double x) { return format_fixed(x, 6); }

template <typename Fn>
auto config_guard(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Effective configuration of one run, with command-line overrides applied.
struct Run {
  std::string command;
  json config;
  fs::path base_dir;
  fs::path out;
  std::uint64_t seed = 0;
  PromptTemplate tpl = PromptTemplate::builtin();
};

PromptTemplate resolve_template(const std::string& v, const fs::path& base_dir) {
  for (const auto& b : PromptTemplate::builtin_versions()) {
    if (b == v) return PromptTemplate::builtin(v);
  }
  const fs::path p = fs::path(v).is_absolute() ? fs::path(v) : base_dir / v;
  if (!fs::exists(p)) throw ConfigError("template_version: unknown template '" + v + "'");
  return config_guard("template_version", [&] { return PromptTemplate::load(p); });
}

Run start_run(const std::string& command, const Options& o, bool match_command) {
  Run run;
  run.command = command;
  if (o.config.empty()) throw ConfigError("--config is required");
  run.config = load_config_file(o.config);
  if (!run.config.is_object()) throw ConfigError(o.config + ": expected a table at top level");
  run.base_dir = fs::absolute(o.config).parent_path();
  if (o.seed) run.config["seed"] = *o.seed;
  if (o.template_version) run.config["template_version"] = *o.template_version;
  if (match_command && o.include_mixed_set) run.config["include_mixed_eq"] = o.include_mixed;
  if (!run.config.contains("seed")) run.config["seed"] = 0;
  if (!run.config.contains("template_version")) run.config["template_version"] = "v1";
  run.seed = ConfigReader::convert<std::uint64_t>(run.config["seed"], "seed");
  run.tpl = resolve_template(ConfigReader::convert<std::string>(run.config["template_version"],
                                                                "template_version"),
                             run.base_dir);
  run.out = output_dir(o);
  return run;
}

void write_manifest(const Run& run) {
  const std::string canonical = run.config.dump();
  ordered_json m;
  m["format"] = "equilens-run/1";
  m["command"] = run.command;
  m["code_version"] = EQUILENS_VERSION;
  m["seed"] = run.seed;
  m["template_version"] = run.tpl.version();
  m["config_hash"] = "fnv1a64:" + hex64(fnv1a64(canonical));
  m["config"] = run.config;
  fs::create_directories(run.out);
  write_file(run.out / "manifest.json", m.dump(2) + "\n");
  write_file(run.out / "config.json", run.config.dump(2) + "\n");
}

template <typename T>
std::vector<T> read_list(ConfigReader& r, std::string_view key, const std::vector<T>& fallback) {
  if (!r.has(key)) return fallback;
  const json& arr = r.raw(key);
  if (!arr.is_array()) throw ConfigError(r.path_of(key) + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(ConfigReader::convert<T>(arr[i], r.path_of(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<Mode> read_modes(ConfigReader& r, const std::vector<Mode>& fallback) {
  std::vector<std::string> names;
  for (Mode m : fallback) names.emplace_back(to_string(m));
  std::vector<Mode> modes;
  for (const auto& n : read_list<std::string>(r, "modes", names)) {
    modes.push_back(config_guard(r.path_of("modes"), [&] { return mode_from_string(n); }));
  }
  return modes;
}

void report_invalid(const MatchRecord& rec, std::ostream& err) {
  for (const auto& d : rec.diagnostics) {
    if (d.code == "retry") continue;
    err << rec.cell_id << ": " << d.code << " (round " << d.round << ", " << d.role
        << "): " << d.message << "\n";
  }
}

void write_summary(const Summary& s, const fs::path& dir) {
  write_file(dir / "summary.csv", s.long_csv());
  write_file(dir / "table_selfplay.csv", s.self_play_csv());
  write_file(dir / "table_crossplay.csv", s.cross_play_csv());
  write_file(dir / "summary.txt", s.text());
}

// ---- play / tournament ----

int cmd_play(const Options& o, std::ostream& out, std::ostream& err) {
  Run run = start_run("play", o, true);
  ConfigReader r(run.config, "");
  r.raw("seed");
  r.raw("template_version");
  const Game game = read_game(r.has("game") ? r.raw("game") : json("pd"), "game");
  const Mode mode = config_guard("mode", [&] { return mode_from_string(r.get_or<std::string>("mode", "direct")); });
  MatchConfig cfg;
  cfg.game = game;
  cfg.mode = mode;
  cfg.rounds = r.get_or<std::size_t>("rounds", 50);
  cfg.temperature = r.get_or("temperature", 0.7);
  cfg.include_mixed = r.get_or("include_mixed_eq", true);
  const AgentSpec spec_a = read_agent_spec(r.child("agent_a"));
  const AgentSpec spec_b = read_agent_spec(r.child("agent_b"));
  r.finish();
  validate_agent_spec(spec_a, run.base_dir);
  validate_agent_spec(spec_b, run.base_dir);
  cfg.agent_a = spec_a.id;
  cfg.agent_b = spec_b.id;
  const std::string id = cell_id(game, mode, spec_a.id, spec_b.id);
  cfg.seed = cell_seed(run.seed, id);
  config_guard("play", [&] { cfg.validate(); return 0; });

  write_manifest(run);
  const AgentFactory factory = make_agent_factory(run.base_dir);
  auto a = factory(spec_a);
  auto b = factory(spec_b);
  const MatchRecord rec = run_match(*a, *b, cfg, run.tpl, id);
  write_match_record(rec, run.out / "record.jsonl");
  emit_plot_data(distance_plot(rec), run.out / "plots" / "distance-vs-round");
  const Summary s = summarize({rec});
  write_file(run.out / "summary.csv", s.long_csv());
  out << id << " rounds=" << rec.history.size() << " final_distance="
      << (std::isfinite(rec.final_distance) ? fixed(rec.final_distance) : std::string("nan"))
      << "\n";
  out << "output: " << run.out.string() << "\n";
  if (!rec.valid) {
    report_invalid(rec, err);
    return kExitRuntime;
  }
  return kExitOk;
}

TournamentPlan read_plan(ConfigReader& r, const Run& run) {
  TournamentPlan plan;
  plan.base_seed = run.seed;
  r.raw("seed");
  r.raw("template_version");
  plan.rounds = r.get_or<std::size_t>("rounds", 50);
  plan.temperature = r.get_or("temperature", 0.7);
  plan.include_mixed = r.get_or("include_mixed_eq", true);
  plan.pairing = config_guard("pairing", [&] {
    try {
      return pairing_from_string(r.get_or<std::string>("pairing", "all_ordered_pairs"));
    } catch (const MatchError& e) {
      throw ConfigError(std::string("pairing: ") + e.what());
    }
  });
  const json games = r.has("games") ? r.raw("games") : json::array({"pd", "bos", "sh", "mp"});
  if (!games.is_array()) throw ConfigError("games: expected an array");
  for (std::size_t i = 0; i < games.size(); ++i) {
    plan.games.push_back(read_game(games[i], "games[" + std::to_string(i) + "]"));
  }
  plan.modes = read_modes(r, all_modes());
  const json& agents = r.raw("agents");
  if (!agents.is_array()) throw ConfigError("agents: expected an array of tables");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    plan.agents.push_back(read_agent_spec(ConfigReader(agents[i], "agents[" + std::to_string(i) + "]")));
  }
  r.finish();
  for (const auto& a : plan.agents) validate_agent_spec(a, run.base_dir);
  try {
    plan.validate();
  } catch (const MatchError& e) {
    throw ConfigError(e.what());
  }
  return plan;
}

int cmd_tournament(const Options& o, std::ostream& out, std::ostream& err) {
  Run run = start_run("tournament", o, true);
  ConfigReader r(run.config, "");
  const TournamentPlan plan = read_plan(r, run);
  write_manifest(run);
  const unsigned jobs = o.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : o.jobs;
  std::size_t invalid = 0;
  const auto records = run_tournament(
      plan, make_agent_factory(run.base_dir), run.tpl, jobs, [&](const MatchRecord& rec) {
        const fs::path dir = run.out / rec.cell_id;
        write_match_record(rec, dir / "record.jsonl");
        emit_plot_data(distance_plot(rec), dir / "distance-vs-round");
        if (!rec.valid) {
          ++invalid;
          report_invalid(rec, err);
        }
      });
  const Summary s = summarize(records);
  write_summary(s, run.out);
  out << s.text();
  out << records.size() << " cells, " << invalid << " invalid\n";
  out << "output: " << run.out.string() << "\n";
  return kExitOk;
}

// ---- report ----

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  if (o.runs.empty()) throw ConfigError("--runs is required");
  const fs::path runs(o.runs);
  if (!fs::is_directory(runs)) throw ConfigError("runs directory not found: " + runs.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(runs)) {
    if (e.is_regular_file() && e.path().filename() == "record.jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(runs.string() + ": no record.jsonl files");
  std::vector<MatchRecord> records;
  for (const auto& f : files) records.push_back(read_match_record(f));
  const Summary s = summarize(records);
  const fs::path dest = o.out.empty() ? runs : fs::path(o.out);
  write_summary(s, dest);
  out << s.text();
  return kExitOk;
}

// ---- interp commands ----

struct Analysis {
  std::shared_ptr<const Model> model;
  Tokenizer tok = Tokenizer::standard();
  Game game = make_game("pd");
  Player role = Player::A;
  std::array<int, 2> action_ids{};
  int nash_index = 0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

Analysis read_analysis(ConfigReader& r, const Run& run) {
  Analysis a;
  a.seed = run.seed;
  r.raw("seed");
  r.raw("template_version");
  a.game = read_game(r.has("game") ? r.raw("game") : json("pd"), "game");
  const auto role = r.get_or<std::string>("role", "A");
  if (role != "A" && role != "B") throw ConfigError("role: expected \"A\" or \"B\"");
  a.role = role == "A" ? Player::A : Player::B;
  a.temperature = r.get_or("temperature", 1.0);
  if (!(a.temperature > 0.0)) throw ConfigError("temperature: must be positive");
  json model = r.has("model") ? r.raw("model") : json::object();
  if (!model.is_object()) throw ConfigError("model: expected a table");
  if (!model.contains("weights") && !model.contains("seed")) model["seed"] = run.seed;
  const ModelSource src = read_model_source(ConfigReader(model, "model"), run.base_dir);
  a.model = build_model(src);
  a.action_ids = config_guard("game", [&] { return a.tok.action_token_ids(a.game, a.role); });
  const auto nash = nash_action_index(a.game, a.role);
  if (!nash) throw ConfigError("game: '" + a.game.name + "' has no unique pure Nash action");
  a.nash_index = *nash;
  return a;
}

std::vector<LabeledPrompt> read_prompts(ConfigReader& r, const Analysis& a, std::size_t count) {
  PromptSetOptions opts;
  opts.count = count;
  opts.role = a.role;
  if (r.has("prompts")) {
    ConfigReader p = r.child("prompts");
    opts.count = p.get_or("count", opts.count);
    opts.min_rounds = p.get_or("min_rounds", opts.min_rounds);
    opts.max_rounds = p.get_or("max_rounds", opts.max_rounds);
    opts.p_own_action0 = p.get_or("p_own_action0", opts.p_own_action0);
    opts.p_opp_action0 = p.get_or("p_opp_action0", opts.p_opp_action0);
    p.finish();
  }
  return config_guard("prompts", [&] {
    return random_history_prompts(a.tok, a.game, opts, derive_seed(a.seed, "prompts"));
  });
}

TraceSet traces_or_throw(const Model& model, std::span<const LabeledPrompt> prompts) {
  TraceSet set = collect_traces(model, prompts);
  if (!set.failures.empty()) {
    throw std::runtime_error("prompt " + set.failures.front().prompt_id + ": " +
                             set.failures.front().message);
  }
  return set;
}

int check_layer(ConfigReader& r, std::string_view key, int fallback, const Model& m) {
  const int layer = r.get_or(key, fallback);
  if (layer < 0 || layer > m.spec.n_layers) {
    throw ConfigError(r.path_of(key) + ": layer out of range 0.." + std::to_string(m.spec.n_layers));
  }
  return layer;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json j = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

int cmd_probe(const Options& o, std::ostream& out, std::ostream& err) {
  Run run = start_run("probe", o, false);
  ConfigReader r(run.config, "");
  const Analysis a = read_analysis(r, run);
  const auto prompts = read_prompts(r, a, 200);
  std::vector<ProbeLabel> labels;
  for (const auto& name : read_list<std::string>(r, "labels", {"nash_action", "opp_last_move", "cooperated"})) {
    labels.push_back(config_guard("labels", [&] { return probe_label_from_string(name); }));
  }
  ProbeOptions popts;
  popts.folds = r.get_or("folds", popts.folds);
  popts.l2 = r.get_or("l2", popts.l2);
  const bool shuffled = r.get_or("shuffled_control", true);
  r.finish();
  write_manifest(run);

  const TraceSet set = traces_or_throw(*a.model, prompts);
  const std::uint64_t probe_seed = derive_seed(a.seed, "probe");
  std::vector<std::pair<std::string, std::vector<ProbeReport>>> results;
  for (ProbeLabel l : labels) {
    const auto y = probe_labels(l, prompts, *a.model, a.action_ids, a.nash_index);
    try {
      results.emplace_back(to_string(l), probe_layers(set.traces, y, to_string(l), probe_seed, popts));
    } catch (const InterpError& e) {
      err << "skipped " << to_string(l) << ": " << e.what() << "\n";
    }
  }
  if (shuffled) {
    auto y = probe_labels(ProbeLabel::kOppLastMove, prompts, *a.model, a.action_ids, a.nash_index);
    Rng rng(derive_seed(a.seed, "shuffle"));
    for (std::size_t i = y.size(); i > 1; --i) std::swap(y[i - 1], y[rng.below(i)]);
    results.emplace_back("shuffled_opp_last_move",
                         probe_layers(set.traces, y, "shuffled_opp_last_move", probe_seed, popts));
  }

  std::string csv = "label,layer,mean_accuracy";
  for (int f = 0; f < popts.folds; ++f) csv += ",fold_" + std::to_string(f + 1);
  csv += "\n";
  ordered_json j = ordered_json::object();
  for (const auto& [label, reports] : results) {
    ordered_json lj = ordered_json::array();
    for (const auto& rep : reports) {
      csv += label + "," + std::to_string(rep.layer) + "," + fixed(rep.mean_accuracy);
      for (double f : rep.fold_accuracies) csv += "," + fixed(f);
      csv += "\n";
      lj.push_back({{"layer", rep.layer},
                    {"mean_accuracy", rep.mean_accuracy},
                    {"fold_accuracies", rep.fold_accuracies},
                    {"intercept", rep.intercept},
                    {"normal", vector_json(rep.normal)}});
    }
    j[label] = lj;
    emit_plot_data(probe_plot(reports), run.out / "plots" / ("probe-accuracy-vs-layer." + label));
    out << label << ":";
    for (const auto& rep : reports) out << " " << format_fixed(rep.mean_accuracy, 3);
    out << "\n";
  }
  write_file(run.out / "probe.csv", csv);
  write_file(run.out / "probe.json", j.dump(2) + "\n");
  out << "output: " << run.out.string() << "\n";
  return kExitOk;
}

int cmd_lens(const Options& o, std::ostream& out, std::ostream&) {
  Run run = start_run("lens", o, false);
  ConfigReader r(run.config, "");
  const Analysis a = read_analysis(r, run);
  const auto prompts = read_prompts(r, a, 200);
  r.finish();
  write_manifest(run);

  const TraceSet set = traces_or_throw(*a.model, prompts);
  std::vector<LensSeries> all;
  std::map<std::string, std::size_t> flips;
  for (const auto& t : set.traces) {
    all.push_back(logit_lens(t, a.model->unembedding, a.action_ids, a.temperature));
    const auto l = find_override_layer(all.back(), a.nash_index);
    ++flips[l ? std::to_string(*l) : "none"];
  }
  const LensSeries mean = mean_lens(all);
  const auto override_layer = find_override_layer(mean, a.nash_index);
  const auto& labels = a.game.actions(a.role);
  std::string csv = "layer,p_" + labels[0] + ",p_" + labels[1] + "\n";
  for (std::size_t l = 0; l < mean.size(); ++l) {
    csv += std::to_string(l) + "," + fixed(mean[l][0]) + "," + fixed(mean[l][1]) + "\n";
  }
  ordered_json j;
  j["nash_action"] = labels[static_cast<std::size_t>(a.nash_index)];
  j["override_layer"] = override_layer ? ordered_json(*override_layer) : ordered_json(nullptr);
  j["prompts"] = prompts.size();
  j["per_prompt_override_layer"] = flips;
  write_file(run.out / "lens.csv", csv);
  write_file(run.out / "lens.json", j.dump(2) + "\n");
  emit_plot_data(lens_plot(mean, labels), run.out / "plots" / "lens-probability-vs-layer");
  out << "override_layer: " << (override_layer ? std::to_string(*override_layer) : "none") << "\n";
  out << "final P(" << labels[0] << ") = " << format_fixed(mean.back()[0], 3) << "\n";
  out << "output: " << run.out.string() << "\n";
  return kExitOk;
}

std::string heads_string(const std::vector<HeadId>& heads) {
  std::string s;
  for (const auto& h : heads) {
    if (!s.empty()) s += " ";
    s += "L" + std::to_string(h.layer) + "H" + std::to_string(h.head);
  }
  return s;
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream&) {
  Run run = start_run("ablate", o, false);
  ConfigReader r(run.config, "");
  const Analysis a = read_analysis(r, run);
  const auto prompts = read_prompts(r, a, 20);
  const auto k = r.get_or<std::size_t>("top_k", 5);
  r.finish();
  write_manifest(run);

  const auto scores = config_guard("prompts", [&] { return score_opponent_heads(*a.model, prompts); });
  const auto heads = top_heads(scores, k);
  const auto rows =
      ablation_experiment(*a.model, heads, prompts, a.action_ids, a.nash_index, a.temperature);
  std::string hcsv = "rank,layer,head,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hcsv += std::to_string(i + 1) + "," + std::to_string(scores[i].head.layer) + "," +
            std::to_string(scores[i].head.head) + "," + fixed(scores[i].score) + "\n";
  }
  std::string acsv = "condition,heads,p_nash_baseline,p_nash_ablated,delta_p_nash\n";
  for (const auto& row : rows) {
    acsv += row.condition + "," + heads_string(row.heads) + "," + fixed(row.p_nash_baseline) + "," +
            fixed(row.p_nash_ablated) + "," + fixed(row.delta) + "\n";
    out << row.condition << " [" << heads_string(row.heads) << "] dP(Nash) = "
        << format_fixed(row.delta, 3) << "\n";
  }
  write_file(run.out / "head_scores.csv", hcsv);
  write_file(run.out / "ablation.csv", acsv);
  out << "output: " << run.out.string() << "\n";
  return kExitOk;
}

SteeringVector read_direction(ConfigReader& r, const Analysis& a) {
  const int layer = check_layer(r, "layer", 2, *a.model);
  const DirectionMethod method = config_guard(
      "method", [&] { return direction_method_from_string(r.get_or<std::string>("method", "mean_diff")); });
  std::size_t lo = 2;
  std::size_t hi = 20;
  if (r.has("contrast")) {
    ConfigReader c = r.child("contrast");
    lo = c.get_or("min_rounds", lo);
    hi = c.get_or("max_rounds", hi);
    c.finish();
  }
  const auto coop = config_guard("contrast", [&] {
    return constant_history_prompts(a.tok, a.game, JointAction{0, 0}, lo, hi, a.role);
  });
  const auto defect = config_guard("contrast", [&] {
    return constant_history_prompts(a.tok, a.game, JointAction{1, 1}, lo, hi, a.role);
  });
  const TraceSet tc = traces_or_throw(*a.model, coop);
  const TraceSet td = traces_or_throw(*a.model, defect);
  return extract_direction(tc.traces, td.traces, layer, method, derive_seed(a.seed, "direction"));
}

std::string sweep_csv(const SweepResult& s) {
  std::string csv = s.knob + ",p_coop,p_nash,n\n";
  for (const auto& p : s.points) {
    csv += format_fixed(p.knob, 3) + "," + fixed(p.p_coop) + "," + fixed(p.p_nash) + "," +
           std::to_string(p.n) + "\n";
  }
  return csv;
}

ordered_json direction_json(const SteeringVector& v) {
  return {{"layer", v.layer},
          {"method", to_string(v.method)},
          {"n_coop", v.n_coop},
          {"n_defect", v.n_defect},
          {"direction", vector_json(v.direction)}};
}

std::vector<double> read_grid(ConfigReader& r, std::string_view key, std::vector<double> fallback) {
  auto grid = read_list<double>(r, key, fallback);
  if (grid.empty()) throw ConfigError(r.path_of(key) + ": empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ConfigError(r.path_of(key) + ": grid must be strictly increasing");
  }
  return grid;
}

void finish_sweep(const Run& run, const SweepResult& s, const SteeringVector& v, std::ostream& out) {
  ordered_json j;
  j["knob"] = s.knob;
  j["statistic"] = s.statistic;
  j["correlation"] = std::isfinite(s.correlation) ? ordered_json(s.correlation) : ordered_json(nullptr);
  j["max_projection_error"] = s.max_projection_error;
  j["direction"] = direction_json(v);
  write_file(run.out / "sweep.csv", sweep_csv(s));
  write_file(run.out / "sweep.json", j.dump(2) + "\n");
  emit_plot_data(sweep_plot(s), run.out / "plots" / (s.knob == "alpha" ? "p-vs-alpha" : "p-vs-c"));
  out << s.statistic << " = " << format_fixed(s.correlation, 3) << "\n";
  out << "P(coop) " << format_fixed(s.points.front().p_coop, 3) << " at " << s.knob << " = "
      << s.points.front().knob << ", " << format_fixed(s.points.back().p_coop, 3) << " at "
      << s.points.back().knob << "\n";
  out << "output: " << run.out.string() << "\n";
}

int cmd_steer(const Options& o, std::ostream& out, std::ostream&) {
  Run run = start_run("steer", o, false);
  ConfigReader r(run.config, "");
  const Analysis a = read_analysis(r, run);
  const auto prompts = read_prompts(r, a, 50);
  const SteeringVector v = read_direction(r, a);
  const auto layers = read_list<int>(r, "inject_layers", {0, 1, 2});
  for (int l : layers) {
    if (l < 0 || l > a.model->spec.n_layers) throw ConfigError("inject_layers: layer out of range");
  }
  const auto grid = read_grid(r, "alpha_grid", default_alpha_grid());
  r.finish();
  write_manifest(run);
  const SweepResult s = steering_sweep(*a.model, v.direction, layers, grid, prompts, a.action_ids,
                                       a.nash_index, a.temperature);
  finish_sweep(run, s, v, out);
  return kExitOk;
}

int cmd_clamp(const Options& o, std::ostream& out, std::ostream&) {
  Run run = start_run("clamp", o, false);
  ConfigReader r(run.config, "");
  const Analysis a = read_analysis(r, run);
  const auto prompts = read_prompts(r, a, 50);
  const SteeringVector v = read_direction(r, a);
  const auto grid = read_grid(r, "c_grid", default_c_grid());
  r.finish();
  write_manifest(run);
  const SweepResult s = clamp_sweep(*a.model, v.direction, v.layer, grid, prompts, a.action_ids,
                                    a.nash_index, a.temperature);
  finish_sweep(run, s, v, out);
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"equilens: game-theory tournaments and interpretability experiments", "equilens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EQUILENS_VERSION);
  Options o;

  auto add_run_flags = [&](CLI::App* sub, bool match_flags) {
    sub->add_option("--config", o.config, "TOML or JSON config file")->required();
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--template-version", o.template_version, "Prompt template version or file");
    if (match_flags) {
      sub->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
      sub->add_flag("--include-mixed-eq,!--no-include-mixed-eq", o.include_mixed,
                    "Include mixed equilibria in the Nash distance");
    }
  };

  struct Entry {
    const char* name;
    const char* help;
    bool match;
    int (*fn)(const Options&, std::ostream&, std::ostream&);
  };
  const Entry entries[] = {
      {"play", "Run one match", true, cmd_play},
      {"tournament", "Run a tournament plan", true, cmd_tournament},
      {"probe", "Train linear probes per layer", false, cmd_probe},
      {"lens", "Logit lens and override layer", false, cmd_lens},
      {"ablate", "Score opponent heads and zero-ablate them", false, cmd_ablate},
      {"steer", "Steering sweep over alpha", false, cmd_steer},
      {"clamp", "Concept clamping sweep over c", false, cmd_clamp},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_run_flags(sub, e.match);
    subs.emplace_back(sub, &e);
  }
  CLI::App* report = app.add_subcommand("report", "Summarize the records of a run directory");
  report->add_option("--runs", o.runs, "Run directory")->required();
  report->add_option("--out", o.out, "Output directory (default: the run directory)");

  std::vector<const char*> argv{"equilens"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (const CLI::Option* opt : app.get_subcommands().front()->get_options()) {
    if (opt->check_lname("include-mixed-eq") && opt->count() > 0) o.include_mixed_set = true;
  }

  try {
    if (report->parsed()) return cmd_report(o, out, err);
    for (const auto& [sub, e] : subs) {
      if (sub->parsed()) return e->fn(o, out, err);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace equilens
