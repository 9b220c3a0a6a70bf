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

#include "equilens/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace equilens {
namespace detail {
const std::map<std::string, std::string>& embedded_templates();
}  // namespace detail

namespace {

const std::vector<std::string>& required_sections() {
  static const std::vector<std::string> names{"main", "history", "row",        "row_reasoning",
                                              "direct", "cot",   "scratchpad", "strict"};
  return names;
}

std::string format_payoff(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::kDirect:
      return "direct";
    case Mode::kCot:
      return "cot";
    case Mode::kScratchpad:
      return "scratchpad";
  }
  return "direct";
}

Mode mode_from_string(std::string_view s) {
  if (s == "direct") return Mode::kDirect;
  if (s == "cot") return Mode::kCot;
  if (s == "scratchpad") return Mode::kScratchpad;
  throw PromptError("unknown mode '" + std::string(s) + "'");
}

std::vector<Mode> all_modes() { return {Mode::kDirect, Mode::kCot, Mode::kScratchpad}; }

PromptTemplate PromptTemplate::parse(std::string version, std::string_view text) {
  PromptTemplate t;
  t.version_ = std::move(version);
  std::string current;
  std::string body;
  auto flush = [&] {
    if (current.empty()) return;
    if (!body.empty() && body.back() == '\n') body.pop_back();
    if (!t.sections_.emplace(current, body).second) {
      throw PromptError("template " + t.version_ + ": duplicate section [[" + current + "]]");
    }
  };
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() > 4 && line.starts_with("[[") && line.ends_with("]]")) {
      flush();
      current = line.substr(2, line.size() - 4);
      body.clear();
      continue;
    }
    if (current.empty()) {
      if (!line.empty()) throw PromptError("template " + t.version_ + ": text before first section");
      continue;
    }
    body += line;
    body += '\n';
  }
  flush();
  for (const auto& name : required_sections()) {
    if (!t.sections_.contains(name)) {
      throw PromptError("template " + t.version_ + ": missing section [[" + name + "]]");
    }
  }
  return t;
}

PromptTemplate PromptTemplate::builtin(std::string_view version) {
  const auto& all = detail::embedded_templates();
  const auto it = all.find(std::string(version));
  if (it == all.end()) throw PromptError("unknown template version '" + std::string(version) + "'");
  return parse(it->first, it->second);
}

std::vector<std::string> PromptTemplate::builtin_versions() {
  std::vector<std::string> out;
  for (const auto& [k, v] : detail::embedded_templates()) out.push_back(k);
  return out;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PromptError("cannot read template " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string stem = path.stem().string();
  if (stem.starts_with("prompt_")) stem = stem.substr(7);
  return parse(stem, ss.str());
}

const std::string& PromptTemplate::section(std::string_view name) const {
  const auto it = sections_.find(name);
  if (it == sections_.end()) throw PromptError("template: no section [[" + std::string(name) + "]]");
  return it->second;
}

std::string fill_template(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      return out;
    }
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) throw PromptError("template: unterminated placeholder");
    out.append(text.substr(pos, open - pos));
    const std::string key(text.substr(open + 2, close - open - 2));
    const auto it = vars.find(key);
    if (it == vars.end()) throw PromptError("template: unknown placeholder {{" + key + "}}");
    out += it->second;
    pos = close + 2;
  }
}

std::string game_title(const Game& game) {
  if (game.name == "pd") return "Prisoner's Dilemma";
  if (game.name == "bos") return "Battle of the Sexes";
  if (game.name == "sh") return "Stag Hunt";
  if (game.name == "mp") return "Matching Pennies";
  return game.name;
}

std::string render_prompt(const PromptTemplate& tpl, const Game& game,
                          const JointHistory& history,
                          std::span<const RoundReasoning> reasoning, Player role, Mode mode,
                          std::size_t round) {
  if (round != history.size() + 1) {
    throw PromptError("render_prompt: round must equal history length + 1");
  }
  std::string table;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (!table.empty()) table += '\n';
      table += "  A plays " + game.actions_a[static_cast<std::size_t>(i)] + ", B plays " +
               game.actions_b[static_cast<std::size_t>(j)] + ": (" +
               format_payoff(game.payoff_a(i, j)) + ", " + format_payoff(game.payoff_b(i, j)) +
               ")";
    }
  }

  std::string history_text;
  if (!history.empty()) {
    std::string rows;
    for (std::size_t i = 0; i < history.size(); ++i) {
      if (!rows.empty()) rows += '\n';
      rows += fill_template(tpl.section("row"),
                            {{"n", std::to_string(i + 1)},
                             {"a", game.actions_a[static_cast<std::size_t>(history[i].a)]},
                             {"b", game.actions_b[static_cast<std::size_t>(history[i].b)]}});
      if (mode == Mode::kCot && i < reasoning.size()) {
        for (Player p : {Player::A, Player::B}) {
          const auto& text = reasoning[i].of(p);
          if (!text) continue;
          rows += '\n';
          rows += fill_template(tpl.section("row_reasoning"), {{"who", to_string(p)}, {"text", *text}});
        }
      }
    }
    history_text = fill_template(tpl.section("history"), {{"rows", rows}}) + "\n";
  }

  const auto& acts = game.actions(role);
  return fill_template(tpl.section("main"),
                       {{"role", to_string(role)},
                        {"game_title", game_title(game)},
                        {"round", std::to_string(round)},
                        {"payoff_table", table},
                        {"history", history_text},
                        {"actions", acts[0] + ", " + acts[1]},
                        {"instruction", tpl.section(to_string(mode))}});
}

std::string render_strict_prompt(const PromptTemplate& tpl, const Game& game, Player role) {
  const auto& acts = game.actions(role);
  return fill_template(tpl.section("strict"), {{"actions", acts[0] + ", " + acts[1]}});
}

std::optional<int> parse_action(std::string_view text, const ActionLabels& labels) {
  const std::string hay = lower(text);
  std::optional<int> best;
  std::size_t best_end = 0;
  for (int k = 0; k < 2; ++k) {
    const std::string needle = lower(labels[static_cast<std::size_t>(k)]);
    if (needle.empty()) continue;
    std::size_t pos = hay.find(needle);
    while (pos != std::string::npos) {
      const std::size_t end = pos + needle.size();
      const bool left_ok = pos == 0 || !word_char(hay[pos - 1]);
      const bool right_ok = end == hay.size() || !word_char(hay[end]);
      if (left_ok && right_ok && (!best || end > best_end)) {
        best = k;
        best_end = end;
      }
      pos = hay.find(needle, pos + 1);
    }
  }
  return best;
}

}  // namespace equilens
