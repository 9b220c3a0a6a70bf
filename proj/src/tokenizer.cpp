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

#include "equilens/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace equilens {
namespace {

std::optional<int> canonical_action_index(std::string_view label) {
  static const std::unordered_map<std::string, int> table = [] {
    std::unordered_map<std::string, int> t;
    for (const auto& name : canonical_game_names()) {
      const Game g = make_game(name);
      for (Player p : {Player::A, Player::B}) {
        for (int i = 0; i < 2; ++i) t.emplace(g.actions(p)[static_cast<std::size_t>(i)], i);
      }
    }
    return t;
  }();
  const auto it = table.find(std::string(label));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::string game_token(const Game& game) {
  const auto names = canonical_game_names();
  if (std::find(names.begin(), names.end(), game.name) != names.end()) {
    return "game:" + game.name;
  }
  return "game:custom";
}

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  if (vocab_.empty()) throw TokenizerError("tokenizer: empty vocabulary");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    const auto& t = vocab_[i];
    if (t.empty() || std::any_of(t.begin(), t.end(),
                                 [](unsigned char c) { return std::isspace(c); })) {
      throw TokenizerError("tokenizer: invalid token '" + t + "'");
    }
    if (!index_.emplace(t, static_cast<int>(i)).second) {
      throw TokenizerError("tokenizer: duplicate token '" + t + "'");
    }
  }
}

Tokenizer Tokenizer::standard() {
  std::vector<std::string> vocab{"<bos>"};
  for (const auto& name : canonical_game_names()) vocab.push_back("game:" + name);
  vocab.push_back("game:custom");
  std::vector<std::string> labels;
  for (const auto& name : canonical_game_names()) {
    const Game g = make_game(name);
    for (const auto& l : g.actions_a) {
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    }
  }
  for (const auto& l : labels) {
    vocab.push_back(l);
    vocab.push_back("my:" + l);
    vocab.push_back("their:" + l);
  }
  return Tokenizer(std::move(vocab));
}

std::optional<int> Tokenizer::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Tokenizer::require_id(std::string_view token) const {
  const auto i = id(token);
  if (!i) throw TokenizerError("tokenizer: unknown token '" + std::string(token) + "'");
  return *i;
}

const std::string& Tokenizer::token(int id) const {
  if (id < 0 || id >= size()) throw TokenizerError("tokenizer: id out of range");
  return vocab_[static_cast<std::size_t>(id)];
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) ids.push_back(require_id(word));
  return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

std::array<int, 2> Tokenizer::action_token_ids(const Game& game, Player p) const {
  const auto& acts = game.actions(p);
  return {require_id(acts[0]), require_id(acts[1])};
}

TokenInfo Tokenizer::classify(int id) const {
  const std::string& t = token(id);
  if (t == "<bos>") return {TokenClass::kBos, -1};
  if (t.rfind("game:", 0) == 0) return {TokenClass::kGame, -1};
  if (t.rfind("my:", 0) == 0) {
    if (auto a = canonical_action_index(t.substr(3))) return {TokenClass::kMine, *a};
    return {};
  }
  if (t.rfind("their:", 0) == 0) {
    if (auto a = canonical_action_index(t.substr(6))) return {TokenClass::kTheirs, *a};
    return {};
  }
  if (auto a = canonical_action_index(t)) return {TokenClass::kAction, *a};
  return {};
}

nlohmann::json Tokenizer::to_json() const { return vocab_; }

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw TokenizerError("tokenizer: vocab must be a JSON list of strings");
  std::vector<std::string> vocab;
  for (const auto& t : j) {
    if (!t.is_string()) throw TokenizerError("tokenizer: vocab entries must be strings");
    vocab.push_back(t.get<std::string>());
  }
  return Tokenizer(std::move(vocab));
}

std::string transcript(const Game& game, const JointHistory& history, Player role) {
  std::string out = "<bos> " + game_token(game);
  const Player opp = other(role);
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += " my:" + game.actions(role)[static_cast<std::size_t>(history.action(role, i))];
    out += " their:" + game.actions(opp)[static_cast<std::size_t>(history.action(opp, i))];
  }
  return out;
}

std::vector<int> opponent_positions(const Tokenizer& tok, std::span<const int> ids) {
  std::vector<int> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (tok.classify(ids[i]).cls == TokenClass::kTheirs) pos.push_back(static_cast<int>(i));
  }
  return pos;
}

}  // namespace equilens
