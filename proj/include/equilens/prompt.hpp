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

#ifndef EQUILENS_PROMPT_HPP_
#define EQUILENS_PROMPT_HPP_

// Versioned prompt templates, prompt rendering and action parsing.
//
// A template file is a list of sections introduced by "[[name]]" lines.
// Section bodies use "{{key}}" placeholders. Required sections: main,
// history, row, row_reasoning, direct, cot, scratchpad, strict.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "equilens/game.hpp"

namespace equilens {

class PromptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { kDirect, kCot, kScratchpad };

const char* to_string(Mode m);
Mode mode_from_string(std::string_view s);
std::vector<Mode> all_modes();

struct RoundReasoning {
  std::optional<std::string> a;
  std::optional<std::string> b;

  const std::optional<std::string>& of(Player p) const { return p == Player::A ? a : b; }
  bool operator==(const RoundReasoning&) const = default;
};

class PromptTemplate {
 public:
  static PromptTemplate parse(std::string version, std::string_view text);
  // Templates shipped in templates/ and compiled into the library.
  static PromptTemplate builtin(std::string_view version = "v1");
  static std::vector<std::string> builtin_versions();
  // Version is taken from the file stem: prompt_v2.txt -> "v2".
  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& version() const { return version_; }
  const std::string& section(std::string_view name) const;

 private:
  std::string version_;
  std::map<std::string, std::string, std::less<>> sections_;
};

// Replaces every {{key}}; unknown keys throw.
std::string fill_template(std::string_view text, const std::map<std::string, std::string>& vars);

std::string game_title(const Game& game);

// Prompt for `role` before round `round` (1-based). `reasoning` holds one
// entry per committed round and is shown only in cot mode.
std::string render_prompt(const PromptTemplate& tpl, const Game& game,
                          const JointHistory& history,
                          std::span<const RoundReasoning> reasoning, Player role, Mode mode,
                          std::size_t round);

// Re-prompt appended after an unparseable reply.
std::string render_strict_prompt(const PromptTemplate& tpl, const Game& game, Player role);

// Index of the action label mentioned last in `text` (case-insensitive,
// whole words only); nullopt when no label occurs.
std::optional<int> parse_action(std::string_view text, const ActionLabels& labels);

}  // namespace equilens

#endif  // EQUILENS_PROMPT_HPP_
