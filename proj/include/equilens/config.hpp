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

#ifndef EQUILENS_CONFIG_HPP_
#define EQUILENS_CONFIG_HPP_

// Run configuration: TOML (the subset used by plans: tables, arrays of
// tables, inline tables, arrays, strings, numbers, booleans) or JSON,
// loaded into a JSON tree and read through a strict key reader.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "equilens/agent.hpp"
#include "equilens/circuit.hpp"
#include "equilens/match.hpp"
#include "json.hpp"

namespace equilens {

// Invalid or unreadable configuration; the message names the offending
// file or key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json parse_toml(std::string_view text);

// .json files are parsed as JSON, everything else as TOML.
nlohmann::json load_config_file(const std::filesystem::path& path);

// Reads keys of one JSON object; finish() rejects keys never read.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& object, std::string path);

  bool has(std::string_view key) const;
  std::string path_of(std::string_view key) const;
  const std::string& path() const { return path_; }

  const nlohmann::json& raw(std::string_view key);
  ConfigReader child(std::string_view key);

  template <typename T>
  T required(std::string_view key) {
    return convert<T>(raw(key), path_of(key));
  }

  template <typename T>
  T get_or(std::string_view key, T fallback) {
    if (!has(key)) return fallback;
    return convert<T>(raw(key), path_of(key));
  }

  template <typename T>
  std::optional<T> optional(std::string_view key) {
    if (!has(key)) return std::nullopt;
    return convert<T>(raw(key), path_of(key));
  }

  void finish() const;

  template <typename T>
  static T convert(const nlohmann::json& v, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(path + ": expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
            throw ConfigError(path + ": expected a non-negative integer");
          }
        }
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path + ": wrong type");
    }
  }

 private:
  const nlohmann::json* obj_;
  std::string path_;
  mutable std::set<std::string, std::less<>> used_;
};

// Model block: {preset, seed, circuit = {...}, spec = {...}} or
// {weights = "dir"}; relative paths resolve against `base_dir`.
struct ModelSource {
  std::optional<std::filesystem::path> weights;
  std::string preset = "instruct_like";
  SyntheticCircuitConfig circuit = instruct_like_circuit();
  ModelSpec spec = default_model_spec();
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
};

ModelSource read_model_source(ConfigReader reader, const std::filesystem::path& base_dir);
std::shared_ptr<const Model> build_model(const ModelSource& source);

// Agent entries: {id, kind, ...}; kinds are the scripted strategies,
// "transformer" (with a model block) and "external" (command or url).
AgentSpec read_agent_spec(ConfigReader reader);
// Validates the kind-specific parameters of a spec.
void validate_agent_spec(const AgentSpec& spec, const std::filesystem::path& base_dir);

// Factory over agent specs. Transformer models are built once per spec and
// shared between matches; safe to call from several threads.
AgentFactory make_agent_factory(std::filesystem::path base_dir);

// Game entry: a canonical name or a custom table.
Game read_game(const nlohmann::json& j, const std::string& path);

}  // namespace equilens

#endif  // EQUILENS_CONFIG_HPP_
