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

#include "equilens/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "equilens/external_agent.hpp"
#include "equilens/transformer_agent.hpp"
#include "equilens/weights_io.hpp"

namespace equilens {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : s_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        const bool array = peek(1) == '[';
        pos_ += array ? 2 : 1;
        skip_ws();
        const auto keys = parse_key();
        skip_ws();
        expect(']');
        if (array) expect(']');
        end_of_line();
        table = array ? open_array_table(root, keys) : open_table(root, keys);
        continue;
      }
      const auto keys = parse_key();
      skip_ws();
      expect('=');
      skip_ws();
      json value = parse_value();
      end_of_line();
      assign(*table, keys, std::move(value));
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("toml line " + std::to_string(line_) + ": " + msg);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0';
  }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') get();
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') get();
      if (!eof() && peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
        continue;
      }
      break;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') get();
    if (!eof() && peek() != '\n') fail("unexpected text after value");
  }

  std::vector<std::string> parse_key() {
    std::vector<std::string> parts;
    while (true) {
      skip_ws();
      if (peek() == '"') {
        parts.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        parts.push_back(parse_literal_string());
      } else {
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-')) {
          k += get();
        }
        if (k.empty()) fail("expected a key");
        parts.push_back(k);
      }
      skip_ws();
      if (peek() != '.') break;
      get();
    }
    return parts;
  }

  std::string parse_basic_string() {
    expect('"');
    if (peek() == '"' && peek(1) == '"') fail("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated string");
      const char e = get();
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u':
        case 'U': {
          const int n = e == 'u' ? 4 : 8;
          std::uint32_t cp = 0;
          for (int i = 0; i < n; ++i) {
            const char h = eof() ? '\0' : get();
            cp <<= 4;
            if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
            else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
            else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
            else fail("bad unicode escape");
          }
          append_utf8(out, cp);
          break;
        }
        default:
          fail(std::string("bad escape \\") + e);
      }
    }
    return out;
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  std::string parse_literal_string() {
    expect('\'');
    if (peek() == '\'' && peek(1) == '\'') fail("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '\'') break;
      out += c;
    }
    return out;
  }

  json parse_value() {
    if (eof()) fail("expected a value");
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-' || peek() == '+' || peek() == '.')) {
      tok += get();
    }
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    return parse_number(tok);
  }

  json parse_number(std::string tok) {
    std::string t;
    for (char ch : tok) {
      if (ch != '_') t += ch;
    }
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    if (t == "nan" || t == "+nan" || t == "-nan") return std::numeric_limits<double>::quiet_NaN();
    std::string body = t;
    if (!body.empty() && body[0] == '+') body.erase(0, 1);
    const bool is_float = body.find_first_of(".eE") != std::string::npos &&
                          body.rfind("0x", 0) == std::string::npos;
    if (is_float) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
      if (ec != std::errc() || p != body.data() + body.size()) fail("invalid number '" + tok + "'");
      return v;
    }
    int base = 10;
    std::string digits = body;
    bool negative = false;
    if (!digits.empty() && digits[0] == '-') {
      negative = true;
      digits.erase(0, 1);
    }
    if (digits.rfind("0x", 0) == 0) {
      base = 16;
      digits.erase(0, 2);
    }
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
    if (digits.empty() || ec != std::errc() || p != digits.data() + digits.size()) {
      fail("invalid value '" + tok + "'");
    }
    if (negative) {
      if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        fail("integer out of range '" + tok + "'");
      }
      return -static_cast<std::int64_t>(v);
    }
    return v;
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    while (true) {
      skip_array_space();
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(parse_value());
      skip_array_space();
      if (peek() == ',') {
        get();
        continue;
      }
      expect(']');
      return arr;
    }
  }

  json parse_inline_table() {
    expect('{');
    json t = json::object();
    skip_ws();
    if (peek() == '}') {
      get();
      return t;
    }
    while (true) {
      const auto keys = parse_key();
      skip_ws();
      expect('=');
      skip_ws();
      assign(t, keys, parse_value());
      skip_ws();
      if (peek() == ',') {
        get();
        continue;
      }
      expect('}');
      return t;
    }
  }

  void assign(json& table, const std::vector<std::string>& keys, json value) {
    json* t = &table;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      json& next = (*t)[keys[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("key '" + keys[i] + "' is not a table");
      t = &next;
    }
    if (t->contains(keys.back())) fail("duplicate key '" + keys.back() + "'");
    (*t)[keys.back()] = std::move(value);
  }

  json* descend(json& root, const std::vector<std::string>& keys, std::size_t n) {
    json* t = &root;
    for (std::size_t i = 0; i < n; ++i) {
      json& next = (*t)[keys[i]];
      if (next.is_null()) next = json::object();
      if (next.is_array()) {
        if (next.empty() || !next.back().is_object()) fail("key '" + keys[i] + "' is not a table");
        t = &next.back();
        continue;
      }
      if (!next.is_object()) fail("key '" + keys[i] + "' is not a table");
      t = &next;
    }
    return t;
  }

  json* open_table(json& root, const std::vector<std::string>& keys) {
    std::string joined;
    for (const auto& k : keys) joined += k + '\x1f';
    if (!defined_.insert(joined).second) fail("table defined twice");
    return descend(root, keys, keys.size());
  }

  json* open_array_table(json& root, const std::vector<std::string>& keys) {
    json* parent = descend(root, keys, keys.size() - 1);
    json& arr = (*parent)[keys.back()];
    if (arr.is_null()) arr = json::array();
    if (!arr.is_array()) fail("key '" + keys.back() + "' is not an array of tables");
    arr.push_back(json::object());
    return &arr.back();
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

json load_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  const std::string text = read_text(path);
  try {
    if (path.extension() == ".json") return json::parse(text);
    return parse_toml(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ConfigReader::ConfigReader(const json& object, std::string path)
    : obj_(&object), path_(std::move(path)) {
  if (!object.is_object()) throw ConfigError((path_.empty() ? "config" : path_) + ": expected a table");
}

bool ConfigReader::has(std::string_view key) const { return obj_->contains(key); }

std::string ConfigReader::path_of(std::string_view key) const {
  return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

const json& ConfigReader::raw(std::string_view key) {
  const auto it = obj_->find(key);
  if (it == obj_->end()) throw ConfigError(path_of(key) + ": missing required key");
  used_.insert(std::string(key));
  return *it;
}

ConfigReader ConfigReader::child(std::string_view key) { return ConfigReader(raw(key), path_of(key)); }

void ConfigReader::finish() const {
  for (const auto& [k, v] : obj_->items()) {
    if (!used_.contains(k)) throw ConfigError(path_of(k) + ": unknown key");
  }
}

ordered_json ModelSource::to_json() const {
  ordered_json j;
  if (weights) {
    j["weights"] = weights->string();
    return j;
  }
  j["preset"] = preset;
  j["seed"] = seed;
  j["spec"] = {{"n_layers", spec.n_layers},
               {"d_model", spec.d_model},
               {"n_heads", spec.n_heads},
               {"d_ff", spec.d_ff},
               {"max_context", spec.max_context}};
  j["circuit"] = circuit.to_json();
  return j;
}

ModelSource read_model_source(ConfigReader r, const fs::path& base_dir) {
  ModelSource src;
  if (r.has("weights")) {
    src.weights = resolve(base_dir, r.required<std::string>("weights"));
    r.finish();
    return src;
  }
  src.preset = r.get_or<std::string>("preset", "instruct_like");
  try {
    src.circuit = circuit_preset(src.preset);
  } catch (const ModelError& e) {
    throw ConfigError(r.path_of("preset") + ": " + e.what());
  }
  src.seed = r.get_or<std::uint64_t>("seed", 0);
  if (r.has("spec")) {
    ConfigReader s = r.child("spec");
    src.spec.n_layers = s.get_or("n_layers", src.spec.n_layers);
    src.spec.d_model = s.get_or("d_model", src.spec.d_model);
    src.spec.n_heads = s.get_or("n_heads", src.spec.n_heads);
    src.spec.d_ff = s.get_or("d_ff", src.spec.d_ff);
    src.spec.max_context = s.get_or("max_context", src.spec.max_context);
    s.finish();
  }
  if (r.has("circuit")) {
    try {
      src.circuit = circuit_config_from_json(r.raw("circuit"), src.circuit);
    } catch (const ModelError& e) {
      throw ConfigError(r.path() + "." + e.what());
    }
  }
  try {
    src.circuit.validate(src.spec);
  } catch (const ModelError& e) {
    throw ConfigError(r.path() + ": " + e.what());
  }
  r.finish();
  return src;
}

std::shared_ptr<const Model> build_model(const ModelSource& source) {
  if (source.weights) return std::make_shared<const Model>(load_model(*source.weights));
  return std::make_shared<const Model>(build_synthetic_circuit(source.spec, source.circuit, source.seed));
}

Game read_game(const json& j, const std::string& path) {
  try {
    return game_from_json(j);
  } catch (const GameError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

AgentSpec read_agent_spec(ConfigReader r) {
  AgentSpec spec;
  spec.id = r.required<std::string>("id");
  spec.params = json::object();
  spec.params["kind"] = r.required<std::string>("kind");
  const auto kind = spec.params["kind"].get<std::string>();
  auto copy = [&](std::string_view key) {
    if (r.has(key)) spec.params[std::string(key)] = r.raw(key);
  };
  if (const auto sk = scripted_kind_from_string(kind)) {
    if (*sk == ScriptedKind::kBernoulli) {
      spec.params["p"] = r.required<double>("p");
    }
    if (*sk == ScriptedKind::kNashMixed) {
      copy("strat_a");
      copy("strat_b");
    }
  } else if (kind == "transformer") {
    spec.params["model"] = r.raw("model");
  } else if (kind == "external") {
    copy("command");
    copy("url");
    copy("timeout_s");
  } else {
    throw ConfigError(r.path_of("kind") + ": unknown agent kind '" + kind + "'");
  }
  r.finish();
  return spec;
}

namespace {

std::unique_ptr<Agent> scripted_from_params(ScriptedKind kind, const json& params,
                                            const std::string& where) {
  ScriptedStrategy s;
  s.kind = kind;
  if (kind == ScriptedKind::kBernoulli) {
    s.p = params.at("p").get<double>();
    if (!(s.p >= 0.0 && s.p <= 1.0)) throw ConfigError(where + ".p: must lie in [0, 1]");
  }
  if (kind == ScriptedKind::kNashMixed && (params.contains("strat_a") || params.contains("strat_b"))) {
    if (!params.contains("strat_a") || !params.contains("strat_b")) {
      throw ConfigError(where + ": nash_mixed needs both strat_a and strat_b");
    }
    const auto a = params.at("strat_a").get<std::vector<double>>();
    const auto b = params.at("strat_b").get<std::vector<double>>();
    if (a.size() != 2 || b.size() != 2) throw ConfigError(where + ": strategies must have two entries");
    EquilibriumProfile prof;
    prof.strat_a = MixedStrategy(a[0], a[1]);
    prof.strat_b = MixedStrategy(b[0], b[1]);
    prof.kind = EquilibriumKind::kMixed;
    if (!is_mixed_strategy(prof.strat_a) || !is_mixed_strategy(prof.strat_b)) {
      throw ConfigError(where + ": strategies must be probability vectors");
    }
    s.profile = prof;
  }
  return std::make_unique<ScriptedAgent>(s);
}

}  // namespace

void validate_agent_spec(const AgentSpec& spec, const fs::path& base_dir) {
  const std::string where = "agents." + spec.id;
  const auto kind = spec.params.at("kind").get<std::string>();
  try {
    if (const auto sk = scripted_kind_from_string(kind)) {
      scripted_from_params(*sk, spec.params, where);
    } else if (kind == "transformer") {
      read_model_source(ConfigReader(spec.params.at("model"), where + ".model"), base_dir);
    } else if (kind == "external") {
      endpoint_from_json(spec.params);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

AgentFactory make_agent_factory(fs::path base_dir) {
  struct Cache {
    std::mutex mu;
    std::map<std::string, std::shared_ptr<const Model>> models;
  };
  auto cache = std::make_shared<Cache>();
  return [cache, base_dir](const AgentSpec& spec) -> std::unique_ptr<Agent> {
    const std::string where = "agents." + spec.id;
    const auto kind = spec.params.at("kind").get<std::string>();
    if (const auto sk = scripted_kind_from_string(kind)) {
      return scripted_from_params(*sk, spec.params, where);
    }
    if (kind == "external") {
      Endpoint e = endpoint_from_json(spec.params);
      if (!e.command.empty() && e.command[0].find('/') != std::string::npos) {
        e.command[0] = resolve(base_dir, e.command[0]).string();
      }
      return std::make_unique<ExternalAgent>(e);
    }
    if (kind == "transformer") {
      const ModelSource src =
          read_model_source(ConfigReader(spec.params.at("model"), where + ".model"), base_dir);
      const std::string key = src.to_json().dump();
      std::shared_ptr<const Model> model;
      {
        std::lock_guard lock(cache->mu);
        auto& slot = cache->models[key];
        if (!slot) slot = build_model(src);
        model = slot;
      }
      return std::make_unique<TransformerAgent>(model, spec.id, src.to_json());
    }
    throw ConfigError(where + ".kind: unknown agent kind '" + kind + "'");
  };
}

}  // namespace equilens
