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

// Test double for the equilens/1 protocol. Answers each request line with a
// fixed or mirrored action; flags inject the failure modes the engine must
// handle.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Behaviour {
  std::string action;
  bool mirror = false;
  std::optional<std::string> reasoning;
  int delay_ms = 0;
  bool missing_action = false;
  bool not_json = false;
  int exit_after = -1;
  std::optional<std::string> error;
  bool trailing = false;
  std::optional<std::string> raw;
  std::string record;
};

std::string own_default(const json& req) {
  const std::string role = req.value("role", "A");
  const json& game = req.at("game");
  return game.at(role == "A" ? "actions_a" : "actions_b").at(0).get<std::string>();
}

std::string choose(const Behaviour& b, const json& req) {
  if (b.mirror && !req.at("history").empty()) {
    const std::string role = req.at("role").get<std::string>();
    const json& last = req.at("history").back();
    const json& game = req.at("game");
    const std::string theirs = last.at(role == "A" ? "b" : "a").get<std::string>();
    const json& their_labels = game.at(role == "A" ? "actions_b" : "actions_a");
    const json& my_labels = game.at(role == "A" ? "actions_a" : "actions_b");
    for (std::size_t i = 0; i < their_labels.size(); ++i) {
      if (their_labels[i] == theirs) return my_labels.at(i).get<std::string>();
    }
  }
  return b.action.empty() ? own_default(req) : b.action;
}

std::string respond(const Behaviour& b, const std::string& line) {
  if (!b.record.empty()) {
    std::ofstream(b.record, std::ios::app) << line << "\n";
  }
  if (b.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(b.delay_ms));
  if (b.raw) return *b.raw;
  if (b.not_json) return "this is not json";
  if (b.error) return json{{"error", *b.error}}.dump();
  json req;
  try {
    req = json::parse(line);
  } catch (const json::exception&) {
    return json{{"error", "bad request"}}.dump();
  }
  ordered_json resp = ordered_json::object();
  if (!b.missing_action) resp["action"] = choose(b, req);
  resp["reasoning"] = b.reasoning ? ordered_json(*b.reasoning) : ordered_json(nullptr);
  std::string out = resp.dump();
  if (b.trailing) out += " {}";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"equilens/1 echo agent"};
  Behaviour b;
  int http_port = 0;
  app.add_option("--action", b.action, "Action label to return (default: first own action)");
  app.add_flag("--mirror", b.mirror, "Return the opponent's previous action");
  app.add_option("--reasoning", b.reasoning, "Reasoning text to attach");
  app.add_option("--delay-ms", b.delay_ms, "Sleep before each reply");
  app.add_flag("--missing-action", b.missing_action, "Omit the action field");
  app.add_flag("--not-json", b.not_json, "Reply with a non-JSON line");
  app.add_option("--exit-after", b.exit_after, "Exit after this many replies");
  app.add_option("--error", b.error, "Reply with an error object");
  app.add_flag("--trailing", b.trailing, "Append data after the reply object");
  app.add_option("--raw", b.raw, "Reply with this exact line");
  app.add_option("--record", b.record, "Append each request line to this file");
  app.add_option("--http-port", http_port, "Serve HTTP POST on this port instead of stdio");
  CLI11_PARSE(app, argc, argv);

  if (http_port > 0) {
    httplib::Server server;
    int served = 0;
    server.Post(".*", [&](const httplib::Request& req, httplib::Response& res) {
      res.set_content(respond(b, req.body) + "\n", "application/json");
      if (b.exit_after >= 0 && ++served >= b.exit_after) server.stop();
    });
    return server.listen("127.0.0.1", http_port) ? 0 : 1;
  }

  std::string line;
  int served = 0;
  while (b.exit_after < 0 || served < b.exit_after) {
    if (!std::getline(std::cin, line)) break;
    std::cout << respond(b, line) << "\n" << std::flush;
    ++served;
  }
  return 0;
}
