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

#ifndef EQUILENS_EXTERNAL_AGENT_HPP_
#define EQUILENS_EXTERNAL_AGENT_HPP_

// External agents over the equilens/1 wire protocol: one JSON object per
// line, UTF-8, no trailing data.
//
//   request  {"protocol":"equilens/1","round":int,"role":"A"|"B",
//             "mode":"direct"|"cot"|"scratchpad","game":{...},
//             "history":[{"a":str,"b":str},...],"prompt":str}
//   response {"action":str,"reasoning":str|null}
//          | {"error":str}

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "equilens/agent.hpp"

namespace equilens {

inline constexpr const char* kProtocolVersion = "equilens/1";

struct Endpoint {
  enum class Transport { kStdio, kHttp };
  Transport transport = Transport::kStdio;
  // kStdio: argv of the subprocess.
  std::vector<std::string> command;
  // kHttp: http://host:port/path
  std::string url;
  double timeout_s = 120.0;
};

Endpoint endpoint_from_json(const nlohmann::json& j);
nlohmann::ordered_json endpoint_to_json(const Endpoint& e);

struct ExternalResponse {
  std::string action;
  std::optional<std::string> reasoning;
};

nlohmann::ordered_json make_request(const DecisionContext& ctx);

// Validates one response line. Throws AgentError with kMalformedResponse
// (not a single JSON object), kSchemaError (wrong fields or types) or
// kBackendError ({"error": ...}).
ExternalResponse parse_response(std::string_view line);

class Transport {
 public:
  virtual ~Transport() = default;
  // Sends one request line and returns the raw response line.
  virtual std::string exchange(const std::string& request_line) = 0;
  virtual void close() {}
};

std::unique_ptr<Transport> make_transport(const Endpoint& endpoint);

// One request/response round trip.
ExternalResponse external_next_action(Transport& transport, const nlohmann::ordered_json& request);

class ExternalAgent : public Agent {
 public:
  explicit ExternalAgent(Endpoint endpoint);
  ~ExternalAgent() override;
  AgentReply next_action(const DecisionContext& ctx, Rng& rng) override;
  void reset() override;
  nlohmann::ordered_json descriptor() const override;

 private:
  Endpoint endpoint_;
  std::unique_ptr<Transport> transport_;
};

}  // namespace equilens

#endif  // EQUILENS_EXTERNAL_AGENT_HPP_
