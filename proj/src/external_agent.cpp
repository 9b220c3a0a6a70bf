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

#include "equilens/external_agent.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>

#include "httplib.h"

extern char** environ;

namespace equilens {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kMaxLine = 1 << 24;

[[noreturn]] void fail(AgentErrorCode code, const std::string& msg) { throw AgentError(code, msg); }

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

class StdioTransport : public Transport {
 public:
  StdioTransport(std::vector<std::string> command, double timeout_s)
      : command_(std::move(command)), timeout_s_(timeout_s) {
    if (command_.empty()) fail(AgentErrorCode::kDeadEndpoint, "stdio endpoint: empty command");
  }
  ~StdioTransport() override { close(); }

  std::string exchange(const std::string& request_line) override {
    if (pid_ <= 0) spawn();
    write_all(request_line + "\n");
    std::string line = read_line();
    if (!buffer_.empty()) {
      buffer_.clear();
      fail(AgentErrorCode::kMalformedResponse, "trailing data after response line");
    }
    return line;
  }

  void close() override {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
      }
    }
    pid_ = -1;
    buffer_.clear();
  }

 private:
  void spawn() {
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) fail(AgentErrorCode::kDeadEndpoint, "pipe() failed");
    if (::pipe(out_pipe) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      fail(AgentErrorCode::kDeadEndpoint, "pipe() failed");
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
      posix_spawn_file_actions_addclose(&fa, fd);
    }
    std::vector<char*> argv;
    for (auto& a : command_) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, argv[0], &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      fail(AgentErrorCode::kDeadEndpoint,
           "cannot start '" + command_[0] + "': " + std::strerror(rc));
    }
    ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
    ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
  }

  void write_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        close();
        fail(AgentErrorCode::kDeadEndpoint, "endpoint closed its input");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    using clock = std::chrono::steady_clock;
    const auto deadline =
        clock::now() + std::chrono::microseconds(static_cast<long long>(timeout_s_ * 1e6));
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      if (buffer_.size() > kMaxLine) {
        close();
        fail(AgentErrorCode::kMalformedResponse, "response line too long");
      }
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      if (left <= 0) {
        close();
        fail(AgentErrorCode::kTimeout, "no response within " + std::to_string(timeout_s_) + " s");
      }
      pollfd pfd{from_child_, POLLIN, 0};
      const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
      if (pr < 0) {
        if (errno == EINTR) continue;
        close();
        fail(AgentErrorCode::kDeadEndpoint, "poll() failed");
      }
      if (pr == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        close();
        fail(AgentErrorCode::kDeadEndpoint, "endpoint closed its output");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::vector<std::string> command_;
  double timeout_s_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

class HttpTransport : public Transport {
 public:
  HttpTransport(const std::string& url, double timeout_s) : timeout_s_(timeout_s) {
    const std::string prefix = "http://";
    if (!url.starts_with(prefix)) fail(AgentErrorCode::kDeadEndpoint, "url must start with http://");
    const auto slash = url.find('/', prefix.size());
    host_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
  }

  std::string exchange(const std::string& request_line) override {
    httplib::Client cli(host_);
    const auto sec = static_cast<time_t>(timeout_s_);
    const auto usec = static_cast<time_t>((timeout_s_ - static_cast<double>(sec)) * 1e6);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
    auto res = cli.Post(path_, request_line + "\n", "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        fail(AgentErrorCode::kTimeout, "no response within " + std::to_string(timeout_s_) + " s");
      }
      fail(AgentErrorCode::kDeadEndpoint, "http: " + httplib::to_string(err));
    }
    if (res->status != 200) {
      fail(AgentErrorCode::kBackendError, "http status " + std::to_string(res->status));
    }
    std::string body = res->body;
    if (!body.empty() && body.back() == '\n') body.pop_back();
    if (body.find('\n') != std::string::npos) {
      fail(AgentErrorCode::kMalformedResponse, "trailing data after response line");
    }
    return body;
  }

 private:
  std::string host_;
  std::string path_;
  double timeout_s_;
};

}  // namespace

Endpoint endpoint_from_json(const json& j) {
  Endpoint e;
  if (j.contains("command")) {
    e.transport = Endpoint::Transport::kStdio;
    if (j.at("command").is_string()) {
      e.command = {j.at("command").get<std::string>()};
    } else {
      e.command = j.at("command").get<std::vector<std::string>>();
    }
    if (e.command.empty() || e.command.front().empty()) {
      throw std::invalid_argument("endpoint 'command' is empty");
    }
  } else if (j.contains("url")) {
    e.transport = Endpoint::Transport::kHttp;
    e.url = j.at("url").get<std::string>();
  } else {
    throw std::invalid_argument("endpoint needs 'command' or 'url'");
  }
  if (j.contains("timeout_s")) e.timeout_s = j.at("timeout_s").get<double>();
  if (!(e.timeout_s > 0.0) || !std::isfinite(e.timeout_s)) {
    throw std::invalid_argument("timeout_s must be > 0");
  }
  return e;
}

ordered_json endpoint_to_json(const Endpoint& e) {
  ordered_json j;
  if (e.transport == Endpoint::Transport::kStdio) {
    j["command"] = e.command;
  } else {
    j["url"] = e.url;
  }
  j["timeout_s"] = e.timeout_s;
  return j;
}

ordered_json make_request(const DecisionContext& ctx) {
  ordered_json req;
  req["protocol"] = kProtocolVersion;
  req["round"] = ctx.round;
  req["role"] = to_string(ctx.role);
  req["mode"] = to_string(ctx.mode);
  req["game"] = game_to_json(*ctx.game);
  ordered_json history = ordered_json::array();
  for (std::size_t i = 0; i < ctx.history->size(); ++i) {
    const auto& r = (*ctx.history)[i];
    history.push_back({{"a", ctx.game->actions_a[static_cast<std::size_t>(r.a)]},
                       {"b", ctx.game->actions_b[static_cast<std::size_t>(r.b)]}});
  }
  req["history"] = std::move(history);
  req["prompt"] = ctx.prompt;
  return req;
}

ExternalResponse parse_response(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    fail(AgentErrorCode::kMalformedResponse, "response is not a single JSON value");
  }
  if (!j.is_object()) fail(AgentErrorCode::kSchemaError, "response must be a JSON object");
  if (j.contains("error")) {
    const auto& e = j.at("error");
    fail(AgentErrorCode::kBackendError,
         "endpoint reported error: " + (e.is_string() ? e.get<std::string>() : e.dump()));
  }
  for (const auto& [key, v] : j.items()) {
    if (key != "action" && key != "reasoning") {
      fail(AgentErrorCode::kSchemaError, "unexpected field '" + key + "'");
    }
  }
  if (!j.contains("action")) fail(AgentErrorCode::kSchemaError, "missing field 'action'");
  if (!j.at("action").is_string()) fail(AgentErrorCode::kSchemaError, "'action' must be a string");
  ExternalResponse r;
  r.action = j.at("action").get<std::string>();
  if (j.contains("reasoning") && !j.at("reasoning").is_null()) {
    if (!j.at("reasoning").is_string()) {
      fail(AgentErrorCode::kSchemaError, "'reasoning' must be a string or null");
    }
    r.reasoning = j.at("reasoning").get<std::string>();
  }
  return r;
}

std::unique_ptr<Transport> make_transport(const Endpoint& endpoint) {
  if (endpoint.transport == Endpoint::Transport::kHttp) {
    return std::make_unique<HttpTransport>(endpoint.url, endpoint.timeout_s);
  }
  return std::make_unique<StdioTransport>(endpoint.command, endpoint.timeout_s);
}

ExternalResponse external_next_action(Transport& transport, const ordered_json& request) {
  return parse_response(transport.exchange(request.dump()));
}

ExternalAgent::ExternalAgent(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}

ExternalAgent::~ExternalAgent() = default;

AgentReply ExternalAgent::next_action(const DecisionContext& ctx, Rng&) {
  if (!transport_) transport_ = make_transport(endpoint_);
  const ExternalResponse resp = external_next_action(*transport_, make_request(ctx));
  AgentReply r;
  r.text = resp.action;
  r.reasoning = resp.reasoning;
  return r;
}

void ExternalAgent::reset() {
  if (transport_) transport_->close();
  transport_.reset();
}

ordered_json ExternalAgent::descriptor() const {
  ordered_json j;
  j["kind"] = "external";
  j["endpoint"] = endpoint_to_json(endpoint_);
  return j;
}

}  // namespace equilens
