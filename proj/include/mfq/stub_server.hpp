#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "mfq/model_client.hpp"

namespace mfq {

/// What the stub saw for one chat-completions call.
struct StubRequest {
  std::string system_text;
  std::string user_text;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::uint64_t call_index = 0;         // across all calls to this server, 0-based
  std::uint64_t prompt_call_index = 0;  // prior calls with the same (system, user) pair
};

struct StubReply {
  int status = 200;
  std::string content;
  std::chrono::milliseconds delay{0};
  bool malformed_body = false;

  static StubReply text(std::string content) { return {200, std::move(content), {}, false}; }
  static StubReply http_error(int status) { return {status, {}, {}, false}; }
  static StubReply stall(std::chrono::milliseconds d) { return {200, "[0]", d, false}; }
  static StubReply garbage() { return {200, {}, {}, true}; }
};

/// Deterministic reply script. Must be a pure function of the request.
using ReplyPolicy = std::function<StubReply(const StubRequest&)>;

/// In-process chat-completions server on an ephemeral loopback port. Speaks the same
/// wire protocol ChatClient uses against real endpoints.
class StubServer {
 public:
  explicit StubServer(ReplyPolicy policy, int worker_threads = 32);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const noexcept;
  std::string base_url() const;
  /// Endpoint pointing at this server. Retries use no backoff by default.
  ModelEndpoint endpoint(std::string name, int max_concurrent = 4) const;

  std::uint64_t calls() const noexcept;
  /// Largest number of requests observed in flight at once.
  int max_in_flight() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience: starts a stub and returns both the running server and its endpoint.
struct StubEndpoint {
  std::unique_ptr<StubServer> server;
  ModelEndpoint endpoint;
};
StubEndpoint make_stub_endpoint(ReplyPolicy policy, std::string name = "stub",
                                int max_concurrent = 4);

}  // namespace mfq
