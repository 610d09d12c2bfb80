#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfq/error.hpp"

namespace mfq {

struct Decoding {
  double temperature = 1.0;
  int max_tokens = 64;
};

struct Limits {
  int max_concurrent = 4;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  /// Sleep before retry k (1-based) is backoff[min(k, size) - 1]; empty means no sleep.
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500),
                                                 std::chrono::milliseconds(1000),
                                                 std::chrono::milliseconds(2000)};
};

/// An OpenAI-compatible chat-completions endpoint.
struct ModelEndpoint {
  std::string name;
  std::string base_url;  // scheme://host[:port][/prefix]; requests go to {base_url}/v1/chat/completions
  std::string model_id;
  Decoding decoding;
  Limits limits;
  std::string api_key_env;  // empty: default_api_key_env(name)
};

/// `<NAME>_API_KEY` with the name upper-cased and non-alphanumerics replaced by '_'.
std::string default_api_key_env(std::string_view endpoint_name);

/// One HTTP attempt. Failed attempts carry `error` and an empty raw_response.
struct CompletionExchange {
  std::string system_text;
  std::string user_text;
  std::string raw_response;
  std::chrono::microseconds latency{0};
  int attempt = 1;
  std::string endpoint_name;
  std::string timestamp;  // ISO-8601 UTC
  std::optional<std::string> error;
  std::optional<std::uint64_t> seed;
};

struct CompletionRequest {
  std::string system_text;
  std::string user_text;
  /// Forwarded as the OpenAI `seed` field when present.
  std::optional<std::uint64_t> seed;
};

enum class ClientErrorKind {
  TransientExhausted,  // timeouts, transport failures, 429 and 5xx until retries ran out
  Request,             // other 4xx; never retried
  Protocol,            // 2xx with an unreadable body
};

std::string_view to_string(ClientErrorKind k);

class ClientError : public Error {
 public:
  ClientError(ClientErrorKind kind, std::string endpoint, int attempts, const std::string& detail);

  ClientErrorKind kind() const noexcept { return kind_; }
  const std::string& endpoint() const noexcept { return endpoint_; }
  int attempts() const noexcept { return attempts_; }

 private:
  ClientErrorKind kind_;
  std::string endpoint_;
  int attempts_;
};

/// Called once per attempt, failures included, before complete() returns or throws.
using AttemptObserver = std::function<void(const CompletionExchange&)>;

/// Thread-safe chat-completions client for one endpoint. At most
/// `limits.max_concurrent` requests are in flight at any instant.
class ChatClient {
 public:
  explicit ChatClient(ModelEndpoint endpoint);
  ~ChatClient();
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  /// Returns the successful exchange or throws ClientError.
  CompletionExchange complete(const CompletionRequest& request, const AttemptObserver& observer = {});

  const ModelEndpoint& endpoint() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

CompletionExchange complete(const ModelEndpoint& endpoint, std::string_view system_text,
                            std::string_view user_text);

std::string utc_timestamp_now();

}  // namespace mfq
