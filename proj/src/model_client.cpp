#include "mfq/model_client.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace mfq {

using json = nlohmann::json;

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url lacks a scheme: '" + url + "'");
  const auto path_begin = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_begin);
  if (path_begin != std::string::npos) {
    out.path_prefix = url.substr(path_begin);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  return out;
}

// Acquires/releases a counting semaphore around one request.
class Permit {
 public:
  explicit Permit(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~Permit() { sem_.release(); }
  Permit(const Permit&) = delete;
  Permit& operator=(const Permit&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

enum class Outcome { Ok, Transient, Permanent, Protocol };

}  // namespace

std::string default_api_key_env(std::string_view endpoint_name) {
  std::string out;
  for (char c : endpoint_name)
    out += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
               : '_';
  return out + "_API_KEY";
}

std::string_view to_string(ClientErrorKind k) {
  switch (k) {
    case ClientErrorKind::TransientExhausted: return "transient-exhausted";
    case ClientErrorKind::Request: return "request";
    case ClientErrorKind::Protocol: return "protocol";
  }
  return "?";
}

ClientError::ClientError(ClientErrorKind kind, std::string endpoint, int attempts,
                         const std::string& detail)
    : Error("endpoint '" + endpoint + "': " + std::string(to_string(kind)) + " error after " +
            std::to_string(attempts) + " attempt(s): " + detail),
      kind_(kind),
      endpoint_(std::move(endpoint)),
      attempts_(attempts) {}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

struct ChatClient::Impl {
  explicit Impl(ModelEndpoint ep)
      : endpoint(std::move(ep)),
        url(split_url(endpoint.base_url)),
        permits(std::max(1, endpoint.limits.max_concurrent)) {
    if (endpoint.limits.max_concurrent < 1)
      throw ConfigError("endpoint '" + endpoint.name + "': max_concurrent must be >= 1");
    const auto env = endpoint.api_key_env.empty() ? default_api_key_env(endpoint.name)
                                                  : endpoint.api_key_env;
    if (const char* token = std::getenv(env.c_str())) api_key = token;
  }

  std::unique_ptr<httplib::Client> acquire_connection() {
    {
      std::lock_guard lock(pool_mutex);
      if (!pool.empty()) {
        auto c = std::move(pool.back());
        pool.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(url.scheme_host_port);
    const auto timeout = endpoint.limits.timeout;
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
    c->set_connection_timeout(sec.count(), usec.count());
    c->set_read_timeout(sec.count(), usec.count());
    c->set_write_timeout(sec.count(), usec.count());
    c->set_keep_alive(true);
    c->set_tcp_nodelay(true);
    if (!api_key.empty()) c->set_bearer_token_auth(api_key);
    return c;
  }

  void release_connection(std::unique_ptr<httplib::Client> c) {
    std::lock_guard lock(pool_mutex);
    pool.push_back(std::move(c));
  }

  std::string body_for(const CompletionRequest& req) const {
    json messages = json::array();
    if (!req.system_text.empty())
      messages.push_back({{"role", "system"}, {"content", req.system_text}});
    messages.push_back({{"role", "user"}, {"content", req.user_text}});
    json body = {{"model", endpoint.model_id},
                 {"messages", std::move(messages)},
                 {"temperature", endpoint.decoding.temperature},
                 {"max_tokens", endpoint.decoding.max_tokens}};
    if (req.seed) body["seed"] = *req.seed;
    return body.dump();
  }

  ModelEndpoint endpoint;
  ParsedUrl url;
  std::string api_key;
  std::counting_semaphore<> permits;
  std::mutex pool_mutex;
  std::vector<std::unique_ptr<httplib::Client>> pool;
};

ChatClient::ChatClient(ModelEndpoint endpoint) : impl_(std::make_unique<Impl>(std::move(endpoint))) {}
ChatClient::~ChatClient() = default;

const ModelEndpoint& ChatClient::endpoint() const noexcept { return impl_->endpoint; }

CompletionExchange ChatClient::complete(const CompletionRequest& request,
                                        const AttemptObserver& observer) {
  if (request.user_text.empty())
    throw ContractViolation("endpoint '" + impl_->endpoint.name + "': empty user text");

  const auto& ep = impl_->endpoint;
  const std::string path = impl_->url.path_prefix + "/v1/chat/completions";
  const std::string body = impl_->body_for(request);
  const int max_attempts = ep.limits.max_retries + 1;
  std::string last_detail;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    CompletionExchange ex;
    ex.system_text = request.system_text;
    ex.user_text = request.user_text;
    ex.attempt = attempt;
    ex.endpoint_name = ep.name;
    ex.seed = request.seed;
    ex.timestamp = utc_timestamp_now();

    Outcome outcome = Outcome::Ok;
    std::string detail;
    {
      Permit permit(impl_->permits);
      auto conn = impl_->acquire_connection();
      const auto start = std::chrono::steady_clock::now();
      auto res = conn->Post(path, body, "application/json");
      ex.latency = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::steady_clock::now() - start);

      if (!res) {
        outcome = Outcome::Transient;
        detail = "transport: " + httplib::to_string(res.error());
        // The connection may be half-broken; let it go.
      } else {
        const int status = res->status;
        if (status == 429 || status >= 500) {
          outcome = Outcome::Transient;
          detail = "http " + std::to_string(status);
        } else if (status >= 400) {
          outcome = Outcome::Permanent;
          detail = "http " + std::to_string(status);
        } else if (status < 200 || status >= 300) {
          outcome = Outcome::Protocol;
          detail = "unexpected http " + std::to_string(status);
        } else {
          auto parsed = json::parse(res->body, nullptr, false);
          const json* content = nullptr;
          if (parsed.is_object() && parsed.contains("choices") && parsed["choices"].is_array() &&
              !parsed["choices"].empty()) {
            const auto& choice = parsed["choices"][0];
            if (choice.is_object() && choice.contains("message") && choice["message"].is_object() &&
                choice["message"].contains("content") && choice["message"]["content"].is_string())
              content = &choice["message"]["content"];
          }
          if (content) {
            ex.raw_response = content->get<std::string>();
          } else {
            outcome = Outcome::Protocol;
            detail = "malformed response body";
          }
        }
        impl_->release_connection(std::move(conn));
      }
    }

    if (outcome != Outcome::Ok) ex.error = detail;
    if (observer) observer(ex);

    switch (outcome) {
      case Outcome::Ok: return ex;
      case Outcome::Permanent:
        throw ClientError(ClientErrorKind::Request, ep.name, attempt, detail);
      case Outcome::Protocol:
        throw ClientError(ClientErrorKind::Protocol, ep.name, attempt, detail);
      case Outcome::Transient:
        last_detail = detail;
        if (attempt < max_attempts && !ep.limits.backoff.empty()) {
          const auto idx = std::min<std::size_t>(attempt, ep.limits.backoff.size()) - 1;
          std::this_thread::sleep_for(ep.limits.backoff[idx]);
        }
        break;
    }
  }
  throw ClientError(ClientErrorKind::TransientExhausted, ep.name, max_attempts, last_detail);
}

CompletionExchange complete(const ModelEndpoint& endpoint, std::string_view system_text,
                            std::string_view user_text) {
  ChatClient client(endpoint);
  return client.complete({std::string(system_text), std::string(user_text), std::nullopt});
}

}  // namespace mfq
