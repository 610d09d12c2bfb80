#include "mfq/stub_server.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace mfq {

using json = nlohmann::json;

struct StubServer::Impl {
  ReplyPolicy policy;
  httplib::Server server;
  std::thread thread;
  int port = -1;
  std::atomic<std::uint64_t> calls{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  std::mutex counts_mutex;
  std::map<std::pair<std::string, std::string>, std::uint64_t> prompt_counts;

  void handle(const httplib::Request& req, httplib::Response& res) {
    const int now = ++in_flight;
    for (int prev = max_in_flight.load(); now > prev && !max_in_flight.compare_exchange_weak(prev, now);) {
    }
    struct Leave {
      std::atomic<int>& n;
      ~Leave() { --n; }
    } leave{in_flight};

    auto body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("messages") || !body["messages"].is_array() ||
        !body.contains("model")) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
      return;
    }
    StubRequest sr;
    sr.model = body["model"].is_string() ? body["model"].get<std::string>() : "";
    for (const auto& m : body["messages"]) {
      if (!m.is_object() || !m.contains("role") || !m.contains("content") || !m["role"].is_string() ||
          !m["content"].is_string())
        continue;
      const auto role = m["role"].get<std::string>();
      if (role == "system") sr.system_text = m["content"].get<std::string>();
      if (role == "user") sr.user_text = m["content"].get<std::string>();
    }
    if (body.contains("seed") && body["seed"].is_number_unsigned())
      sr.seed = body["seed"].get<std::uint64_t>();
    sr.call_index = calls++;
    {
      std::lock_guard lock(counts_mutex);
      sr.prompt_call_index = prompt_counts[{sr.system_text, sr.user_text}]++;
    }

    const StubReply reply = policy(sr);
    if (reply.delay.count() > 0) std::this_thread::sleep_for(reply.delay);
    res.status = reply.status;
    if (reply.malformed_body) {
      res.set_content("{\"choices\": [", "application/json");
    } else if (reply.status >= 200 && reply.status < 300) {
      json out = {{"object", "chat.completion"},
                  {"model", sr.model},
                  {"choices",
                   {{{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", reply.content}}},
                     {"finish_reason", "stop"}}}}};
      res.set_content(out.dump(), "application/json");
    } else {
      res.set_content(R"({"error":"scripted failure"})", "application/json");
    }
  }
};

StubServer::StubServer(ReplyPolicy policy, int worker_threads) : impl_(std::make_unique<Impl>()) {
  impl_->policy = std::move(policy);
  const auto threads = static_cast<std::size_t>(worker_threads);
  impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  impl_->server.set_keep_alive_max_count(1u << 30);
  impl_->server.set_tcp_nodelay(true);
  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    impl_->handle(req, res);
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw IoError("stub server could not bind a loopback port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int StubServer::port() const noexcept { return impl_->port; }

std::string StubServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

ModelEndpoint StubServer::endpoint(std::string name, int max_concurrent) const {
  ModelEndpoint ep;
  ep.name = std::move(name);
  ep.base_url = base_url();
  ep.model_id = "stub";
  ep.limits.max_concurrent = max_concurrent;
  ep.limits.timeout = std::chrono::milliseconds(10000);
  ep.limits.backoff.clear();
  return ep;
}

std::uint64_t StubServer::calls() const noexcept { return impl_->calls.load(); }
int StubServer::max_in_flight() const noexcept { return impl_->max_in_flight.load(); }

StubEndpoint make_stub_endpoint(ReplyPolicy policy, std::string name, int max_concurrent) {
  auto server = std::make_unique<StubServer>(std::move(policy));
  auto ep = server->endpoint(std::move(name), max_concurrent);
  return {std::move(server), std::move(ep)};
}

}  // namespace mfq
