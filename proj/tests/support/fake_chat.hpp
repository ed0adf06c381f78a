#pragma once

#include <httplib.h>

#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace poly::testing {

/// In-process chat-completion endpoint at http://127.0.0.1:<port>/v1.
struct FakeChat {
  using Handler = std::function<void(const nlohmann::json& request, httplib::Response& res)>;

  httplib::Server server;
  int port = 0;
  std::thread thread;
  std::mutex mu;
  Handler handler;
  std::vector<nlohmann::json> requests;
  std::vector<std::string> auth_headers;

  explicit FakeChat(Handler h) : handler(std::move(h)) {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lk(mu);
        requests.push_back(body);
        auth_headers.push_back(req.get_header_value("Authorization"));
      }
      handler(body, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeChat() {
    server.stop();
    thread.join();
  }
  FakeChat(const FakeChat&) = delete;
  FakeChat& operator=(const FakeChat&) = delete;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
  std::size_t request_count() {
    std::lock_guard lk(mu);
    return requests.size();
  }

  static void reply(httplib::Response& res, const std::string& content) {
    nlohmann::json j = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}};
    res.set_content(j.dump(), "application/json");
  }
};

}  // namespace poly::testing
