#include "poly/adapters/chat.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <cstdlib>
#include <regex>
#include <thread>

#include "json.hpp"

namespace poly::adapters {

ChatClient::ChatClient(EndpointInfo endpoint, std::int64_t timeout_ms, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms), retry_(retry) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(endpoint_.base_url, m, url))
    throw ConfigError(fmt::format("endpoint {}: base URL '{}' is not http(s)://host[:port][/path]",
                                  endpoint_.model_id, endpoint_.base_url));
  origin_ = m[1];
  std::string prefix = m[2];
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/chat/completions";
  if (!endpoint_.api_key_env.empty()) {
    const char* v = std::getenv(endpoint_.api_key_env.c_str());
    if (!v || !*v)
      throw ConfigError(fmt::format("endpoint {}: environment variable {} is not set", endpoint_.model_id,
                                    endpoint_.api_key_env));
    token_ = v;
  }
  if (retry_.attempts < 1) throw ConfigError("retry attempts must be at least 1");
}

std::string ChatClient::post_once(const std::string& body) const {
  httplib::Client cli(origin_);
  auto secs = static_cast<time_t>(timeout_ms_ / 1000);
  auto usecs = static_cast<time_t>((timeout_ms_ % 1000) * 1000);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  auto res = cli.Post(path_, headers, body, "application/json");
  if (!res)
    throw ChatError(fmt::format("endpoint {}: request failed ({})", endpoint_.model_id, httplib::to_string(res.error())),
                    0, true);
  int s = res->status;
  if (s == 401 || s == 403)
    throw ChatError(fmt::format("endpoint {}: authentication rejected (HTTP {}); check the key in {}",
                                endpoint_.model_id, s, endpoint_.api_key_env.empty() ? "<none>" : endpoint_.api_key_env),
                    s, false);
  if (s < 200 || s >= 300) {
    bool transient = s == 408 || s == 429 || s >= 500;
    throw ChatError(fmt::format("endpoint {}: HTTP {}: {}", endpoint_.model_id, s, res->body.substr(0, 300)), s,
                    transient);
  }
  return res->body;
}

ChatReply ChatClient::complete(const ChatRequest& request) const {
  nlohmann::json body = {
      {"model", endpoint_.model.empty() ? endpoint_.model_id : endpoint_.model},
      {"temperature", 0},
      {"max_tokens", endpoint_.max_tokens},
      {"messages", nlohmann::json::array()},
  };
  if (!request.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  body["messages"].push_back({{"role", "user"}, {"content", request.user}});
  if (request.json_object) body["response_format"] = {{"type", "json_object"}};
  auto payload = body.dump();

  auto delay = retry_.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      auto raw = post_once(payload);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(raw);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        return ChatReply{content.is_null() ? std::string() : content.get<std::string>(), attempt};
      } catch (const nlohmann::json::exception& e) {
        throw ChatError(fmt::format("endpoint {}: malformed response: {}", endpoint_.model_id, e.what()), 200, false);
      }
    } catch (const ChatError& e) {
      if (!e.transient() || attempt >= retry_.attempts) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace poly::adapters
