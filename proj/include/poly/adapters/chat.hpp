#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include "poly/core/errors.hpp"
#include "poly/core/records.hpp"

namespace poly::adapters {

/// Endpoint failure. `transient` failures (transport, 408, 429, 5xx) are
/// retried by ChatClient; the rest surface immediately.
class ChatError : public Error {
 public:
  ChatError(const std::string& msg, int status, bool transient)
      : Error(msg), status_(status), transient_(transient) {}
  int status() const { return status_; }  // 0 when no HTTP response arrived
  bool transient() const { return transient_; }

 private:
  int status_;
  bool transient_;
};

struct ChatRequest {
  std::string system;
  std::string user;
  bool json_object = false;  // ask for a JSON object response
};

struct ChatReply {
  std::string content;
  int attempts = 1;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{500};  // doubled after each failure
};

/// Chat-completion client: POST <base_url>/chat/completions, temperature 0.
/// The bearer token is read from the environment variable named by the
/// endpoint and is never logged or persisted.
class ChatClient {
 public:
  /// Throws ConfigError for a malformed base URL or an unset key variable.
  explicit ChatClient(EndpointInfo endpoint, std::int64_t timeout_ms = 120000, RetryPolicy retry = {});

  ChatReply complete(const ChatRequest& request) const;
  const EndpointInfo& endpoint() const { return endpoint_; }

 private:
  std::string post_once(const std::string& body) const;

  EndpointInfo endpoint_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // path prefix + /chat/completions
  std::string token_;
  std::int64_t timeout_ms_;
  RetryPolicy retry_;
};

}  // namespace poly::adapters
