#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "poly/adapters/session.hpp"
#include "poly/comparator/evaluate.hpp"

namespace poly::adapters {

struct ConnectOptions {
  // Namespace (schema / database / file stem) the sessions operate in.
  std::string ns;
  bool read_only = false;
  // Inferred types of the source tables; lets embedded sources decode ISO
  // text as dates and 0/1 as booleans.
  std::shared_ptr<const SchemaSnapshot> type_hints;
  std::int64_t default_timeout_ms = 30000;
};

/// Thread-safe pool holding at most `size` sessions. Checkout blocks while
/// all sessions are leased.
class Pool : public cmp::Executor {
 public:
  using Factory = std::function<std::unique_ptr<Session>()>;

  Pool(Dialect dialect, std::string redacted_dsn, std::size_t size, Factory factory, std::int64_t default_timeout_ms);
  ~Pool() override;

  class Lease {
   public:
    Lease(Lease&& other) noexcept;
    Lease& operator=(Lease&&) = delete;
    ~Lease();
    Session& operator*() const { return *session_; }
    Session* operator->() const { return session_.get(); }

   private:
    friend class Pool;
    Lease(Pool* pool, std::unique_ptr<Session> s) : pool_(pool), session_(std::move(s)) {}
    Pool* pool_;
    std::unique_ptr<Session> session_;
  };

  /// Blocks until a session is free; health-checks it and replaces a dead
  /// one. Throws ConnectionError when a replacement cannot be opened.
  Lease acquire();

  ExecutionOutcome execute(std::string_view sql, std::int64_t timeout_ms) override;
  ExecutionOutcome execute(std::string_view sql) { return execute(sql, default_timeout_ms_); }

  const Dialect& dialect() const { return dialect_; }
  const std::string& redacted_dsn() const { return redacted_dsn_; }
  std::size_t size() const { return size_; }
  std::size_t in_use() const;

 private:
  void release(std::unique_ptr<Session> s);

  Dialect dialect_;
  std::string redacted_dsn_;
  std::size_t size_;
  Factory factory_;
  std::int64_t default_timeout_ms_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Session>> idle_;
  std::size_t open_ = 0;  // sessions created and not discarded
  std::size_t leased_ = 0;
};

/// Opens a pool for `dialect`. The first session is opened eagerly so a bad
/// DSN fails here, with the DSN redacted in the message.
std::shared_ptr<Pool> connect(const Dialect& dialect, const std::string& dsn, std::size_t pool_size,
                              const ConnectOptions& options = {});

/// One session outside any pool (migration writers).
std::unique_ptr<Session> open_session(const Dialect& dialect, const std::string& dsn, const ConnectOptions& options);

using SessionOpener = std::function<std::unique_ptr<Session>(const std::string& dsn, const ConnectOptions&)>;

/// Registers (or replaces) the adapter used for `dialect`. Registered
/// adapters take precedence over the built-in ones.
void register_adapter(const Dialect& dialect, SessionOpener opener);

}  // namespace poly::adapters
