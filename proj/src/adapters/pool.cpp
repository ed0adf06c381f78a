#include "poly/adapters/pool.hpp"

#include <fmt/format.h>

#include <map>

#include "backends.hpp"
#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

Pool::Pool(Dialect dialect, std::string redacted_dsn, std::size_t size, Factory factory,
           std::int64_t default_timeout_ms)
    : dialect_(std::move(dialect)),
      redacted_dsn_(std::move(redacted_dsn)),
      size_(size),
      factory_(std::move(factory)),
      default_timeout_ms_(default_timeout_ms) {
  if (size_ == 0) throw ConfigError("pool size must be positive");
}

Pool::~Pool() = default;

Pool::Lease::Lease(Lease&& other) noexcept : pool_(other.pool_), session_(std::move(other.session_)) {
  other.pool_ = nullptr;
}

Pool::Lease::~Lease() {
  if (pool_ && session_) pool_->release(std::move(session_));
}

Pool::Lease Pool::acquire() {
  std::unique_ptr<Session> s;
  {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !idle_.empty() || open_ < size_; });
    ++leased_;
    if (!idle_.empty()) {
      s = std::move(idle_.back());
      idle_.pop_back();
    } else {
      ++open_;
    }
  }
  try {
    if (s && !s->healthy()) s.reset();
    if (!s) s = factory_();
  } catch (...) {
    std::lock_guard lk(mu_);
    --open_;
    --leased_;
    cv_.notify_one();
    throw;
  }
  return Lease(this, std::move(s));
}

void Pool::release(std::unique_ptr<Session> s) {
  std::lock_guard lk(mu_);
  --leased_;
  idle_.push_back(std::move(s));
  cv_.notify_one();
}

std::size_t Pool::in_use() const {
  std::lock_guard lk(mu_);
  return leased_;
}

ExecutionOutcome Pool::execute(std::string_view sql, std::int64_t timeout_ms) {
  try {
    auto lease = acquire();
    return lease->execute(sql, timeout_ms);
  } catch (const ConnectionError& e) {
    return EngineErrorOutcome{ErrorKind::Connection, e.what()};
  } catch (const std::exception& e) {
    return EngineErrorOutcome{ErrorKind::Other, e.what()};
  }
}

namespace {

std::mutex registry_mu;
std::map<std::string, SessionOpener>& registry() {
  static std::map<std::string, SessionOpener> r;
  return r;
}

void require_scheme(const Dialect& dialect, const Dsn& dsn, std::initializer_list<const char*> schemes) {
  for (const char* s : schemes)
    if (dsn.scheme == s) return;
  throw ConfigError(fmt::format("DSN scheme '{}' does not match dialect {}", dsn.scheme, dialect.id()));
}

}  // namespace

void register_adapter(const Dialect& dialect, SessionOpener opener) {
  std::lock_guard lk(registry_mu);
  registry()[dialect.id()] = std::move(opener);
}

std::unique_ptr<Session> open_session(const Dialect& dialect, const std::string& dsn, const ConnectOptions& options) {
  {
    std::lock_guard lk(registry_mu);
    if (auto it = registry().find(dialect.id()); it != registry().end()) return it->second(dsn, options);
  }
  Dsn parsed = parse_dsn(dsn);
  const auto& id = dialect.id();
  if (dialect.is_sqlite_family()) {
    require_scheme(dialect, parsed, {id == "quirk" ? "quirk" : "sqlite"});
    return detail::open_sqlite(dialect, parsed, options);
  }
  if (id == "postgres") {
    require_scheme(dialect, parsed, {"postgres", "postgresql"});
#ifdef POLY_HAVE_POSTGRES
    return detail::open_postgres(parsed, options);
#else
    throw ConfigError("postgres adapter not available: built without libpq");
#endif
  }
  if (id == "mysql") {
    require_scheme(dialect, parsed, {"mysql"});
#ifdef POLY_HAVE_MYSQL
    return detail::open_mysql(parsed, options);
#else
    throw ConfigError("mysql adapter not available: built without libmysqlclient");
#endif
  }
  if (id == "clickhouse") {
    require_scheme(dialect, parsed, {"clickhouse", "http", "https"});
    return detail::open_clickhouse(parsed, options);
  }
  throw ConfigError(fmt::format("{} adapter not available; register one with register_adapter", id));
}

std::shared_ptr<Pool> connect(const Dialect& dialect, const std::string& dsn, std::size_t pool_size,
                              const ConnectOptions& options) {
  if (pool_size == 0) throw ConfigError("pool size must be positive");
  auto pool = std::make_shared<Pool>(
      dialect, redact_dsn(dsn), pool_size, [dialect, dsn, options] { return open_session(dialect, dsn, options); },
      options.default_timeout_ms);
  pool->acquire();  // opens and returns the first session
  return pool;
}

namespace detail {

std::string scrub(std::string message, const Dsn& dsn) {
  if (dsn.password.size() > 0) message = text::replace_all(std::move(message), dsn.password, "***");
  if (dsn.user.size() > 0) message = text::replace_all(std::move(message), dsn.user, "***");
  for (const auto& [k, v] : dsn.params)
    if (!v.empty() && (text::icontains(k, "password") || text::icontains(k, "user")))
      message = text::replace_all(std::move(message), v, "***");
  return message;
}

}  // namespace detail

}  // namespace poly::adapters
