#pragma once

#include <memory>
#include <string>

#include "poly/adapters/dsn.hpp"
#include "poly/adapters/pool.hpp"

namespace poly::adapters::detail {

std::unique_ptr<Session> open_sqlite(const Dialect& dialect, const Dsn& dsn, const ConnectOptions& options);
std::unique_ptr<Session> open_clickhouse(const Dsn& dsn, const ConnectOptions& options);
#ifdef POLY_HAVE_POSTGRES
std::unique_ptr<Session> open_postgres(const Dsn& dsn, const ConnectOptions& options);
#endif
#ifdef POLY_HAVE_MYSQL
std::unique_ptr<Session> open_mysql(const Dsn& dsn, const ConnectOptions& options);
#endif

// Replaces every occurrence of the DSN's user and password in an engine
// message, so driver errors can be surfaced without leaking credentials.
std::string scrub(std::string message, const Dsn& dsn);

}  // namespace poly::adapters::detail
