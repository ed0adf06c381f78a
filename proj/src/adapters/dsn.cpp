#include "poly/adapters/dsn.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

namespace {

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
        std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

bool is_secret_param(std::string_view key) {
  return text::icontains(key, "password") || text::icontains(key, "secret") || text::icontains(key, "token") ||
         text::iequals(key, "key") || text::iequals(key, "user") || text::iequals(key, "username");
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    out += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : '_';
  }
  return out;
}

}  // namespace

Dsn parse_dsn(std::string_view dsn) {
  Dsn out;
  out.raw = std::string(dsn);
  auto colon = dsn.find(':');
  if (colon == std::string_view::npos || colon == 0) throw ConfigError("malformed DSN: missing scheme");
  out.scheme = text::to_lower(dsn.substr(0, colon));
  auto rest = dsn.substr(colon + 1);
  if (out.scheme == "sqlite" || out.scheme == "quirk") {
    if (rest.starts_with("//")) rest.remove_prefix(2);
    if (rest.empty()) throw ConfigError(fmt::format("malformed DSN: {} needs a path", out.scheme));
    out.path = std::string(rest);
    return out;
  }
  if (!rest.starts_with("//")) throw ConfigError("malformed DSN: expected scheme://");
  rest.remove_prefix(2);

  if (auto q = rest.find('?'); q != std::string_view::npos) {
    for (const auto& kv : text::split(rest.substr(q + 1), '&')) {
      if (kv.empty()) continue;
      auto eq = kv.find('=');
      if (eq == std::string::npos) {
        out.params[kv] = "";
      } else {
        out.params[percent_decode(kv.substr(0, eq))] = percent_decode(std::string_view(kv).substr(eq + 1));
      }
    }
    rest = rest.substr(0, q);
  }
  auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  if (slash != std::string_view::npos) out.database = percent_decode(rest.substr(slash + 1));

  if (auto at = authority.rfind('@'); at != std::string_view::npos) {
    auto userinfo = authority.substr(0, at);
    authority = authority.substr(at + 1);
    auto c = userinfo.find(':');
    out.user = percent_decode(userinfo.substr(0, c));
    if (c != std::string_view::npos) out.password = percent_decode(userinfo.substr(c + 1));
  }
  std::string_view host = authority;
  if (host.starts_with('[')) {
    auto close = host.find(']');
    if (close == std::string_view::npos) throw ConfigError("malformed DSN: unterminated IPv6 host");
    out.host = std::string(host.substr(1, close - 1));
    host = host.substr(close + 1);
    if (!host.empty() && !host.starts_with(':')) throw ConfigError("malformed DSN: junk after IPv6 host");
  } else {
    auto c = host.rfind(':');
    out.host = percent_decode(host.substr(0, c));
    host = c == std::string_view::npos ? std::string_view{} : host.substr(c);
  }
  if (host.starts_with(':')) {
    auto digits = host.substr(1);
    int port = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || p != digits.data() + digits.size() || port <= 0 || port > 65535)
      throw ConfigError("malformed DSN: bad port");
    out.port = port;
  }
  return out;
}

std::string redact_dsn(std::string_view dsn) {
  std::string s(dsn);
  auto scheme_end = s.find("://");
  if (scheme_end != std::string::npos) {
    auto auth_start = scheme_end + 3;
    auto auth_end = s.find_first_of("/?", auth_start);
    if (auth_end == std::string::npos) auth_end = s.size();
    auto at = s.rfind('@', auth_end);
    if (at != std::string::npos && at >= auth_start) s.erase(auth_start, at + 1 - auth_start);
  }
  auto q = s.find('?');
  if (q == std::string::npos) return s;
  std::string out = s.substr(0, q);
  char sep = '?';
  for (const auto& kv : text::split(std::string_view(s).substr(q + 1), '&')) {
    if (kv.empty()) continue;
    auto key = kv.substr(0, kv.find('='));
    if (is_secret_param(key)) continue;
    out += sep;
    out += kv;
    sep = '&';
  }
  return out;
}

std::optional<std::string> dsn_from_env(const Dialect& dialect) {
  auto key = fmt::format("POLY_{}_DSN", dialect.env_key());
  if (const char* v = std::getenv(key.c_str()); v && *v) return std::string(v);
  return std::nullopt;
}

std::string namespace_for(std::string_view benchmark, std::string_view db_id, std::size_t max_len) {
  std::string full = sanitize(benchmark) + "__" + sanitize(db_id);
  // Leading digits are invalid in unquoted identifiers; "pg_" is reserved by PostgreSQL.
  if (std::isdigit(static_cast<unsigned char>(full[0])) || full.starts_with("pg_")) full = "n" + full;
  if (full.size() <= max_len) return full;
  auto hash = fmt::format("{:08x}", static_cast<std::uint32_t>(fnv1a(full) & 0xffffffffULL));
  return full.substr(0, max_len - 9) + "_" + hash;
}

}  // namespace poly::adapters
