#include "poly/core/records.hpp"

#include "poly/core/errors.hpp"

namespace poly {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::Semantic: return "semantic";
    case ErrorKind::Constraint: return "constraint";
    case ErrorKind::Connection: return "connection";
    case ErrorKind::Other: return "other";
  }
  return "other";
}

ErrorKind parse_error_kind(std::string_view s) {
  for (auto k : {ErrorKind::Syntax, ErrorKind::Semantic, ErrorKind::Constraint, ErrorKind::Connection, ErrorKind::Other})
    if (s == to_string(k)) return k;
  throw ParseError("unknown error kind '" + std::string(s) + "'");
}

const char* to_string(IncorrectReason r) {
  switch (r) {
    case IncorrectReason::ResultMismatch: return "result_mismatch";
    case IncorrectReason::PredError: return "pred_error";
    case IncorrectReason::PredTimeout: return "pred_timeout";
  }
  return "result_mismatch";
}

OutcomeSummary OutcomeSummary::of(const ExecutionOutcome& o) {
  OutcomeSummary s;
  if (const auto* ok = std::get_if<OkOutcome>(&o)) {
    s.status = "ok";
    s.rows = static_cast<std::int64_t>(ok->result.row_count());
    s.cols = static_cast<std::int64_t>(ok->result.column_count());
    s.elapsed_ms = ok->elapsed_ms;
  } else if (const auto* err = std::get_if<EngineErrorOutcome>(&o)) {
    s.status = "error";
    s.error_kind = err->kind;
    s.message = err->message;
  } else {
    s.status = "timeout";
    s.limit_ms = std::get<TimeoutOutcome>(o).limit_ms;
  }
  return s;
}

}  // namespace poly
