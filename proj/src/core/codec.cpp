#include "poly/core/codec.hpp"

#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly {

void to_json(json& j, const Dialect& d) { j = d.id(); }
void from_json(const json& j, Dialect& d) { d = Dialect::parse(j.get<std::string>()); }

void to_json(json& j, const Cell& c) {
  switch (c.kind()) {
    case CellKind::Null: j = nullptr; return;
    case CellKind::Int: j = json::array({"int", c.as_int()}); return;
    case CellKind::Float: j = json::array({"float", text::format_double(c.as_float())}); return;
    case CellKind::Decimal: j = json::array({"decimal", c.as_decimal().to_string()}); return;
    case CellKind::Text: j = json::array({"text", c.as_text()}); return;
    case CellKind::Bool: j = json::array({"bool", c.as_bool()}); return;
    case CellKind::Date: j = json::array({"date", format_date(c.as_date())}); return;
    case CellKind::Timestamp: j = json::array({"timestamp", c.as_timestamp().micros()}); return;
    case CellKind::Bytes: j = json::array({"bytes", text::hex_encode(c.as_bytes().octets)}); return;
  }
}

void from_json(const json& j, Cell& c) {
  if (j.is_null()) {
    c = Cell::null();
    return;
  }
  if (!j.is_array() || j.size() != 2 || !j[0].is_string()) throw ParseError("bad cell encoding: " + j.dump());
  const auto tag = j[0].get<std::string>();
  const auto& v = j[1];
  if (tag == "int") c = Cell::integer(v.get<std::int64_t>());
  else if (tag == "float") c = Cell::floating(text::parse_double(v.get<std::string>()));
  else if (tag == "decimal") c = Cell::decimal(Decimal::parse(v.get<std::string>()));
  else if (tag == "text") c = Cell::text(v.get<std::string>());
  else if (tag == "bool") c = Cell::boolean(v.get<bool>());
  else if (tag == "date") {
    auto d = parse_iso_date(v.get<std::string>());
    if (!d) throw ParseError("bad date " + v.dump());
    c = Cell::date(*d);
  } else if (tag == "timestamp") c = Cell::timestamp(Timestamp::from_micros(v.get<std::int64_t>()));
  else if (tag == "bytes") c = Cell::bytes(text::hex_decode(v.get<std::string>()));
  else throw ParseError("unknown cell tag '" + tag + "'");
}

void to_json(json& j, const ResultSet& rs) { j = json{{"columns", rs.columns()}, {"rows", rs.rows()}}; }
void from_json(const json& j, ResultSet& rs) {
  rs = ResultSet(j.at("columns").get<std::vector<std::string>>(), j.at("rows").get<std::vector<Row>>());
}

void to_json(json& j, const LogicalType& t) {
  j = json{{"kind", to_string(t.kind)}, {"nullable", t.nullable}};
  if (t.kind == TypeKind::Decimal) {
    j["precision"] = t.precision;
    j["scale"] = t.scale;
  }
}
void from_json(const json& j, LogicalType& t) {
  t.kind = parse_type_kind(j.at("kind").get<std::string>());
  t.nullable = j.value("nullable", true);
  t.precision = j.value("precision", 0);
  t.scale = j.value("scale", 0);
  if (t.kind == TypeKind::Decimal && (t.scale < 0 || t.precision < t.scale))
    throw SchemaError("decimal needs precision >= scale >= 0");
}

void to_json(json& j, const ColumnInfo& c) {
  j = json{{"name", c.name}, {"type", c.type}, {"declared_type", c.declared_type}};
}
void from_json(const json& j, ColumnInfo& c) {
  c.name = j.at("name").get<std::string>();
  c.type = j.at("type").get<LogicalType>();
  c.declared_type = j.value("declared_type", "");
}

void to_json(json& j, const ForeignKey& f) {
  j = json{{"columns", f.columns}, {"ref_table", f.ref_table}, {"ref_columns", f.ref_columns}};
}
void from_json(const json& j, ForeignKey& f) {
  f.columns = j.at("columns").get<std::vector<std::string>>();
  f.ref_table = j.at("ref_table").get<std::string>();
  f.ref_columns = j.at("ref_columns").get<std::vector<std::string>>();
}

void to_json(json& j, const TableInfo& t) {
  j = json{{"name", t.name}, {"columns", t.columns}, {"foreign_keys", t.foreign_keys}};
  j["primary_key"] = t.primary_key ? json(*t.primary_key) : json(nullptr);
}
void from_json(const json& j, TableInfo& t) {
  t.name = j.at("name").get<std::string>();
  t.columns = j.at("columns").get<std::vector<ColumnInfo>>();
  t.foreign_keys = j.value("foreign_keys", std::vector<ForeignKey>{});
  if (auto it = j.find("primary_key"); it != j.end() && !it->is_null())
    t.primary_key = it->get<std::vector<std::string>>();
  else
    t.primary_key.reset();
}

void to_json(json& j, const SchemaSnapshot& s) { j = json{{"tables", s.tables}, {"row_counts", s.row_counts}}; }
void from_json(const json& j, SchemaSnapshot& s) {
  s.tables = j.at("tables").get<std::vector<TableInfo>>();
  s.row_counts = j.at("row_counts").get<std::map<std::string, std::int64_t>>();
}

void to_json(json& j, const Example& e) {
  j = json{{"id", e.id}, {"question", e.question}, {"gold_sql", e.gold_sql}, {"db_id", e.db_id}};
  j["evidence"] = e.evidence ? json(*e.evidence) : json(nullptr);
}
void from_json(const json& j, Example& e) {
  e.id = j.at("id").get<std::int64_t>();
  e.question = j.at("question").get<std::string>();
  e.gold_sql = j.at("gold_sql").get<std::string>();
  e.db_id = j.at("db_id").get<std::string>();
  if (auto it = j.find("evidence"); it != j.end() && !it->is_null())
    e.evidence = it->get<std::string>();
  else
    e.evidence.reset();
}

void to_json(json& j, const BenchmarkSpec& b) {
  json reg = json::object();
  for (const auto& [k, v] : b.db_registry) reg[k] = v.string();
  j = json{{"name", b.name}, {"source_dialect", b.source_dialect}, {"examples", b.examples}, {"db_registry", reg}};
}
void from_json(const json& j, BenchmarkSpec& b) {
  b.name = j.at("name").get<std::string>();
  b.source_dialect = j.at("source_dialect").get<Dialect>();
  b.examples = j.at("examples").get<std::vector<Example>>();
  b.db_registry.clear();
  for (const auto& [k, v] : j.at("db_registry").items()) b.db_registry.emplace(k, v.get<std::string>());
}

void to_json(json& j, const Prediction& p) {
  j = json{{"example_id", p.example_id}, {"model_id", p.model_id}, {"dialect", p.dialect},
           {"sql", p.sql},               {"raw_completion", p.raw_completion}, {"latency_ms", p.latency_ms}};
  if (p.extraction_error) j["extraction_error"] = *p.extraction_error;
}
void from_json(const json& j, Prediction& p) {
  p.example_id = j.at("example_id").get<std::int64_t>();
  p.model_id = j.at("model_id").get<std::string>();
  p.dialect = j.at("dialect").get<Dialect>();
  p.sql = j.at("sql").get<std::string>();
  p.raw_completion = j.value("raw_completion", "");
  p.latency_ms = j.value("latency_ms", 0.0);
  if (auto it = j.find("extraction_error"); it != j.end() && it->is_string())
    p.extraction_error = it->get<std::string>();
  else
    p.extraction_error.reset();
}

void to_json(json& j, const ExecutionOutcome& o) {
  if (const auto* ok = std::get_if<OkOutcome>(&o)) {
    j = json{{"status", "ok"}, {"result", ok->result}, {"elapsed_ms", ok->elapsed_ms}};
  } else if (const auto* err = std::get_if<EngineErrorOutcome>(&o)) {
    j = json{{"status", "error"}, {"kind", to_string(err->kind)}, {"message", err->message}};
  } else {
    j = json{{"status", "timeout"}, {"limit_ms", std::get<TimeoutOutcome>(o).limit_ms}};
  }
}
void from_json(const json& j, ExecutionOutcome& o) {
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") o = OkOutcome{j.at("result").get<ResultSet>(), j.value("elapsed_ms", 0.0)};
  else if (status == "error")
    o = EngineErrorOutcome{parse_error_kind(j.at("kind").get<std::string>()), j.at("message").get<std::string>()};
  else if (status == "timeout") o = TimeoutOutcome{j.at("limit_ms").get<std::int64_t>()};
  else throw ParseError("unknown outcome status '" + status + "'");
}

void to_json(json& j, const Verdict& v) {
  if (std::holds_alternative<Correct>(v)) {
    j = json{{"verdict", "correct"}};
  } else if (const auto* inc = std::get_if<Incorrect>(&v)) {
    j = json{{"verdict", "incorrect"}, {"reason", to_string(inc->reason)}, {"detail", inc->detail}};
  } else {
    j = json{{"verdict", "gold_failure"}, {"message", std::get<GoldFailure>(v).message}};
  }
}
void from_json(const json& j, Verdict& v) {
  const auto tag = j.at("verdict").get<std::string>();
  if (tag == "correct") {
    v = Correct{};
  } else if (tag == "incorrect") {
    const auto r = j.at("reason").get<std::string>();
    IncorrectReason reason;
    if (r == "result_mismatch") reason = IncorrectReason::ResultMismatch;
    else if (r == "pred_error") reason = IncorrectReason::PredError;
    else if (r == "pred_timeout") reason = IncorrectReason::PredTimeout;
    else throw ParseError("unknown incorrect reason '" + r + "'");
    v = Incorrect{reason, j.value("detail", "")};
  } else if (tag == "gold_failure") {
    v = GoldFailure{j.value("message", "")};
  } else {
    throw ParseError("unknown verdict '" + tag + "'");
  }
}

void to_json(json& j, const OutcomeSummary& s) {
  j = json{{"status", s.status}};
  if (s.status == "ok") {
    j["rows"] = s.rows;
    j["cols"] = s.cols;
    j["elapsed_ms"] = s.elapsed_ms;
  } else if (s.status == "error") {
    j["kind"] = s.error_kind ? to_string(*s.error_kind) : "other";
    j["message"] = s.message;
  } else {
    j["limit_ms"] = s.limit_ms;
  }
}
void from_json(const json& j, OutcomeSummary& s) {
  s = OutcomeSummary{};
  s.status = j.at("status").get<std::string>();
  s.rows = j.value("rows", std::int64_t{0});
  s.cols = j.value("cols", std::int64_t{0});
  s.elapsed_ms = j.value("elapsed_ms", 0.0);
  if (auto it = j.find("kind"); it != j.end()) s.error_kind = parse_error_kind(it->get<std::string>());
  s.message = j.value("message", "");
  s.limit_ms = j.value("limit_ms", std::int64_t{0});
}

void to_json(json& j, const EvalRecord& r) {
  j = json{{"example_id", r.example_id}, {"model_id", r.model_id}, {"dialect", r.dialect},
           {"pred_sql", r.pred_sql},     {"gold", r.gold},         {"pred", r.pred},
           {"verdict", r.verdict},       {"run_id", r.run_id}};
}
void from_json(const json& j, EvalRecord& r) {
  r.example_id = j.at("example_id").get<std::int64_t>();
  r.model_id = j.at("model_id").get<std::string>();
  r.dialect = j.at("dialect").get<Dialect>();
  r.pred_sql = j.value("pred_sql", "");
  r.gold = j.at("gold").get<OutcomeSummary>();
  r.pred = j.at("pred").get<OutcomeSummary>();
  r.verdict = j.at("verdict").get<Verdict>();
  r.run_id = j.value("run_id", "");
}

void to_json(json& j, const EndpointInfo& e) {
  j = json{{"model_id", e.model_id}, {"base_url", e.base_url}, {"model", e.model},
           {"api_key_env", e.api_key_env}, {"max_tokens", e.max_tokens}};
}
void from_json(const json& j, EndpointInfo& e) {
  e.model_id = j.at("model_id").get<std::string>();
  e.base_url = j.value("base_url", "");
  e.model = j.value("model", e.model_id);
  e.api_key_env = j.value("api_key_env", "");
  e.max_tokens = j.value("max_tokens", 1024);
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"run_id", m.run_id},
           {"benchmark", {{"name", m.benchmark_name}, {"sha256", m.benchmark_hash}}},
           {"dialects", m.dialects},
           {"endpoints", m.endpoints},
           {"comparator", {{"rtol", m.rtol}, {"atol", m.atol}}},
           {"timeout_ms", m.timeout_ms},
           {"parallelism", m.parallelism},
           {"created_at", m.created_at}};
}
void from_json(const json& j, RunManifest& m) {
  m.run_id = j.at("run_id").get<std::string>();
  m.benchmark_name = j.at("benchmark").at("name").get<std::string>();
  m.benchmark_hash = j.at("benchmark").at("sha256").get<std::string>();
  m.dialects = j.at("dialects").get<std::vector<Dialect>>();
  m.endpoints = j.value("endpoints", std::vector<EndpointInfo>{});
  m.rtol = j.at("comparator").at("rtol").get<double>();
  m.atol = j.at("comparator").at("atol").get<double>();
  m.timeout_ms = j.at("timeout_ms").get<std::int64_t>();
  m.parallelism = j.at("parallelism").get<int>();
  m.created_at = j.value("created_at", "");
}

}  // namespace poly
