#pragma once

// JSON codecs for the core types (nlohmann ADL hooks).

#include "json.hpp"

#include "poly/core/benchmark.hpp"
#include "poly/core/cell.hpp"
#include "poly/core/records.hpp"
#include "poly/core/result_set.hpp"
#include "poly/core/schema.hpp"

namespace poly {

using nlohmann::json;

void to_json(json& j, const Dialect& d);
void from_json(const json& j, Dialect& d);

// Cells encode as null or a [tag, value] pair; floats and decimals travel as
// text so NaN and scale survive.
void to_json(json& j, const Cell& c);
void from_json(const json& j, Cell& c);

void to_json(json& j, const ResultSet& rs);
void from_json(const json& j, ResultSet& rs);

void to_json(json& j, const LogicalType& t);
void from_json(const json& j, LogicalType& t);
void to_json(json& j, const ColumnInfo& c);
void from_json(const json& j, ColumnInfo& c);
void to_json(json& j, const ForeignKey& f);
void from_json(const json& j, ForeignKey& f);
void to_json(json& j, const TableInfo& t);
void from_json(const json& j, TableInfo& t);
void to_json(json& j, const SchemaSnapshot& s);
void from_json(const json& j, SchemaSnapshot& s);

void to_json(json& j, const Example& e);
void from_json(const json& j, Example& e);
void to_json(json& j, const BenchmarkSpec& b);
void from_json(const json& j, BenchmarkSpec& b);

void to_json(json& j, const Prediction& p);
void from_json(const json& j, Prediction& p);
void to_json(json& j, const ExecutionOutcome& o);
void from_json(const json& j, ExecutionOutcome& o);
void to_json(json& j, const Verdict& v);
void from_json(const json& j, Verdict& v);
void to_json(json& j, const OutcomeSummary& s);
void from_json(const json& j, OutcomeSummary& s);
void to_json(json& j, const EvalRecord& r);
void from_json(const json& j, EvalRecord& r);
void to_json(json& j, const EndpointInfo& e);
void from_json(const json& j, EndpointInfo& e);
void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);

}  // namespace poly
