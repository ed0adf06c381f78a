#include "poly/harness/run.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <memory>
#include <set>
#include <sstream>

#include "poly/adapters/dsn.hpp"
#include "poly/core/codec.hpp"
#include "poly/core/errors.hpp"
#include "poly/harness/prompt.hpp"

namespace poly::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw RunError(fmt::format("cannot read {}", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T typed(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config key '{}' has the wrong type", key));
  }
}

EndpointInfo parse_endpoint(const json& j, const char* where) {
  if (!j.is_object() || !j.contains("model_id")) throw ConfigError(fmt::format("{}: endpoint needs a model_id", where));
  static const std::set<std::string> keys{"model_id", "base_url", "model", "api_key_env", "max_tokens"};
  for (const auto& [k, _] : j.items())
    if (!keys.count(k)) throw ConfigError(fmt::format("{}: unknown endpoint key '{}'", where, k));
  try {
    auto e = j.get<EndpointInfo>();
    if (e.base_url.empty()) throw ConfigError(fmt::format("{}: endpoint {} has no base_url", where, e.model_id));
    if (e.max_tokens <= 0) throw ConfigError(fmt::format("{}: endpoint {} needs max_tokens > 0", where, e.model_id));
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(fmt::format("{}: malformed endpoint: {}", where, ex.what()));
  }
}

}  // namespace

const EndpointInfo& HarnessConfig::endpoint(std::string_view model_id) const {
  for (const auto& e : endpoints)
    if (e.model_id == model_id) return e;
  throw ConfigError(fmt::format("no endpoint configured for model '{}'", model_id));
}

cmp::ComparatorConfig HarnessConfig::comparator() const {
  cmp::ComparatorConfig c;
  c.rtol = rtol;
  c.atol = atol;
  return c;
}

fs::path HarnessConfig::data() const { return data_dir.empty() ? default_data_dir() : data_dir; }

HarnessConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> keys{"endpoints", "judge", "dsn_env", "comparator", "timeout_ms",
                                          "request_timeout_ms", "parallelism", "runs_root", "data_dir"};
  for (const auto& [k, _] : j.items())
    if (!keys.count(k)) throw ConfigError(fmt::format("unknown config key '{}'", k));

  HarnessConfig c;
  if (auto it = j.find("endpoints"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("config key 'endpoints' must be an array");
    std::set<std::string> seen;
    for (const auto& e : *it) {
      c.endpoints.push_back(parse_endpoint(e, "endpoints"));
      if (!seen.insert(c.endpoints.back().model_id).second)
        throw ConfigError(fmt::format("endpoint '{}' is listed twice", c.endpoints.back().model_id));
    }
  }
  if (auto it = j.find("judge"); it != j.end()) c.judge = parse_endpoint(*it, "judge");
  if (auto it = j.find("dsn_env"); it != j.end()) {
    auto raw = typed<std::map<std::string, std::string>>(j, "dsn_env", {});
    for (const auto& [d, var] : raw) c.dsn_env[Dialect::parse(d).id()] = var;
  }
  if (auto it = j.find("comparator"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key 'comparator' must be an object");
    for (const auto& [k, _] : it->items())
      if (k != "rtol" && k != "atol") throw ConfigError(fmt::format("unknown comparator key '{}'", k));
    c.rtol = typed(*it, "rtol", c.rtol);
    c.atol = typed(*it, "atol", c.atol);
  }
  c.timeout_ms = typed(j, "timeout_ms", c.timeout_ms);
  c.request_timeout_ms = typed(j, "request_timeout_ms", c.request_timeout_ms);
  c.parallelism = typed(j, "parallelism", c.parallelism);
  c.runs_root = typed<std::string>(j, "runs_root", c.runs_root.string());
  c.data_dir = typed<std::string>(j, "data_dir", "");

  if (c.rtol < 0 || c.atol < 0) throw ConfigError("tolerances must be non-negative");
  if (c.timeout_ms <= 0 || c.request_timeout_ms <= 0) throw ConfigError("timeouts must be positive");
  if (c.parallelism <= 0) throw ConfigError("parallelism must be positive");
  return c;
}

HarnessConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", file.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config {} is not valid JSON: {}", file.string(), e.what()));
  }
  auto c = parse_config(j);
  // Relative paths in the file are relative to the file.
  auto base = file.parent_path();
  if (c.runs_root.is_relative() && j.contains("runs_root")) c.runs_root = base / c.runs_root;
  if (!c.data_dir.empty() && c.data_dir.is_relative()) c.data_dir = base / c.data_dir;
  return c;
}

std::string resolve_dsn(const Dialect& dialect, const HarnessConfig& config) {
  auto it = config.dsn_env.find(dialect.id());
  std::string var = it != config.dsn_env.end() ? it->second : "POLY_" + dialect.env_key() + "_DSN";
  const char* value = std::getenv(var.c_str());
  if (!value || !*value)
    throw ConfigError(fmt::format("no DSN for dialect {}: set the environment variable {}", dialect.id(), var));
  return value;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) throw Error("sha256 failed");
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

JsonlWriter::JsonlWriter(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  if (fs::exists(file)) {
    auto content = read_all(file);
    if (!content.empty() && content.back() != '\n') {
      auto keep = content.rfind('\n');
      fs::resize_file(file, keep == std::string::npos ? 0 : keep + 1);
    }
  }
  out_.open(file, std::ios::app | std::ios::binary);
  if (!out_) throw RunError(fmt::format("cannot append to {}", file.string()));
}

void JsonlWriter::append(const json& line) {
  auto text = line.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  std::lock_guard lock(mu_);
  out_.write(text.data(), static_cast<std::streamsize>(text.size()));
  out_.flush();
  if (!out_) throw RunError("write to JSON-lines file failed");
}

std::vector<json> read_jsonl(const fs::path& file) {
  std::vector<json> out;
  if (!fs::exists(file)) return out;
  auto content = read_all(file);
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) break;  // torn final line
    auto line = std::string_view(content).substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(fmt::format("{} line {}: {}", file.string(), line_no, e.what()));
    }
  }
  return out;
}

void write_file_atomic(const fs::path& file, std::string_view content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw RunError(fmt::format("cannot write {}", tmp.string()));
  }
  fs::rename(tmp, file);
}

RunDirectory::RunDirectory(fs::path dir, RunManifest manifest, BenchmarkSpec benchmark)
    : dir_(std::move(dir)), manifest_(std::move(manifest)), benchmark_(std::move(benchmark)) {}

RunDirectory RunDirectory::create(const fs::path& runs_root, RunManifest manifest, const BenchmarkSpec& benchmark) {
  if (manifest.run_id.empty() || manifest.run_id.find('/') != std::string::npos || manifest.run_id == "." ||
      manifest.run_id == "..")
    throw ConfigError(fmt::format("invalid run id '{}'", manifest.run_id));
  auto dir = runs_root / manifest.run_id;
  if (fs::exists(dir / "manifest.json")) throw RunError(fmt::format("run {} already exists", dir.string()));
  fs::create_directories(dir);
  if (manifest.created_at.empty()) manifest.created_at = utc_now();
  manifest.benchmark_name = benchmark.name;
  RunDirectory run(dir, std::move(manifest), benchmark);
  write_file_atomic(run.benchmark_file(), json(benchmark).dump(2) + "\n");
  run.save_manifest();
  return run;
}

RunDirectory RunDirectory::open(const fs::path& runs_root, const std::string& run_id) {
  return open_ref(runs_root, run_id);
}

RunDirectory RunDirectory::open_ref(const fs::path& runs_root, const std::string& ref) {
  fs::path dir = runs_root / ref;
  if (!fs::exists(dir / "manifest.json") && fs::exists(fs::path(ref) / "manifest.json")) dir = ref;
  if (!fs::exists(dir / "manifest.json"))
    throw RunError(fmt::format("no run '{}' under {} (run `migrate` first to create it)", ref, runs_root.string()));
  try {
    auto manifest = json::parse(read_all(dir / "manifest.json")).get<RunManifest>();
    auto benchmark = json::parse(read_all(dir / "benchmark.json")).get<BenchmarkSpec>();
    return RunDirectory(dir, std::move(manifest), std::move(benchmark));
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("run {} is corrupt: {}", dir.string(), e.what()));
  }
}

void RunDirectory::check_compatible(const RunManifest& requested) const {
  std::vector<std::string> diffs;
  if (requested.rtol != manifest_.rtol) diffs.push_back(fmt::format("rtol {} vs {}", manifest_.rtol, requested.rtol));
  if (requested.atol != manifest_.atol) diffs.push_back(fmt::format("atol {} vs {}", manifest_.atol, requested.atol));
  if (requested.timeout_ms != manifest_.timeout_ms)
    diffs.push_back(fmt::format("timeout_ms {} vs {}", manifest_.timeout_ms, requested.timeout_ms));
  if (!requested.benchmark_hash.empty() && requested.benchmark_hash != manifest_.benchmark_hash)
    diffs.push_back("benchmark file content");
  if (!diffs.empty()) {
    std::string list;
    for (const auto& d : diffs) list += (list.empty() ? "" : "; ") + d;
    throw ConfigError(fmt::format("run {} was created with different settings (frozen vs requested: {})",
                                  manifest_.run_id, list));
  }
}

void RunDirectory::add_dialect(const Dialect& dialect) {
  for (const auto& d : manifest_.dialects)
    if (d == dialect) return;
  manifest_.dialects.push_back(dialect);
  save_manifest();
}

void RunDirectory::add_endpoint(const EndpointInfo& endpoint) {
  for (const auto& e : manifest_.endpoints) {
    if (e.model_id != endpoint.model_id) continue;
    if (e == endpoint) return;
    throw ConfigError(fmt::format("endpoint {} changed since the run started", endpoint.model_id));
  }
  manifest_.endpoints.push_back(endpoint);
  save_manifest();
}

fs::path RunDirectory::migration_report(const Dialect& dialect, const std::string& db_id) const {
  return dir_ / "migration" / dialect.id() / (db_id + ".json");
}

std::vector<Prediction> RunDirectory::predictions() const {
  std::vector<Prediction> out;
  for (const auto& j : read_jsonl(predictions_file())) out.push_back(j.get<Prediction>());
  return out;
}

std::vector<EvalRecord> RunDirectory::verdicts() const {
  std::vector<EvalRecord> out;
  for (const auto& j : read_jsonl(verdicts_file()))
    if (!j.contains("error")) out.push_back(j.get<EvalRecord>());
  return out;
}

std::vector<EvalFailure> RunDirectory::eval_failures() const {
  std::vector<EvalFailure> out;
  for (const auto& j : read_jsonl(verdicts_file()))
    if (j.contains("error"))
      out.push_back({j.at("example_id").get<std::int64_t>(), j.at("model_id").get<std::string>(),
                     j.at("dialect").get<Dialect>(), j.at("error").get<std::string>()});
  return out;
}

json RunDirectory::status() const {
  if (!fs::exists(status_file())) return json::object();
  return json::parse(read_all(status_file()));
}

void RunDirectory::set_status(const std::string& stage, const std::string& key, const json& value) {
  auto s = status();
  s[stage][key] = value;
  write_file_atomic(status_file(), s.dump(2) + "\n");
}

void RunDirectory::save_manifest() const { write_file_atomic(manifest_file(), json(manifest_).dump(2) + "\n"); }

}  // namespace poly::harness
