#include "poly/harness/pipeline.hpp"

#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <memory>
#include <set>
#include <thread>
#include <tuple>

#include "poly/adapters/pool.hpp"
#include "poly/comparator/evaluate.hpp"
#include "poly/core/codec.hpp"
#include "poly/core/errors.hpp"
#include "poly/harness/prompt.hpp"

namespace poly::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Runs `body(i)` for i in [0, n) on at most `width` threads. The first
// exception stops the remaining work and is rethrown after the join.
template <typename Body>
void parallel_for(std::size_t n, int width, Body body) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; !stop && (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        stop = true;
      }
    }
  };
  auto threads_needed = std::min<std::size_t>(static_cast<std::size_t>(std::max(width, 1)), std::max<std::size_t>(n, 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < threads_needed; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

const fs::path& source_file(const RunDirectory& run, const std::string& db_id) {
  auto it = run.benchmark().db_registry.find(db_id);
  if (it == run.benchmark().db_registry.end())
    throw RunError(fmt::format("database {} is not in the benchmark registry", db_id));
  return it->second;
}

bool is_source(const RunDirectory& run, const Dialect& dialect) { return dialect == run.benchmark().source_dialect; }

migration::MigrationReport verified_report(const RunDirectory& run, const Dialect& dialect, const std::string& db_id) {
  auto file = run.migration_report(dialect, db_id);
  if (!fs::exists(file))
    throw RunError(fmt::format("database {} is not migrated to {}; run `migrate --dialect {}` first", db_id,
                               dialect.id(), dialect.id()));
  auto report = migration::read_report(file);
  if (!report.verified())
    throw RunError(fmt::format("migration of database {} to {} failed verification; see {}", db_id, dialect.id(),
                               file.string()));
  return report;
}

SchemaSnapshot infer_source(const RunDirectory& run, const std::string& db_id) {
  const auto& file = source_file(run, db_id);
  return migration::infer_logical_types(file, migration::introspect_schema(file));
}

using Key = std::tuple<std::string, std::string, std::int64_t>;  // model, dialect, example

}  // namespace

migration::MigrationSummary migrate_run(RunDirectory& run, const Dialect& dialect, const HarnessConfig& config) {
  run.add_dialect(dialect);
  if (is_source(run, dialect)) return {};
  migration::MigrationConfig mc;
  mc.target_dsn = resolve_dsn(dialect, config);
  mc.parallelism = static_cast<std::size_t>(config.parallelism);
  auto summary = migration::migrate(run.benchmark(), dialect, mc);
  for (const auto& [db, report] : summary.reports) migration::write_report(run.migration_report(dialect, db), report);
  json failures = json::object();
  for (const auto& [db, msg] : summary.failures) {
    failures[db] = msg;
    // A stale report from an earlier attempt must not pass for verified.
    fs::remove(run.migration_report(dialect, db));
  }
  run.set_status("migration", dialect.id(),
                 {{"databases", summary.reports.size() + summary.failures.size()},
                  {"verified", summary.all_verified()},
                  {"failures", failures}});
  return summary;
}

SchemaSnapshot run_schema(const RunDirectory& run, const Dialect& dialect, const std::string& db_id) {
  if (is_source(run, dialect)) return infer_source(run, db_id);
  return verified_report(run, dialect, db_id).snapshot;
}

std::string prompt_ddl(const RunDirectory& run, const Dialect& dialect, const std::string& db_id) {
  return migration::render_target_ddl(run_schema(run, dialect, db_id), dialect, migration::TypeMappingTable::defaults(),
                                      migration::DdlMode::Prompt);
}

GenerationSummary generate_predictions(RunDirectory& run, const Dialect& dialect, const EndpointInfo& endpoint,
                                       const HarnessConfig& config, const GenerateOptions& options) {
  const auto& bench = run.benchmark();
  GenerationSummary s;
  s.expected = bench.examples.size();

  std::set<std::int64_t> done;
  for (const auto& p : run.predictions())
    if (p.model_id == endpoint.model_id && p.dialect == dialect) done.insert(p.example_id);
  std::vector<const Example*> pending;
  for (const auto& e : bench.examples) {
    if (done.count(e.id))
      ++s.existing;
    else
      pending.push_back(&e);
  }
  const auto status_key = endpoint.model_id + "/" + dialect.id();
  if (pending.empty()) {
    s.complete = true;
    run.set_status("generation", status_key, {{"complete", true}, {"predicted", s.existing}, {"expected", s.expected}});
    return s;
  }

  // Preconditions first: schemas, prompt data and credentials.
  std::map<std::string, std::string> ddl;
  for (const auto* e : pending)
    if (!ddl.count(e->db_id)) ddl[e->db_id] = prompt_ddl(run, dialect, e->db_id);
  auto guidelines = load_guidelines(dialect, config.data());
  auto header = load_prompt_header(config.data());
  adapters::ChatClient client(endpoint, config.request_timeout_ms, options.retry);
  run.add_dialect(dialect);
  run.add_endpoint(endpoint);

  JsonlWriter writer(run.predictions_file());
  std::atomic<bool> abort{false};
  std::atomic<std::size_t> requested{0}, written{0}, failed{0};
  std::mutex mu;
  std::string first_failure;

  parallel_for(pending.size(), options.parallelism, [&](std::size_t i) {
    if (abort) return;
    const auto& ex = *pending[i];
    auto prompt = build_prompt(ex, ddl.at(ex.db_id), guidelines, header);
    Prediction p;
    p.example_id = ex.id;
    p.model_id = endpoint.model_id;
    p.dialect = dialect;
    ++requested;
    auto t0 = std::chrono::steady_clock::now();
    try {
      auto reply = client.complete({.system = prompt.system, .user = prompt.user, .json_object = false});
      p.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      p.raw_completion = reply.content;
    } catch (const adapters::ChatError& e) {
      ++failed;
      std::lock_guard lock(mu);
      if (first_failure.empty()) first_failure = fmt::format("example {}: {}", ex.id, e.what());
      // Anything but a transient fault repeats on every request.
      if (!e.transient()) abort = true;
      return;
    }
    try {
      p.sql = extract_sql(p.raw_completion);
    } catch (const ExtractionError& e) {
      p.extraction_error = e.what();
    }
    writer.append(json(p));
    ++written;
  });

  s.requested = requested;
  s.written = written;
  s.failed = failed;
  s.complete = s.existing + s.written == s.expected;
  s.message = first_failure;
  json st{{"complete", s.complete}, {"predicted", s.existing + s.written}, {"expected", s.expected}};
  if (!s.complete) st["error"] = s.message;
  run.set_status("generation", status_key, st);
  return s;
}

EvaluationSummary run_evaluation(RunDirectory& run, const Dialect& dialect, const HarnessConfig& config,
                                 const std::optional<std::string>& model, int parallelism) {
  const auto& bench = run.benchmark();
  EvaluationSummary s;

  std::set<Key> done;
  for (const auto& r : run.verdicts()) done.emplace(r.model_id, r.dialect.id(), r.example_id);
  for (const auto& f : run.eval_failures()) done.emplace(f.model_id, f.dialect.id(), f.example_id);

  std::vector<Prediction> pending;
  std::vector<Prediction> unknown;
  std::set<Key> queued;
  for (auto& p : run.predictions()) {
    if (p.dialect != dialect || (model && p.model_id != *model)) continue;
    Key k{p.model_id, p.dialect.id(), p.example_id};
    if (done.count(k)) {
      ++s.existing;
      continue;
    }
    if (!queued.insert(k).second) continue;
    (bench.find(p.example_id) ? pending : unknown).push_back(std::move(p));
  }

  // Refuse before executing anything when a touched database is not ready.
  struct Env {
    std::shared_ptr<adapters::Pool> source, target;
  };
  std::map<std::string, Env> envs;
  std::map<std::string, std::pair<std::shared_ptr<const SchemaSnapshot>, std::string>> ready;  // snapshot, namespace
  for (const auto& p : pending) {
    const auto& db = bench.find(p.example_id)->db_id;
    if (ready.count(db)) continue;
    if (is_source(run, dialect)) {
      source_file(run, db);
      ready[db] = {std::make_shared<const SchemaSnapshot>(infer_source(run, db)), ""};
    } else {
      auto report = verified_report(run, dialect, db);
      ready[db] = {std::make_shared<const SchemaSnapshot>(report.snapshot), report.target_namespace};
    }
  }
  auto width = static_cast<std::size_t>(std::max(parallelism, 1));
  std::string target_dsn = ready.empty() || is_source(run, dialect) ? "" : resolve_dsn(dialect, config);
  for (const auto& [db, info] : ready) {
    const auto& [snap, ns] = info;
    auto src_dsn = "sqlite:" + source_file(run, db).string();
    adapters::ConnectOptions src_opts{.ns = "", .read_only = true, .type_hints = snap,
                                      .default_timeout_ms = config.timeout_ms};
    Env env;
    env.source = adapters::connect(bench.source_dialect, src_dsn, width, src_opts);
    env.target = is_source(run, dialect)
                     ? adapters::connect(dialect, src_dsn, width, src_opts)
                     : adapters::connect(dialect, target_dsn, width,
                                         {.ns = ns, .read_only = true, .type_hints = snap,
                                          .default_timeout_ms = config.timeout_ms});
    envs.emplace(db, std::move(env));
  }

  JsonlWriter writer(run.verdicts_file());
  for (const auto& p : unknown) {
    writer.append({{"example_id", p.example_id},
                   {"model_id", p.model_id},
                   {"dialect", p.dialect},
                   {"run_id", run.manifest().run_id},
                   {"error", fmt::format("unknown example id {}", p.example_id)}});
    ++s.errors;
  }

  const auto cfg = run_comparator(run);
  const auto timeout = run.manifest().timeout_ms;
  std::atomic<std::size_t> evaluated{0}, correct{0};
  parallel_for(pending.size(), parallelism, [&](std::size_t i) {
    const auto& p = pending[i];
    const auto& ex = *bench.find(p.example_id);
    auto& env = envs.at(ex.db_id);
    auto ev = cmp::evaluate_example(ex, p, *env.source, *env.target, cfg, timeout, run.manifest().run_id);
    writer.append(json(ev.record));
    ++evaluated;
    if (is_correct(ev.record.verdict)) ++correct;
  });
  s.evaluated = evaluated;
  s.correct = correct;
  run.set_status("evaluation", dialect.id() + (model ? "/" + *model : ""),
                 {{"evaluated", s.evaluated + s.existing}, {"errors", s.errors}});
  return s;
}

cmp::ComparatorConfig run_comparator(const RunDirectory& run) {
  cmp::ComparatorConfig c;
  c.rtol = run.manifest().rtol;
  c.atol = run.manifest().atol;
  return c;
}

std::vector<gap::Classification> read_classifications(const RunDirectory& run) {
  std::vector<gap::Classification> out;
  for (const auto& j : read_jsonl(run.classifications_file())) out.push_back(j.get<gap::Classification>());
  return out;
}

ClassificationSummary classify_run(RunDirectory& run, gap::Judge& judge, const gap::ClassifyOptions& options) {
  const auto& bench = run.benchmark();
  auto records = run.verdicts();
  std::vector<EvalRecord> source;
  std::map<Dialect, std::vector<EvalRecord>> targets;
  for (auto& r : records) {
    if (r.dialect == bench.source_dialect)
      source.push_back(std::move(r));
    else
      targets[r.dialect].push_back(std::move(r));
  }

  std::vector<gap::GapError> gaps;
  for (const auto& [dialect, recs] : targets) {
    std::map<std::string, std::string> cache;
    auto schema_for = [&, d = dialect](const std::string& db) -> std::string {
      auto it = cache.find(db);
      if (it == cache.end()) it = cache.emplace(db, prompt_ddl(run, d, db)).first;
      return it->second;
    };
    auto found = gap::extract_gap_errors(source, recs, bench, schema_for);
    gaps.insert(gaps.end(), found.begin(), found.end());
  }

  ClassificationSummary s;
  s.gaps = gaps.size();
  std::set<Key> done;
  for (const auto& c : read_classifications(run)) done.emplace(c.model_id, c.dialect.id(), c.question_id);
  std::vector<gap::GapError> pending;
  for (auto& g : gaps) {
    if (done.count(Key{g.model_id, g.dialect.id(), g.example_id}))
      ++s.existing;
    else
      pending.push_back(std::move(g));
  }
  if (pending.empty()) return s;

  JsonlWriter writer(run.classifications_file());
  try {
    auto out = gap::classify_gap_errors(pending, judge, options);
    for (const auto& c : out) writer.append(json(c));
    s.classified = out.size();
  } catch (const gap::JudgeUnavailable& e) {
    for (const auto& c : e.classified) writer.append(json(c));
    throw;
  }
  return s;
}

}  // namespace poly::harness
