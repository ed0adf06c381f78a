// polyeval: migrate benchmark databases, generate and evaluate predictions,
// classify gap errors and render reports for one run directory.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <string>

#include "poly/core/errors.hpp"
#include "poly/harness/pipeline.hpp"
#include "poly/harness/prompt.hpp"
#include "poly/harness/report.hpp"

using namespace poly;
using namespace poly::harness;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 done, 1 error, 2 finished but incomplete.
constexpr int kIncomplete = 2;

struct Globals {
  std::string run;
  std::string config;
};

HarnessConfig config_of(const Globals& g) { return g.config.empty() ? HarnessConfig{} : load_config(g.config); }

RunDirectory open_run(const Globals& g, const HarnessConfig& cfg) {
  if (g.run.empty()) throw ConfigError("--run is required");
  return RunDirectory::open_ref(cfg.runs_root, g.run);
}

RunManifest requested_manifest(const Globals& g, const HarnessConfig& cfg, const std::string& benchmark_bytes) {
  RunManifest m;
  m.run_id = g.run;
  m.benchmark_hash = sha256_hex(benchmark_bytes);
  m.rtol = cfg.rtol;
  m.atol = cfg.atol;
  m.timeout_ms = cfg.timeout_ms;
  m.parallelism = cfg.parallelism;
  return m;
}

std::string read_stream(std::istream& in) { return {std::istreambuf_iterator<char>(in), {}}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-dialect text-to-SQL evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--run", g.run, "Run id under the runs root, or a run directory");
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);

  // migrate
  auto* migrate = app.add_subcommand("migrate", "Migrate the benchmark databases into a target dialect");
  std::string bench_file, db_root, format = "spider", bench_name, db_ext = ".sqlite", migrate_dialect;
  migrate->add_option("--benchmark", bench_file, "Benchmark JSON file")->required()->check(CLI::ExistingFile);
  migrate->add_option("--db-root", db_root, "Directory holding <db_id><ext> files")->required()->check(CLI::ExistingDirectory);
  migrate->add_option("--dialect", migrate_dialect, "Target dialect")->required();
  migrate->add_option("--format", format, "spider or bird")->capture_default_str();
  migrate->add_option("--name", bench_name, "Benchmark name (default: file stem)");
  migrate->add_option("--db-ext", db_ext, "Database file extension")->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "Ask a model endpoint for one query per example");
  std::string gen_dialect, gen_model;
  int gen_parallelism = 0;
  generate->add_option("--dialect", gen_dialect, "Target dialect")->required();
  generate->add_option("--model", gen_model, "Endpoint model id from the config")->required();
  generate->add_option("--parallelism", gen_parallelism, "Concurrent requests (default: config)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Dual-execute predictions and record verdicts");
  std::string eval_dialect, eval_model;
  int eval_parallelism = 0;
  evaluate->add_option("--dialect", eval_dialect, "Target dialect")->required();
  evaluate->add_option("--model", eval_model, "Only this model's predictions");
  evaluate->add_option("--parallelism", eval_parallelism, "Concurrent evaluations (default: config)");

  // classify
  auto* classify = app.add_subcommand("classify", "Classify gap errors with a judge");
  std::string judge_name, judge_template;
  gap::ClassifyOptions copts{.retries = 2, .max_in_flight = 4, .judge_template = ""};
  classify->add_option("--judge", judge_name, "'rules' or an endpoint model id")->required();
  classify->add_option("--template", judge_template, "Judge template file")->check(CLI::ExistingFile);
  classify->add_option("--retries", copts.retries, "Extra attempts after a malformed reply")->capture_default_str();
  classify->add_option("--max-in-flight", copts.max_in_flight, "Concurrent judge requests")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Write report.md and report.csv");

  // agreement
  auto* agreement = app.add_subcommand("agreement", "Compare the verdicts of two runs");
  std::string run_a, run_b, agreement_out;
  agreement->add_option("--a", run_a, "Candidate run (e.g. the source-dialect proxy)")->required();
  agreement->add_option("--b", run_b, "Reference run")->required();
  agreement->add_option("--out", agreement_out, "Write <out>.md and <out>.csv");

  // transpile
  auto* transpile = app.add_subcommand("transpile", "Rewrite queries with an external transpiler");
  std::string from, to, plugin;
  transpile->add_option("--from", from, "Source dialect")->required();
  transpile->add_option("--to", to, "Target dialect")->required();
  transpile->add_option("--plugin", plugin, "Command run as <plugin> --from <d> --to <d>")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = config_of(g);

    if (*migrate) {
      auto dialect = Dialect::parse(migrate_dialect);
      std::ifstream in(bench_file, std::ios::binary);
      auto bytes = read_stream(in);
      if (bench_name.empty()) bench_name = fs::path(bench_file).stem().string();
      auto spec = parse_benchmark(bytes, parse_benchmark_format(format), bench_name, db_root, db_ext);
      for (const auto& issue : validate_benchmark(spec, db_root, db_ext)) fmt::print(stderr, "warning: {}\n", issue);
      if (g.run.empty()) throw ConfigError("--run is required");
      auto requested = requested_manifest(g, cfg, bytes);
      std::optional<RunDirectory> run;
      if (fs::exists(cfg.runs_root / g.run / "manifest.json")) {
        run.emplace(RunDirectory::open(cfg.runs_root, g.run));
        run->check_compatible(requested);
      } else {
        run.emplace(RunDirectory::create(cfg.runs_root, requested, spec));
      }
      auto summary = migrate_run(*run, dialect, cfg);
      for (const auto& [db, r] : summary.reports)
        fmt::print("{:<24} {:>10} {:>9.1f} ms  {}\n", db, r.verified() ? "verified" : "MISMATCH", r.elapsed_ms,
                   r.target_namespace);
      for (const auto& [db, msg] : summary.failures) fmt::print("{:<24} {:>10}  {}\n", db, "FAILED", msg);
      if (summary.reports.empty() && summary.failures.empty())
        fmt::print("{} is the source dialect; nothing to migrate\n", dialect.id());
      return summary.all_verified() ? 0 : kIncomplete;
    }

    if (*generate) {
      auto run = open_run(g, cfg);
      GenerateOptions opts;
      opts.parallelism = gen_parallelism > 0 ? gen_parallelism : cfg.parallelism;
      auto s = generate_predictions(run, Dialect::parse(gen_dialect), cfg.endpoint(gen_model), cfg, opts);
      fmt::print("{} predictions: {} existing, {} requested, {} written, {} failed\n", gen_model, s.existing,
                 s.requested, s.written, s.failed);
      if (!s.complete) {
        fmt::print(stderr, "run incomplete: {}\n", s.message);
        return kIncomplete;
      }
      return 0;
    }

    if (*evaluate) {
      auto run = open_run(g, cfg);
      std::optional<std::string> model;
      if (!eval_model.empty()) model = eval_model;
      auto s = run_evaluation(run, Dialect::parse(eval_dialect), cfg, model,
                              eval_parallelism > 0 ? eval_parallelism : cfg.parallelism);
      fmt::print("{} evaluated ({} correct), {} already present, {} errors\n", s.evaluated, s.correct, s.existing,
                 s.errors);
      return 0;
    }

    if (*classify) {
      auto run = open_run(g, cfg);
      copts.judge_template =
          judge_template.empty() ? gap::default_judge_template() : gap::load_judge_template(judge_template);
      std::unique_ptr<gap::Judge> judge;
      if (judge_name == "rules") {
        judge = std::make_unique<gap::RuleJudge>();
      } else {
        const auto& ep = cfg.judge && cfg.judge->model_id == judge_name ? *cfg.judge : cfg.endpoint(judge_name);
        judge = std::make_unique<gap::HttpJudge>(adapters::ChatClient(ep, cfg.request_timeout_ms));
      }
      try {
        auto s = classify_run(run, *judge, copts);
        fmt::print("{} gap errors: {} already classified, {} classified now\n", s.gaps, s.existing, s.classified);
      } catch (const gap::JudgeUnavailable& e) {
        fmt::print(stderr, "run incomplete: {} classified, {} left: {}\n", e.classified.size(), e.unclassified.size(),
                   e.what());
        return kIncomplete;
      }
      return 0;
    }

    if (*report) {
      auto run = open_run(g, cfg);
      auto r = write_report(run);
      std::cout << r.markdown;
      fmt::print(stderr, "wrote {} and {}\n", run.report_md().string(), run.report_csv().string());
      return 0;
    }

    if (*agreement) {
      auto a = RunDirectory::open_ref(cfg.runs_root, run_a);
      auto b = RunDirectory::open_ref(cfg.runs_root, run_b);
      auto rendered = render_agreement(agreement_report(a.verdicts(), b.verdicts()));
      std::cout << rendered.markdown;
      if (!agreement_out.empty()) {
        write_file_atomic(agreement_out + ".md", rendered.markdown);
        write_file_atomic(agreement_out + ".csv", rendered.csv);
      }
      return 0;
    }

    if (*transpile) {
      auto d_from = Dialect::parse(from);
      auto d_to = Dialect::parse(to);
      if (!g.run.empty()) {
        auto run = open_run(g, cfg);
        auto s = transpile_predictions(run, d_from, d_to, plugin);
        fmt::print("{} of {} predictions transpiled (coverage {:.1f}%)\n", s.transpiled, s.total, 100.0 * s.coverage());
        return 0;
      }
      auto r = transpile_external(read_stream(std::cin), d_from, d_to, plugin);
      if (!r.ok) {
        fmt::print(stderr, "transpile failed: {}\n", r.error);
        return 1;
      }
      std::cout << r.sql << "\n";
      return 0;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
