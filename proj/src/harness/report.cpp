#include "poly/harness/report.hpp"

#include <fmt/format.h>

#include <array>
#include <map>
#include <numeric>
#include <set>

#include "poly/core/errors.hpp"
#include "poly/harness/pipeline.hpp"

namespace poly::harness {

namespace {

// RFC 4180 field.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Shortest text that parses back to the same double.
std::string exact(double v) { return fmt::format("{}", v); }
std::string exact(const std::optional<double>& v) { return v ? exact(*v) : ""; }

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

std::string fixed(const std::optional<double>& v, int digits) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string("-");
}

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

struct ModelScores {
  std::optional<double> source;       // source-dialect accuracy
  std::vector<double> targets;        // every other dialect present
  std::optional<double> robustness;
  std::optional<double> drop;         // percentage points
};

}  // namespace

RenderedReport render_report(const ReportInput& in) {
  const auto& m = in.matrix;
  const auto source_col = m.dialect_index(in.source);
  const bool has_targets = m.dialects().size() > (source_col ? 1u : 0u);

  std::vector<ModelScores> scores(m.models().size());
  for (std::size_t i = 0; i < m.models().size(); ++i) {
    auto& s = scores[i];
    for (std::size_t j = 0; j < m.dialects().size(); ++j) {
      if (!m.cell(i, j)) continue;
      if (source_col && j == *source_col)
        s.source = m.cell(i, j);
      else
        s.targets.push_back(*m.cell(i, j));
    }
    if (s.source && !s.targets.empty()) {
      s.drop = *s.source - mean(s.targets);
      try {
        s.robustness = metrics::dialect_robustness(*s.source, s.targets);
      } catch (const UndefinedResult&) {
      }
    }
  }

  RenderedReport r;
  auto& md = r.markdown;
  md += "# Evaluation report\n\n";

  if (in.manifest) {
    const auto& man = *in.manifest;
    std::string dialects, models;
    for (const auto& d : man.dialects) dialects += (dialects.empty() ? "" : ", ") + d.id();
    for (const auto& e : man.endpoints) models += (models.empty() ? "" : ", ") + e.model_id;
    md += "## Run\n\n| Field | Value |\n|---|---|\n";
    md += fmt::format("| Run | {} |\n| Benchmark | {} |\n| Benchmark SHA-256 | {} |\n", md_cell(man.run_id),
                      md_cell(man.benchmark_name), man.benchmark_hash);
    md += fmt::format("| Dialects | {} |\n| Models | {} |\n", md_cell(dialects), md_cell(models));
    md += fmt::format("| Tolerances | rtol {} / atol {} |\n| Query timeout | {} ms |\n| Created | {} |\n\n", man.rtol,
                      man.atol, man.timeout_ms, man.created_at);
  }

  md += "## Execution accuracy (%)\n\n| Model |";
  for (const auto& d : m.dialects()) md += " " + d.id() + " |";
  md += " Avg |\n|---|";
  for (std::size_t j = 0; j <= m.dialects().size(); ++j) md += "---:|";
  md += "\n";
  for (std::size_t i = 0; i < m.models().size(); ++i) {
    md += "| " + md_cell(m.models()[i]) + " |";
    for (std::size_t j = 0; j < m.dialects().size(); ++j) md += " " + fixed(m.cell(i, j), 1) + " |";
    md += " " + fixed(m.model_mean(i), 1) + " |\n";
  }
  md += "| Dialect mean |";
  for (std::size_t j = 0; j < m.dialects().size(); ++j) md += " " + fixed(m.dialect_mean(j), 1) + " |";
  md += " |\n\n";

  md += "## Dialect robustness\n\n";
  if (!source_col || !has_targets) {
    md += fmt::format("> Robustness omitted: the grid has {}.\n\n",
                      !source_col ? fmt::format("no {} baseline column", in.source.id())
                                  : std::string("no target dialect besides the baseline"));
  } else {
    md += fmt::format("| Model | {} | Target mean | Drop (pp) | Robustness |\n|---|---:|---:|---:|---:|\n",
                      in.source.id());
    std::vector<double> drops, sources, targets;
    for (std::size_t i = 0; i < m.models().size(); ++i) {
      const auto& s = scores[i];
      std::optional<double> tmean;
      if (!s.targets.empty()) tmean = mean(s.targets);
      md += fmt::format("| {} | {} | {} | {} | {} |\n", md_cell(m.models()[i]), fixed(s.source, 1), fixed(tmean, 1),
                        fixed(s.drop, 1), fixed(s.robustness, 4));
      if (s.drop) drops.push_back(*s.drop);
      if (s.source) sources.push_back(*s.source);
      targets.insert(targets.end(), s.targets.begin(), s.targets.end());
    }
    md += "\n";
    if (!drops.empty())
      md += fmt::format("Mean of per-model drops: {:.1f} pp.\n", mean(drops));
    if (!sources.empty() && !targets.empty())
      md += fmt::format("Pooled drop: {:.1f} pp ({} mean {:.1f}, mean over all target cells {:.1f}).\n",
                        mean(sources) - mean(targets), in.source.id(), mean(sources), mean(targets));
    md += "\n";
  }

  if (in.gaps) {
    const auto& g = *in.gaps;
    md += fmt::format("## Gap errors\n\n{} classified gap errors.\n\n", g.total);
    md += "| Category | Count | Share (%) | Share without invalid evaluations (%) |\n|---|---:|---:|---:|\n";
    for (auto c : gap::kAllCategories) {
      std::optional<double> det;
      if (auto it = g.determinate.find(c); it != g.determinate.end()) det = it->second;
      md += fmt::format("| {} | {} | {} | {} |\n", gap::to_string(c), g.counts.at(c), fixed(g.percent.at(c), 1),
                        fixed(det, 1));
    }
    md += "\n";
  }

  auto& csv = r.csv;
  csv += "model";
  for (const auto& d : m.dialects()) csv += "," + csv_field(d.id());
  csv += ",avg,robustness\n";
  for (std::size_t i = 0; i < m.models().size(); ++i) {
    csv += csv_field(m.models()[i]);
    for (std::size_t j = 0; j < m.dialects().size(); ++j) csv += "," + exact(m.cell(i, j));
    csv += "," + exact(m.model_mean(i)) + "," + exact(scores[i].robustness) + "\n";
  }
  return r;
}

RenderedReport write_report(const RunDirectory& run) {
  auto records = run.verdicts();
  if (records.empty()) throw RunError(fmt::format("run {} has no verdicts; run `evaluate` first", run.manifest().run_id));
  ReportInput in;
  in.matrix = metrics::accuracy_matrix(records);
  in.source = run.benchmark().source_dialect;
  in.manifest = run.manifest();
  auto classifications = read_classifications(run);
  if (!classifications.empty()) in.gaps = gap::category_distribution(classifications);
  auto rendered = render_report(in);
  write_file_atomic(run.report_md(), rendered.markdown);
  write_file_atomic(run.report_csv(), rendered.csv);
  return rendered;
}

AgreementRow agreement_row(const std::string& label, const std::vector<EvalRecord>& candidate,
                           const std::vector<EvalRecord>& reference) {
  using Key = std::pair<std::string, std::int64_t>;
  auto index = [](const std::vector<EvalRecord>& recs) {
    std::map<Key, bool> out;
    for (const auto& r : recs)
      if (!is_gold_failure(r.verdict)) out.emplace(Key{r.model_id, r.example_id}, is_correct(r.verdict));
    return out;
  };
  auto a = index(candidate);
  auto b = index(reference);

  metrics::Table2x2 t;
  std::map<std::string, std::array<std::int64_t, 3>> per_model;  // n, a correct, b correct
  for (const auto& [k, vb] : b) {
    auto it = a.find(k);
    if (it == a.end()) continue;
    bool va = it->second;
    (va ? (vb ? t.both : t.only_a) : (vb ? t.only_b : t.neither))++;
    auto& pm = per_model[k.first];
    ++pm[0];
    pm[1] += va;
    pm[2] += vb;
  }
  if (t.total() == 0) throw Error(fmt::format("{}: the verdict sets share no (model, example) pairs", label));

  AgreementRow row;
  row.label = label;
  row.pairs = static_cast<std::size_t>(t.total());
  row.models = per_model.size();
  row.coverage = static_cast<double>(t.total()) / static_cast<double>(b.size());
  try {
    row.kappa = metrics::cohens_kappa(t);
  } catch (const UndefinedResult&) {
  }
  if (per_model.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& [model, c] : per_model) {
      xs.push_back(100.0 * static_cast<double>(c[1]) / static_cast<double>(c[0]));
      ys.push_back(100.0 * static_cast<double>(c[2]) / static_cast<double>(c[0]));
    }
    try {
      row.spearman = metrics::spearman_rho(xs, ys);
    } catch (const UndefinedResult&) {
    }
    try {
      row.pearson = metrics::pearson_r(xs, ys);
    } catch (const UndefinedResult&) {
    }
  }
  return row;
}

std::vector<AgreementRow> agreement_report(const std::vector<EvalRecord>& a, const std::vector<EvalRecord>& b) {
  std::map<Dialect, std::vector<EvalRecord>> by_a, by_b;
  for (const auto& r : a) by_a[r.dialect].push_back(r);
  for (const auto& r : b) by_b[r.dialect].push_back(r);
  std::vector<AgreementRow> rows;
  for (const auto& [d, recs] : by_b) {
    const std::vector<EvalRecord>* cand = nullptr;
    if (auto it = by_a.find(d); it != by_a.end())
      cand = &it->second;
    else if (by_a.size() == 1)
      cand = &by_a.begin()->second;
    if (!cand) continue;
    rows.push_back(agreement_row(d.id(), *cand, recs));
  }
  if (rows.empty()) throw Error("the two verdict sets have no dialect in common");
  return rows;
}

RenderedReport render_agreement(const std::vector<AgreementRow>& rows) {
  bool coverage = false;
  for (const auto& r : rows) coverage |= r.coverage.has_value();
  RenderedReport out;
  out.markdown = "| Dialect | Kappa | Spearman | Pearson |";
  out.markdown += coverage ? " Coverage |\n|---|---:|---:|---:|---:|\n" : "\n|---|---:|---:|---:|\n";
  out.csv = "dialect,kappa,spearman,pearson,coverage,pairs,models\n";
  for (const auto& r : rows) {
    out.markdown += fmt::format("| {} | {} | {} | {} |", md_cell(r.label), fixed(r.kappa, 2), fixed(r.spearman, 2),
                                fixed(r.pearson, 2));
    if (coverage) out.markdown += r.coverage ? fmt::format(" {:.1f}% |", 100.0 * *r.coverage) : std::string(" - |");
    out.markdown += "\n";
    out.csv += fmt::format("{},{},{},{},{},{},{}\n", csv_field(r.label), exact(r.kappa), exact(r.spearman),
                           exact(r.pearson), exact(r.coverage), r.pairs, r.models);
  }
  return out;
}

}  // namespace poly::harness
