#pragma once

#include <optional>
#include <string>
#include <vector>

#include "poly/core/records.hpp"
#include "poly/gapscope/gapscope.hpp"
#include "poly/harness/run.hpp"
#include "poly/metrics/metrics.hpp"

namespace poly::harness {

struct ReportInput {
  metrics::AccuracyMatrix matrix;
  Dialect source = Dialect::sqlite();
  std::optional<gap::CategoryDistribution> gaps;
  std::optional<RunManifest> manifest;
};

struct RenderedReport {
  std::string markdown;
  std::string csv;
};

/// Accuracy grid with per-model means, robustness scores and drops,
/// per-dialect means, gap distribution and manifest summary. Robustness is
/// omitted with a notice when the grid lacks the source dialect.
RenderedReport render_report(const ReportInput& input);

/// Renders the run from verdicts.jsonl and gap_classifications.jsonl into
/// report.md and report.csv. Throws RunError when there are no verdicts.
RenderedReport write_report(const RunDirectory& run);

/// Agreement of one evaluation route with a reference over shared
/// (model, example) pairs.
struct AgreementRow {
  std::string label;
  std::optional<double> kappa;     // absent when chance agreement is total
  std::optional<double> spearman;  // absent with fewer than two models
  std::optional<double> pearson;
  std::optional<double> coverage;  // shared pairs / reference pairs
  std::size_t pairs = 0;
  std::size_t models = 0;
};

/// κ over pooled per-query verdicts; ρ and r over per-model accuracies.
/// Gold failures on either side are left out. Throws Error when the grids
/// share nothing.
AgreementRow agreement_row(const std::string& label, const std::vector<EvalRecord>& candidate,
                           const std::vector<EvalRecord>& reference);

/// Rows per dialect of `b`, paired with the same dialect of `a`, or with
/// a's only dialect when it has one (the proxy setting).
std::vector<AgreementRow> agreement_report(const std::vector<EvalRecord>& a, const std::vector<EvalRecord>& b);

RenderedReport render_agreement(const std::vector<AgreementRow>& rows);

}  // namespace poly::harness
