#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poly/core/records.hpp"

namespace poly::metrics {

/// Per-example binary outcomes of one (model, dialect), ids strictly
/// increasing.
class VerdictVector {
 public:
  VerdictVector() = default;
  /// Sorts by id; throws Error on duplicate ids.
  explicit VerdictVector(std::vector<std::pair<std::int64_t, bool>> items);
  /// Gold failures are dropped.
  static VerdictVector from_records(const std::vector<EvalRecord>& records, const std::string& model_id,
                                    const Dialect& dialect);

  const std::vector<std::pair<std::int64_t, bool>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<std::pair<std::int64_t, bool>> items_;
};

// Pairs of outcomes over the id intersection.
std::vector<std::pair<bool, bool>> paired(const VerdictVector& a, const VerdictVector& b);

/// 100 * correct / counted, gold failures excluded. Throws UndefinedResult
/// when nothing is counted.
double execution_accuracy(const std::vector<EvalRecord>& records);

struct Table2x2 {
  std::int64_t both = 0;      // a correct, b correct
  std::int64_t only_a = 0;    // a correct, b wrong
  std::int64_t only_b = 0;    // a wrong, b correct
  std::int64_t neither = 0;
  std::int64_t total() const { return both + only_a + only_b + neither; }
};

Table2x2 agreement_table(const VerdictVector& a, const VerdictVector& b);

double cohens_kappa(const Table2x2& t);
double cohens_kappa(const VerdictVector& a, const VerdictVector& b);

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys);
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys);
// Ranks starting at 1, ties get the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& xs);

struct McNemarResult {
  std::int64_t only_a = 0;  // a correct, b wrong
  std::int64_t only_b = 0;
  bool exact = true;
  double p_value = 1.0;
};

// Exact binomial below 25 discordant pairs, continuity-corrected chi-square
// otherwise.
McNemarResult mcnemar_test(std::int64_t only_a, std::int64_t only_b);
McNemarResult mcnemar_test(const VerdictVector& a, const VerdictVector& b);

struct TTestResult {
  double t = 0;
  double p_value = 1.0;
  std::int64_t df = 0;
};

TTestResult paired_t_test(const std::vector<double>& xs, const std::vector<double>& ys);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees.
double student_t_two_sided(double t, double df);

double dialect_robustness(double acc_source, const std::vector<double>& acc_targets);

/// Models x dialects grid of accuracies. Means are always recomputed from
/// the cells present.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  /// Cells indexed [model][dialect]; nullopt marks a missing pair. Rows are
  /// sorted descending by mean, ties by model id.
  AccuracyMatrix(std::vector<std::string> models, std::vector<Dialect> dialects,
                 std::vector<std::vector<std::optional<double>>> cells);

  const std::vector<std::string>& models() const { return models_; }
  const std::vector<Dialect>& dialects() const { return dialects_; }
  const std::optional<double>& cell(std::size_t model, std::size_t dialect) const { return cells_[model][dialect]; }
  std::optional<double> model_mean(std::size_t model) const;
  std::optional<double> dialect_mean(std::size_t dialect) const;
  std::optional<std::size_t> dialect_index(const Dialect& d) const;

 private:
  std::vector<std::string> models_;
  std::vector<Dialect> dialects_;
  std::vector<std::vector<std::optional<double>>> cells_;
};

/// Groups records by (model, dialect). Pairs with only gold failures stay
/// empty.
AccuracyMatrix accuracy_matrix(const std::vector<EvalRecord>& records);

}  // namespace poly::metrics
