#include "poly/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "poly/core/errors.hpp"

namespace poly::metrics {

VerdictVector::VerdictVector(std::vector<std::pair<std::int64_t, bool>> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (std::size_t i = 1; i < items_.size(); ++i)
    if (items_[i].first == items_[i - 1].first) throw Error(fmt::format("duplicate example id {}", items_[i].first));
}

VerdictVector VerdictVector::from_records(const std::vector<EvalRecord>& records, const std::string& model_id,
                                          const Dialect& dialect) {
  std::vector<std::pair<std::int64_t, bool>> items;
  for (const auto& r : records)
    if (r.model_id == model_id && r.dialect == dialect && !is_gold_failure(r.verdict))
      items.emplace_back(r.example_id, is_correct(r.verdict));
  return VerdictVector(std::move(items));
}

std::vector<std::pair<bool, bool>> paired(const VerdictVector& a, const VerdictVector& b) {
  std::vector<std::pair<bool, bool>> out;
  auto i = a.items().begin(), j = b.items().begin();
  while (i != a.items().end() && j != b.items().end()) {
    if (i->first < j->first) ++i;
    else if (j->first < i->first) ++j;
    else {
      out.emplace_back(i->second, j->second);
      ++i;
      ++j;
    }
  }
  return out;
}

double execution_accuracy(const std::vector<EvalRecord>& records) {
  std::int64_t counted = 0, correct = 0;
  for (const auto& r : records) {
    if (is_gold_failure(r.verdict)) continue;
    ++counted;
    correct += is_correct(r.verdict);
  }
  if (counted == 0) throw UndefinedResult("execution accuracy undefined: no countable records");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(counted);
}

Table2x2 agreement_table(const VerdictVector& a, const VerdictVector& b) {
  auto pairs = paired(a, b);
  if (pairs.empty()) throw UndefinedResult("verdict vectors share no example ids");
  Table2x2 t;
  for (auto [x, y] : pairs) {
    if (x && y) ++t.both;
    else if (x) ++t.only_a;
    else if (y) ++t.only_b;
    else ++t.neither;
  }
  return t;
}

double cohens_kappa(const Table2x2& t) {
  const double n = static_cast<double>(t.total());
  if (n == 0) throw UndefinedResult("kappa undefined on an empty table");
  const double po = static_cast<double>(t.both + t.neither) / n;
  const double a_yes = static_cast<double>(t.both + t.only_a) / n;
  const double b_yes = static_cast<double>(t.both + t.only_b) / n;
  const double pe = a_yes * b_yes + (1 - a_yes) * (1 - b_yes);
  if (pe == 1.0) {
    if (po == 1.0) return 1.0;
    throw UndefinedResult("kappa undefined: chance agreement is 1");
  }
  return (po - pe) / (1 - pe);
}

double cohens_kappa(const VerdictVector& a, const VerdictVector& b) { return cohens_kappa(agreement_table(a, b)); }

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw UndefinedResult("correlation needs two equal-length series, n >= 2");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedResult("correlation undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw UndefinedResult("correlation needs two equal-length series, n >= 2");
  return pearson_r(average_ranks(xs), average_ranks(ys));
}

McNemarResult mcnemar_test(std::int64_t only_a, std::int64_t only_b) {
  McNemarResult r{only_a, only_b, true, 1.0};
  const std::int64_t n = only_a + only_b;
  if (n == 0) return r;
  if (n < 25) {
    // 2 * P[X <= k], X ~ Bin(n, 1/2); n < 25 keeps the sum exact in 64 bits.
    const std::int64_t k = std::min(only_a, only_b);
    std::int64_t sum = 0, binom = 1;
    for (std::int64_t i = 0; i <= k; ++i) {
      sum += binom;
      binom = binom * (n - i) / (i + 1);
    }
    const double tail = std::ldexp(static_cast<double>(sum), static_cast<int>(-n));
    r.p_value = std::min(1.0, 2 * tail);
    return r;
  }
  r.exact = false;
  const double d = std::fabs(static_cast<double>(only_a - only_b)) - 1.0;
  const double chi2 = d * d / static_cast<double>(n);
  // Chi-square with one degree of freedom: P = erfc(sqrt(chi2 / 2)).
  r.p_value = std::erfc(std::sqrt(chi2 / 2.0));
  return r;
}

McNemarResult mcnemar_test(const VerdictVector& a, const VerdictVector& b) {
  auto t = agreement_table(a, b);
  return mcnemar_test(t.only_a, t.only_b);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int max_iter = 500;
  constexpr double eps = 1e-16, tiny = 1e-300;
  const double qab = a + b, qap = a + 1, qam = a - 1;
  double c = 1, d = 1 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1) / (a + b + 2)) return front * beta_continued_fraction(a, b, x) / a;
  return 1 - front * beta_continued_fraction(b, a, 1 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (std::isnan(t)) return std::nan("");
  if (std::isinf(t)) return 0;
  // P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  return incomplete_beta(df / 2, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw UndefinedResult("paired t-test needs equal-length series");
  const std::size_t n = xs.size();
  if (n < 2) throw UndefinedResult("paired t-test needs n >= 2");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = xs[i] - ys[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.df = static_cast<std::int64_t>(n - 1);
  if (sd == 0) {
    r.t = mean == 0 ? 0 : std::copysign(INFINITY, mean);
    r.p_value = mean == 0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value = student_t_two_sided(r.t, static_cast<double>(r.df));
  return r;
}

double dialect_robustness(double acc_source, const std::vector<double>& acc_targets) {
  if (acc_source <= 0) throw UndefinedResult("robustness undefined: source accuracy is 0");
  if (acc_targets.empty()) throw UndefinedResult("robustness needs at least one target accuracy");
  const double mean = std::accumulate(acc_targets.begin(), acc_targets.end(), 0.0) / static_cast<double>(acc_targets.size());
  return mean / acc_source;
}

AccuracyMatrix::AccuracyMatrix(std::vector<std::string> models, std::vector<Dialect> dialects,
                               std::vector<std::vector<std::optional<double>>> cells)
    : dialects_(std::move(dialects)) {
  if (cells.size() != models.size()) throw Error("accuracy grid row count differs from model count");
  for (const auto& row : cells) {
    if (row.size() != dialects_.size()) throw Error("accuracy grid row width differs from dialect count");
    for (const auto& c : row)
      if (c && (*c < 0 || *c > 100)) throw Error(fmt::format("accuracy {} outside [0, 100]", *c));
  }
  models_ = std::move(models);
  cells_ = std::move(cells);
  std::vector<std::size_t> order(models_.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::optional<double>> means;
  for (std::size_t i = 0; i < models_.size(); ++i) means.push_back(model_mean(i));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = means[a].value_or(-1), mb = means[b].value_or(-1);
    if (ma != mb) return ma > mb;
    return models_[a] < models_[b];
  });
  std::vector<std::string> m2;
  std::vector<std::vector<std::optional<double>>> c2;
  for (auto i : order) {
    m2.push_back(models_[i]);
    c2.push_back(cells_[i]);
  }
  models_ = std::move(m2);
  cells_ = std::move(c2);
}

std::optional<double> AccuracyMatrix::model_mean(std::size_t model) const {
  double sum = 0;
  int n = 0;
  for (const auto& c : cells_[model])
    if (c) {
      sum += *c;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::optional<double> AccuracyMatrix::dialect_mean(std::size_t dialect) const {
  double sum = 0;
  int n = 0;
  for (const auto& row : cells_)
    if (row[dialect]) {
      sum += *row[dialect];
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::optional<std::size_t> AccuracyMatrix::dialect_index(const Dialect& d) const {
  for (std::size_t i = 0; i < dialects_.size(); ++i)
    if (dialects_[i] == d) return i;
  return std::nullopt;
}

AccuracyMatrix accuracy_matrix(const std::vector<EvalRecord>& records) {
  std::set<std::string> model_set;
  std::set<Dialect> dialect_set;
  std::map<std::pair<std::string, Dialect>, std::vector<EvalRecord>> groups;
  for (const auto& r : records) {
    model_set.insert(r.model_id);
    dialect_set.insert(r.dialect);
    groups[{r.model_id, r.dialect}].push_back(r);
  }
  // Source dialect first, then the rest in id order.
  std::vector<Dialect> dialects(dialect_set.begin(), dialect_set.end());
  std::stable_partition(dialects.begin(), dialects.end(), [](const Dialect& d) { return d == Dialect::sqlite(); });
  std::vector<std::string> models(model_set.begin(), model_set.end());
  std::vector<std::vector<std::optional<double>>> cells(models.size(), std::vector<std::optional<double>>(dialects.size()));
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = 0; j < dialects.size(); ++j) {
      auto it = groups.find({models[i], dialects[j]});
      if (it == groups.end()) continue;
      try {
        cells[i][j] = execution_accuracy(it->second);
      } catch (const UndefinedResult&) {
      }
    }
  return AccuracyMatrix(std::move(models), std::move(dialects), std::move(cells));
}

}  // namespace poly::metrics
