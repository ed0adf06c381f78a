#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "poly/comparator/comparator.hpp"
#include "poly/core/benchmark.hpp"
#include "poly/core/records.hpp"

namespace poly::cmp {

/// Anything that can run one statement and report an outcome. Connection
/// pools implement this; tests can use lambdas.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual ExecutionOutcome execute(std::string_view sql, std::int64_t timeout_ms) = 0;
};

struct Evaluation {
  EvalRecord record;
  ExecutionOutcome gold;
  ExecutionOutcome pred;
};

/// Dual execution: gold on `source`, prediction on `target`.
Evaluation evaluate_example(const Example& example, const Prediction& prediction, Executor& source, Executor& target,
                            const ComparatorConfig& cfg, std::int64_t timeout_ms, const std::string& run_id = "");

}  // namespace poly::cmp
