#include "poly/comparator/evaluate.hpp"

namespace poly::cmp {

Evaluation evaluate_example(const Example& example, const Prediction& prediction, Executor& source, Executor& target,
                            const ComparatorConfig& cfg, std::int64_t timeout_ms, const std::string& run_id) {
  Evaluation ev;
  ev.gold = source.execute(example.gold_sql, timeout_ms);
  if (prediction.extraction_error)
    ev.pred = EngineErrorOutcome{ErrorKind::Syntax, "no SQL extracted: " + *prediction.extraction_error};
  else
    ev.pred = target.execute(prediction.sql, timeout_ms);

  EvalRecord& r = ev.record;
  r.example_id = example.id;
  r.model_id = prediction.model_id;
  r.dialect = prediction.dialect;
  r.pred_sql = prediction.sql;
  r.run_id = run_id;
  r.gold = OutcomeSummary::of(ev.gold);
  r.pred = OutcomeSummary::of(ev.pred);

  if (const auto* err = std::get_if<EngineErrorOutcome>(&ev.gold)) {
    r.verdict = GoldFailure{std::string("gold ") + to_string(err->kind) + " error: " + err->message};
  } else if (const auto* to = std::get_if<TimeoutOutcome>(&ev.gold)) {
    r.verdict = GoldFailure{"gold timed out after " + std::to_string(to->limit_ms) + " ms"};
  } else if (const auto* err = std::get_if<EngineErrorOutcome>(&ev.pred)) {
    r.verdict = Incorrect{IncorrectReason::PredError, err->message};
  } else if (const auto* to = std::get_if<TimeoutOutcome>(&ev.pred)) {
    r.verdict = Incorrect{IncorrectReason::PredTimeout, "timed out after " + std::to_string(to->limit_ms) + " ms"};
  } else {
    auto res = compare(std::get<OkOutcome>(ev.gold).result, std::get<OkOutcome>(ev.pred).result, example.gold_sql, cfg);
    if (res.equal)
      r.verdict = Correct{};
    else
      r.verdict = Incorrect{IncorrectReason::ResultMismatch, res.reason};
  }
  return ev;
}

}  // namespace poly::cmp
