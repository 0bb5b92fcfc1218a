#include "popper/engine.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>

namespace popper::engine {

namespace {

std::string format(const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

}  // namespace

void EngineConfig::validate() const {
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 1.0)
    throw evidence::ConfigError("engine.alpha must lie in (0,1)");
  if (max_tests < 1) throw evidence::ConfigError("engine.max_tests must be >= 1");
  if (max_exec_retries < 1) throw evidence::ConfigError("engine.max_exec_retries must be >= 1");
  if (max_relevance_retries < 1)
    throw evidence::ConfigError("engine.max_relevance_retries must be >= 1");
  if (!std::isfinite(relevance_threshold) || relevance_threshold < 0.0 ||
      relevance_threshold > 1.0)
    throw evidence::ConfigError("engine.relevance_threshold must lie in [0,1]");
  calibrator.validate();
}

bool gate_relevance(const RelevanceScore& score, const EngineConfig& cfg) {
  return score.score >= cfg.relevance_threshold;
}

ExperimentOutcome execute_with_retries(const FalsificationTest& test, ExecutionProvider& executor,
                                       const EngineConfig& cfg) {
  ExperimentOutcome last{};
  for (int attempt = 1; attempt <= cfg.max_exec_retries; ++attempt) {
    try {
      last = executor.execute(test);
    } catch (const ProviderError&) {
      if (attempt == cfg.max_exec_retries) throw;
      last = ExperimentOutcome{ExecStatus::Failed, std::nullopt, "transport failure"};
      continue;
    }
    if (last.status == ExecStatus::Succeeded) return last;
  }
  return last;
}

namespace {

std::string render_summary_impl(const Verdict& v, bool aborted, const std::string& abort_reason) {
  std::string out;
  out += "=== Sequential Falsification Report ===\n";
  out += "HYPOTHESIS: " + v.hypothesis + "\n";
  if (v.aggregation.has_value()) {
    out += v.aggregation == Aggregation::EProduct
               ? "AGGREGATION: e-product\n"
               : "AGGREGATION: fisher-each-round (no anytime validity guarantee)\n";
  }
  out += format("ALPHA: %g\n", v.alpha);
  for (const LedgerEntry& entry : v.ledger) {
    const char* tag = entry.disposition == Disposition::Aggregated      ? "Aggregated"
                      : entry.disposition == Disposition::ExecutionFailed ? "ExecutionFailed"
                                                                          : "RelevanceRejected";
    out += format("ROUND %d [%s] ", entry.round_index, tag) + entry.test.name + "\n";
    if (entry.relevance)
      out += format("  relevance: %g\n", entry.relevance->score);
    if (entry.disposition == Disposition::Aggregated)
      out += format("  p: %.5e  e: %.5e  E: %.5e%s\n", *entry.p, *entry.e,
                    entry.cumulative_e_after, entry.clamped ? "  [clamped]" : "");
  }
  if (v.ledger.empty()) out += "NO TESTS EXECUTED\n";
  if (aborted) {
    out += "RUN ABORTED: " + abort_reason + "\n";
    return out;
  }
  if (v.fisher_p) out += format("FISHER-P: %.5e\n", *v.fisher_p);
  out += format("FINAL: %s E=%.4f tau=%d alpha=%g\n", v.validated ? "PASS" : "CONTINUE-EXHAUSTED",
                v.final_e, v.stopping_index, v.alpha);
  return out;
}

}  // namespace

std::string render_summary(const RunResult& result) {
  return render_summary_impl(result.verdict, result.aborted, result.abort_reason);
}

std::string render_summary(const Verdict& verdict) {
  return render_summary_impl(verdict, false, "");
}

RunResult run_validation(const std::string& hypothesis, DesignProvider& design,
                         RelevanceProvider& relevance, ExecutionProvider& executor,
                         const EngineConfig& cfg) {
  cfg.validate();

  RunResult result;
  Verdict& v = result.verdict;
  v.hypothesis = hypothesis;
  v.alpha = cfg.alpha;
  v.aggregation = cfg.aggregation;

  evidence::EvidenceState state;
  state.alpha = cfg.alpha;
  std::vector<double> aggregated_ps; // inputs for FisherEachRound
  bool rejected = false;
  int rounds_used = 0;

  auto refresh_stop = [&]() {
    if (cfg.aggregation == Aggregation::EProduct) {
      rejected = evidence::decide(state) == evidence::Decision::Reject;
    } else if (!aggregated_ps.empty()) {
      const double fp = evidence::fisher_combine(aggregated_ps).value;
      v.fisher_p = fp;
      rejected = fp <= cfg.alpha;
    }
  };

  // Aggregates one outcome (a clamped p) into state, ledger and stop rule.
  auto aggregate = [&](int round, const FalsificationTest& test, const RelevanceScore& score,
                       const evidence::PValue& p) {
    const evidence::EValue e = evidence::calibrate(p, cfg.calibrator);
    state = evidence::accumulate(state, e);
    aggregated_ps.push_back(p.value);
    LedgerEntry entry;
    entry.round_index = round;
    entry.test = test;
    entry.relevance = score;
    entry.disposition = Disposition::Aggregated;
    entry.p = p.value;
    entry.e = e.value;
    entry.cumulative_e_after = state.cumulative_e;
    entry.clamped = p.clamped;
    v.ledger.push_back(entry);
    refresh_stop();
  };

  try {
    while (!rejected && rounds_used < cfg.max_tests) {
      const int round = rounds_used + 1;

      // Propose until a test passes the relevance gate. Rejected proposals
      // are appended to the ledger; by default they do not touch the budget.
      std::optional<FalsificationTest> test;
      RelevanceScore accepted_score;
      bool budget_consumed_by_rejection = false;
      for (int attempt = 1; attempt <= cfg.max_relevance_retries; ++attempt) {
        FalsificationTest proposal = design.propose(hypothesis, v.ledger);
        RelevanceScore score = relevance.score(hypothesis, proposal);
        if (gate_relevance(score, cfg)) {
          test = std::move(proposal);
          accepted_score = std::move(score);
          break;
        }
        LedgerEntry entry;
        entry.round_index = round;
        entry.test = std::move(proposal);
        entry.relevance = std::move(score);
        entry.disposition = Disposition::RelevanceRejected;
        entry.cumulative_e_after = state.cumulative_e;
        v.ledger.push_back(entry);
        if (cfg.relevance_failure_consumes_budget) {
          // Algorithm-style accounting: the rejection spends the round.
          rounds_used += 1;
          budget_consumed_by_rejection = true;
          break;
        }
      }
      if (budget_consumed_by_rejection) continue;
      if (!test) break; // relevance dead end: verdict from evidence so far

      const ExperimentOutcome outcome = execute_with_retries(*test, executor, cfg);
      if (outcome.status == ExecStatus::Succeeded) {
        rounds_used += 1;
        aggregate(round, *test, accepted_score, evidence::clamp_p(*outcome.p_raw, cfg.calibrator));
      } else if (cfg.failed_test_policy == FailedTestPolicy::AggregateP1) {
        rounds_used += 1;
        aggregate(round, *test, accepted_score, evidence::PValue{1.0, false});
      } else {
        rounds_used += 1;
        LedgerEntry entry;
        entry.round_index = round;
        entry.test = *test;
        entry.relevance = accepted_score;
        entry.disposition = Disposition::ExecutionFailed;
        entry.cumulative_e_after = state.cumulative_e;
        v.ledger.push_back(entry);
      }
    }
  } catch (const ProviderError& err) {
    result.aborted = true;
    result.abort_reason = err.what();
  }

  v.final_e = state.cumulative_e;
  v.stopping_index = state.count;
  v.validated = !result.aborted && rejected;
  v.summary = render_summary(result);
  return result;
}

}  // namespace popper::engine
