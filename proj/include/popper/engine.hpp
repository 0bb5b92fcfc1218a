#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "popper/evidence.hpp"

namespace popper::engine {

struct FalsificationTest {
  std::string name;
  std::string description;
  std::string null_sub_hypothesis;
  std::string alternative_sub_hypothesis;
};

struct RelevanceScore {
  double score = 0.0; // in [0,1]
  std::string rationale;
};

enum class ExecStatus { Succeeded, Failed };

struct ExperimentOutcome {
  ExecStatus status = ExecStatus::Failed;
  std::optional<double> p_raw; // present and finite iff Succeeded
  std::string log;
};

enum class Disposition { RelevanceRejected, ExecutionFailed, Aggregated };

// One attempted proposal. disposition=Aggregated iff p and e are both present;
// cumulative_e_after repeats the running product so the ledger replays through
// the evidence core without external state.
struct LedgerEntry {
  int round_index = 0; // 1-based budget round the attempt belongs to
  FalsificationTest test;
  std::optional<RelevanceScore> relevance;
  Disposition disposition = Disposition::Aggregated;
  std::optional<double> p; // clamped p-value
  std::optional<double> e;
  double cumulative_e_after = 1.0;
  bool clamped = false;
};

using Ledger = std::vector<LedgerEntry>;

// What to do when execution still fails after max_exec_retries attempts:
// AggregateP1 records p=1.0 (hence e=kappa<1); Skip records an
// ExecutionFailed entry and aggregates nothing. Both consume the round.
enum class FailedTestPolicy { AggregateP1, Skip };

// EProduct is the anytime-valid e-process. FisherEachRound recomputes
// Fisher's combined p over all aggregated p-values each round and stops when
// it drops to alpha or below; it carries no validity guarantee under optional
// stopping and exists to demonstrate exactly that failure.
enum class Aggregation { EProduct, FisherEachRound };

struct EngineConfig {
  double alpha = 0.1;
  int max_tests = 5;
  int max_exec_retries = 3;        // total execution attempts per test
  int max_relevance_retries = 5;   // proposals per round before giving up
  double relevance_threshold = 0.8;
  evidence::CalibratorConfig calibrator;
  FailedTestPolicy failed_test_policy = FailedTestPolicy::AggregateP1;
  Aggregation aggregation = Aggregation::EProduct;
  bool relevance_failure_consumes_budget = false;
  void validate() const; // throws evidence::ConfigError
};

struct Verdict {
  std::string hypothesis;
  bool validated = false;
  double final_e = 1.0;
  int stopping_index = 0; // number of aggregated tests
  double alpha = 0.1;
  Ledger ledger;
  std::string summary;
  std::optional<Aggregation> aggregation;  // absent when re-parsed from a ledger file
  std::optional<double> fisher_p;          // set under FisherEachRound
};

// Terminal state of run_validation. An aborted run carries the partial ledger
// inside `verdict`; validated is false and no FINAL line is rendered.
struct RunResult {
  bool aborted = false;
  std::string abort_reason;
  Verdict verdict;
};

// Thrown by providers for infrastructure faults (transport errors, exhausted
// script fixtures). Propagates to run_validation's aborted path; never
// converted into a fabricated experiment outcome.
struct ProviderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DesignProvider {
  virtual ~DesignProvider() = default;
  virtual FalsificationTest propose(const std::string& hypothesis, const Ledger& history) = 0;
};

struct RelevanceProvider {
  virtual ~RelevanceProvider() = default;
  virtual RelevanceScore score(const std::string& hypothesis, const FalsificationTest& test) = 0;
};

struct ExecutionProvider {
  virtual ~ExecutionProvider() = default;
  virtual ExperimentOutcome execute(const FalsificationTest& test) = 0;
};

// true iff score.score >= relevance_threshold (inclusive pass).
bool gate_relevance(const RelevanceScore& score, const EngineConfig& cfg);

// Calls executor.execute up to cfg.max_exec_retries times, returning the first
// Succeeded outcome or the final Failed one. ProviderError counts as a failed
// attempt; if the final attempt itself is a ProviderError it is rethrown (the
// run aborts rather than fabricating an outcome).
ExperimentOutcome execute_with_retries(const FalsificationTest& test, ExecutionProvider& executor,
                                       const EngineConfig& cfg);

// Deterministic plain-text report: hypothesis, one block per ledger entry,
// FINAL verdict line (PASS / CONTINUE-EXHAUSTED). Byte-identical for
// identical ledgers.
std::string render_summary(const RunResult& result);
std::string render_summary(const Verdict& verdict);

// The budgeted propose -> gate -> execute -> calibrate -> accumulate -> decide
// loop. Stops immediately on a Reject decision; never calls any provider
// afterwards. Provider faults abort with the partial ledger in the result.
RunResult run_validation(const std::string& hypothesis, DesignProvider& design,
                         RelevanceProvider& relevance, ExecutionProvider& executor,
                         const EngineConfig& cfg);

}  // namespace popper::engine
