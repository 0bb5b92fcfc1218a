#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "popper/engine.hpp"
#include "popper/evidence.hpp"
#include "popper/ledger_io.hpp"
#include "popper/worlds.hpp"

using namespace popper::engine;
using popper::evidence::CalibratorConfig;
using popper::evidence::ConfigError;
using popper::worlds::Script;
using popper::worlds::ScriptEntry;

namespace {

ScriptEntry ok_entry(double p, const std::string& name = "", double relevance = 1.0) {
  ScriptEntry e;
  e.relevance = relevance;
  e.status = ExecStatus::Succeeded;
  e.p = p;
  e.name = name;
  return e;
}

ScriptEntry rejected_entry(double relevance, const std::string& name = "") {
  ScriptEntry e;
  e.relevance = relevance;
  e.status = ExecStatus::Failed;
  e.name = name;
  return e;
}

ScriptEntry failing_entry(double relevance = 1.0) {
  ScriptEntry e;
  e.relevance = relevance;
  e.status = ExecStatus::Failed;
  return e;
}

RunResult run_script(const Script& script, const EngineConfig& cfg,
                     const std::string& hypothesis = "scripted hypothesis") {
  popper::worlds::ProviderTriple triple = popper::worlds::scripted_provider(script);
  return run_validation(hypothesis, *triple.design, *triple.relevance, *triple.executor, cfg);
}

// Pass-through providers that count calls and record the history size the
// design provider observed on each call.
struct CountingDesign final : DesignProvider {
  DesignProvider& inner;
  int calls = 0;
  std::vector<std::size_t> history_sizes;
  explicit CountingDesign(DesignProvider& d) : inner(d) {}
  FalsificationTest propose(const std::string& h, const Ledger& history) override {
    ++calls;
    history_sizes.push_back(history.size());
    return inner.propose(h, history);
  }
};

struct CountingRelevance final : RelevanceProvider {
  RelevanceProvider& inner;
  int calls = 0;
  explicit CountingRelevance(RelevanceProvider& r) : inner(r) {}
  RelevanceScore score(const std::string& h, const FalsificationTest& t) override {
    ++calls;
    return inner.score(h, t);
  }
};

struct CountingExecutor final : ExecutionProvider {
  ExecutionProvider& inner;
  int calls = 0;
  explicit CountingExecutor(ExecutionProvider& e) : inner(e) {}
  ExperimentOutcome execute(const FalsificationTest& t) override {
    ++calls;
    return inner.execute(t);
  }
};

}  // namespace

TEST_CASE("engine config domain") {
  EngineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EngineConfig{};
  cfg.max_tests = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EngineConfig{};
  cfg.max_exec_retries = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EngineConfig{};
  cfg.relevance_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EngineConfig{};
  cfg.calibrator.kappa = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("relevance gate is inclusive at the threshold") {
  EngineConfig cfg; // threshold 0.8
  CHECK(gate_relevance(RelevanceScore{0.8, ""}, cfg));
  CHECK(gate_relevance(RelevanceScore{1.0, ""}, cfg));
  CHECK_FALSE(gate_relevance(RelevanceScore{0.6, ""}, cfg));
  CHECK_FALSE(gate_relevance(RelevanceScore{0.7999, ""}, cfg));
}

TEST_CASE("four passing tests reproduce the recorded run") {
  Script script{ok_entry(1.0), ok_entry(1.0), ok_entry(0.0942), ok_entry(8.06e-5)};
  const RunResult result = run_script(script, EngineConfig{});
  REQUIRE_FALSE(result.aborted);
  const Verdict& v = result.verdict;
  CHECK(v.validated);
  CHECK(v.final_e == doctest::Approx(22.682297641798968).epsilon(1e-9));
  CHECK(v.stopping_index == 4);
  REQUIRE(v.ledger.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(v.ledger[i].round_index == static_cast<int>(i) + 1);
    CHECK(v.ledger[i].disposition == Disposition::Aggregated);
    REQUIRE(v.ledger[i].relevance.has_value());
    CHECK(v.ledger[i].relevance->score == 1.0);
  }
  CHECK(v.ledger[1].cumulative_e_after == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(v.summary.find("FINAL: PASS E=22.6823 tau=4 alpha=0.1") != std::string::npos);
}

TEST_CASE("relevance rejections retry within the round without spending budget") {
  Script script{
      ok_entry(0.031, "", 0.8),
      rejected_entry(0.6),
      ok_entry(0.1832, "", 0.8),
      rejected_entry(0.6),
      ok_entry(0.028, "", 1.0),
      ok_entry(0.056, "", 0.8),
  };
  const RunResult result = run_script(script, EngineConfig{});
  REQUIRE_FALSE(result.aborted);
  const Verdict& v = result.verdict;
  CHECK(v.validated);
  CHECK(v.final_e == doctest::Approx(20.944182166241685).epsilon(1e-4));
  CHECK(v.stopping_index == 4);
  REQUIRE(v.ledger.size() == 6);
  const std::vector<int> rounds{1, 2, 2, 3, 3, 4};
  const std::vector<Disposition> dispositions{
      Disposition::Aggregated, Disposition::RelevanceRejected, Disposition::Aggregated,
      Disposition::RelevanceRejected, Disposition::Aggregated, Disposition::Aggregated};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(v.ledger[i].round_index == rounds[i]);
    CHECK(v.ledger[i].disposition == dispositions[i]);
  }
  // Rejected proposals carry their score but no p/e, and freeze the product.
  CHECK(v.ledger[1].relevance->score == 0.6);
  CHECK_FALSE(v.ledger[1].p.has_value());
  CHECK_FALSE(v.ledger[1].e.has_value());
  CHECK(v.ledger[1].cumulative_e_after == v.ledger[0].cumulative_e_after);
}

TEST_CASE("early stop with unused budget") {
  Script script{ok_entry(0.0543), ok_entry(1.0), ok_entry(2.81e-13)};
  const RunResult result = run_script(script, EngineConfig{});
  const Verdict& v = result.verdict;
  CHECK(v.validated);
  CHECK(v.stopping_index == 3);
  CHECK(v.final_e == doctest::Approx(1011945.0684107154).epsilon(1e-9));
}

TEST_CASE("budget exhaustion yields CONTINUE-EXHAUSTED") {
  Script script{ok_entry(1.0), ok_entry(1.0), ok_entry(1.0)};
  EngineConfig cfg;
  cfg.max_tests = 3;
  const RunResult result = run_script(script, cfg);
  const Verdict& v = result.verdict;
  CHECK_FALSE(v.validated);
  CHECK(v.final_e == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(v.stopping_index == 3);
  CHECK(v.summary.find("FINAL: CONTINUE-EXHAUSTED E=0.1250 tau=3 alpha=0.1") !=
        std::string::npos);
}

TEST_CASE("budget honesty: exactly max_tests rounds run") {
  Script script{ok_entry(0.9), ok_entry(0.9), ok_entry(0.9), ok_entry(0.9), ok_entry(0.9)};
  EngineConfig cfg;
  cfg.max_tests = 2;
  const RunResult result = run_script(script, cfg);
  CHECK(result.verdict.ledger.size() == 2);
  CHECK(result.verdict.stopping_index == 2);
}

namespace {

struct FlakyExecutor final : ExecutionProvider {
  int calls = 0;
  int succeed_on = 0;        // 0: never succeed
  int throw_on_attempt = 0;  // 0: never throw
  ExperimentOutcome execute(const FalsificationTest&) override {
    ++calls;
    if (calls == throw_on_attempt) throw ProviderError("transport down");
    if (calls == succeed_on) return ExperimentOutcome{ExecStatus::Succeeded, 0.5, "ok"};
    return ExperimentOutcome{ExecStatus::Failed, std::nullopt, "crash"};
  }
};

}  // namespace

TEST_CASE("execute_with_retries attempt accounting") {
  EngineConfig cfg; // max_exec_retries = 3 total attempts
  FalsificationTest test{"t", "d", "n", "a"};

  SUBCASE("success on the final attempt") {
    FlakyExecutor ex;
    ex.succeed_on = 3;
    const ExperimentOutcome out = execute_with_retries(test, ex, cfg);
    CHECK(out.status == ExecStatus::Succeeded);
    CHECK(ex.calls == 3);
  }
  SUBCASE("failure consumes exactly the attempt budget") {
    FlakyExecutor ex;
    const ExperimentOutcome out = execute_with_retries(test, ex, cfg);
    CHECK(out.status == ExecStatus::Failed);
    CHECK(ex.calls == 3);
  }
  SUBCASE("no further calls after an early success") {
    FlakyExecutor ex;
    ex.succeed_on = 1;
    execute_with_retries(test, ex, cfg);
    CHECK(ex.calls == 1);
  }
  SUBCASE("transport fault mid-retry counts as a failed attempt") {
    FlakyExecutor ex;
    ex.throw_on_attempt = 1;
    ex.succeed_on = 2;
    const ExperimentOutcome out = execute_with_retries(test, ex, cfg);
    CHECK(out.status == ExecStatus::Succeeded);
    CHECK(ex.calls == 2);
  }
  SUBCASE("transport fault on the final attempt propagates") {
    FlakyExecutor ex;
    ex.throw_on_attempt = 3;
    CHECK_THROWS_AS(execute_with_retries(test, ex, cfg), ProviderError);
    CHECK(ex.calls == 3);
  }
}

TEST_CASE("failed execution under aggregate_p1 scores the round at p=1") {
  Script script{failing_entry(), ok_entry(0.9)};
  EngineConfig cfg;
  cfg.max_tests = 2;
  const RunResult result = run_script(script, cfg);
  const Verdict& v = result.verdict;
  REQUIRE(v.ledger.size() == 2);
  CHECK(v.ledger[0].disposition == Disposition::Aggregated);
  CHECK(*v.ledger[0].p == 1.0);
  CHECK(*v.ledger[0].e == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(v.stopping_index == 2);
}

TEST_CASE("failed execution under skip aggregates nothing") {
  Script script{failing_entry(), ok_entry(1.0)};
  EngineConfig cfg;
  cfg.max_tests = 2;
  cfg.failed_test_policy = FailedTestPolicy::Skip;
  const RunResult result = run_script(script, cfg);
  const Verdict& v = result.verdict;
  REQUIRE(v.ledger.size() == 2);
  CHECK(v.ledger[0].disposition == Disposition::ExecutionFailed);
  CHECK(v.ledger[0].round_index == 1);
  CHECK_FALSE(v.ledger[0].p.has_value());
  CHECK(v.ledger[0].cumulative_e_after == 1.0);
  CHECK(v.ledger[1].round_index == 2);
  // Only the second round aggregated; the skipped round still spent budget.
  CHECK(v.stopping_index == 1);
  CHECK(v.final_e == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("relevance failure can be configured to spend the round") {
  Script script{rejected_entry(0.5), ok_entry(0.001)};
  EngineConfig cfg;
  cfg.max_tests = 2;
  cfg.relevance_failure_consumes_budget = true;
  const RunResult result = run_script(script, cfg);
  const Verdict& v = result.verdict;
  REQUIRE(v.ledger.size() == 2);
  CHECK(v.ledger[0].disposition == Disposition::RelevanceRejected);
  CHECK(v.ledger[0].round_index == 1);
  CHECK(v.ledger[1].disposition == Disposition::Aggregated);
  CHECK(v.ledger[1].round_index == 2);
  CHECK(v.stopping_index == 1);
  CHECK(v.validated); // 0.5 * 0.001^-0.5 = 15.81 >= 10

  // With one budget round, the rejection exhausts the run outright.
  cfg.max_tests = 1;
  const RunResult tight = run_script(script, cfg);
  CHECK_FALSE(tight.aborted);
  CHECK_FALSE(tight.verdict.validated);
  CHECK(tight.verdict.ledger.size() == 1);
  CHECK(tight.verdict.stopping_index == 0);
}

TEST_CASE("relevance dead end ends the run with a verdict from evidence so far") {
  Script script{rejected_entry(0.1), rejected_entry(0.2), rejected_entry(0.3),
                rejected_entry(0.4), rejected_entry(0.5), ok_entry(0.001)};
  EngineConfig cfg; // max_relevance_retries = 5
  const RunResult result = run_script(script, cfg);
  REQUIRE_FALSE(result.aborted);
  const Verdict& v = result.verdict;
  CHECK_FALSE(v.validated);
  CHECK(v.final_e == 1.0);
  CHECK(v.stopping_index == 0);
  CHECK(v.ledger.size() == 5); // the sixth entry was never proposed
  for (const LedgerEntry& entry : v.ledger) {
    CHECK(entry.disposition == Disposition::RelevanceRejected);
    CHECK(entry.round_index == 1);
  }
  CHECK(v.summary.find("FINAL: CONTINUE-EXHAUSTED E=1.0000 tau=0") != std::string::npos);
}

TEST_CASE("no provider is called after the stop rule fires") {
  Script script{ok_entry(0.001), ok_entry(0.5), ok_entry(0.5)};
  popper::worlds::ProviderTriple triple = popper::worlds::scripted_provider(script);
  CountingDesign design(*triple.design);
  CountingRelevance relevance(*triple.relevance);
  CountingExecutor executor(*triple.executor);
  const RunResult result =
      run_validation("h", design, relevance, executor, EngineConfig{});
  CHECK(result.verdict.validated);
  CHECK(result.verdict.stopping_index == 1);
  CHECK(design.calls == 1);
  CHECK(relevance.calls == 1);
  CHECK(executor.calls == 1);
}

TEST_CASE("design provider always sees the full ledger so far") {
  Script script{ok_entry(0.9, "", 0.8), rejected_entry(0.2), ok_entry(0.9, "", 0.9),
                ok_entry(0.9)};
  EngineConfig cfg;
  cfg.max_tests = 3;
  popper::worlds::ProviderTriple triple = popper::worlds::scripted_provider(script);
  CountingDesign design(*triple.design);
  const RunResult result =
      run_validation("h", design, *triple.relevance, *triple.executor, cfg);
  REQUIRE_FALSE(result.aborted);
  // Calls observe 0, 1 (first aggregate), 2 (plus the rejection), 3 entries.
  CHECK(design.history_sizes == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(design.calls == 4);
}

TEST_CASE("byte-identical reruns for identical scripts") {
  Script script{ok_entry(0.031), rejected_entry(0.6), ok_entry(0.1832), ok_entry(0.056)};
  const RunResult a = run_script(script, EngineConfig{});
  const RunResult b = run_script(script, EngineConfig{});
  CHECK(a.verdict.summary == b.verdict.summary);
  CHECK(popper::io::ledger_file_text(a.verdict) == popper::io::ledger_file_text(b.verdict));
}

TEST_CASE("ledger replays through the evidence core") {
  Script script{ok_entry(0.031), ok_entry(0.1832), failing_entry(), ok_entry(0.056)};
  EngineConfig cfg;
  const RunResult result = run_script(script, cfg);
  popper::evidence::EvidenceState state;
  state.alpha = cfg.alpha;
  for (const LedgerEntry& entry : result.verdict.ledger) {
    if (entry.disposition != Disposition::Aggregated) continue;
    state = popper::evidence::accumulate(
        state, popper::evidence::calibrate(
                   popper::evidence::PValue{*entry.p, entry.clamped}, cfg.calibrator));
    CHECK(state.cumulative_e == doctest::Approx(entry.cumulative_e_after).epsilon(1e-9));
  }
  CHECK(state.cumulative_e == doctest::Approx(result.verdict.final_e).epsilon(1e-9));
  CHECK(state.count == result.verdict.stopping_index);
}

TEST_CASE("clamped p-values are flagged end to end") {
  Script script{ok_entry(0.0)};
  const RunResult result = run_script(script, EngineConfig{});
  const Verdict& v = result.verdict;
  REQUIRE(v.ledger.size() == 1);
  CHECK(v.ledger[0].clamped);
  CHECK(*v.ledger[0].p == 1e-300);
  CHECK(v.validated); // e = 0.5 * 1e150
  CHECK(v.summary.find("[clamped]") != std::string::npos);
}

namespace {

struct ThrowingDesign final : DesignProvider {
  FalsificationTest propose(const std::string&, const Ledger&) override {
    throw ProviderError("design transport down");
  }
};

struct ThrowingRelevance final : RelevanceProvider {
  RelevanceScore score(const std::string&, const FalsificationTest&) override {
    throw ProviderError("relevance transport down");
  }
};

struct ThrowingExecutor final : ExecutionProvider {
  ExperimentOutcome execute(const FalsificationTest&) override {
    throw ProviderError("executor transport down");
  }
};

struct OneTestDesign final : DesignProvider {
  FalsificationTest propose(const std::string&, const Ledger&) override {
    return FalsificationTest{"t", "d", "n", "a"};
  }
};

struct FullRelevance final : RelevanceProvider {
  RelevanceScore score(const std::string&, const FalsificationTest&) override {
    return RelevanceScore{1.0, "always"};
  }
};

}  // namespace

TEST_CASE("provider faults abort the run with the partial ledger") {
  EngineConfig cfg;

  SUBCASE("design fault aborts before any entry") {
    ThrowingDesign design;
    FullRelevance relevance;
    ThrowingExecutor executor;
    const RunResult result = run_validation("h", design, relevance, executor, cfg);
    CHECK(result.aborted);
    CHECK(result.abort_reason == "design transport down");
    CHECK(result.verdict.ledger.empty());
    CHECK_FALSE(result.verdict.validated);
    CHECK(result.verdict.summary.find("RUN ABORTED: design transport down") !=
          std::string::npos);
    CHECK(result.verdict.summary.find("NO TESTS EXECUTED") != std::string::npos);
    CHECK(result.verdict.summary.find("FINAL:") == std::string::npos);
  }
  SUBCASE("relevance fault aborts immediately") {
    OneTestDesign design;
    ThrowingRelevance relevance;
    ThrowingExecutor executor;
    const RunResult result = run_validation("h", design, relevance, executor, cfg);
    CHECK(result.aborted);
    CHECK(result.abort_reason == "relevance transport down");
    CHECK(result.verdict.ledger.empty());
  }
  SUBCASE("persistent executor fault aborts after the retry budget") {
    Script script{ok_entry(0.5)};
    popper::worlds::ProviderTriple triple = popper::worlds::scripted_provider(script);
    // First round aggregates normally; the second round's executor dies.
    struct SecondRoundThrows final : ExecutionProvider {
      ExecutionProvider& inner;
      int round_calls = 0;
      explicit SecondRoundThrows(ExecutionProvider& e) : inner(e) {}
      ExperimentOutcome execute(const FalsificationTest& t) override {
        if (++round_calls == 1) return inner.execute(t);
        throw ProviderError("executor transport down");
      }
    };
    struct LoopingDesign final : DesignProvider {
      int n = 0;
      FalsificationTest propose(const std::string&, const Ledger&) override {
        ++n;
        return FalsificationTest{"t" + std::to_string(n), "d", "n", "a"};
      }
    };
    LoopingDesign design;
    FullRelevance relevance;
    SecondRoundThrows executor(*triple.executor);
    const RunResult result = run_validation("h", design, relevance, executor, cfg);
    CHECK(result.aborted);
    CHECK(result.abort_reason == "executor transport down");
    REQUIRE(result.verdict.ledger.size() == 1);
    CHECK(result.verdict.ledger[0].disposition == Disposition::Aggregated);
    CHECK_FALSE(result.verdict.validated);
    // All three retry attempts of round 2 threw, then the engine gave up.
    CHECK(executor.round_calls == 1 + cfg.max_exec_retries);
  }
  SUBCASE("script exhaustion aborts mid-run") {
    Script script{ok_entry(0.5)};
    const RunResult result = run_script(script, cfg);
    CHECK(result.aborted);
    CHECK(result.abort_reason.find("script exhausted") != std::string::npos);
    CHECK(result.verdict.ledger.size() == 1);
  }
}

TEST_CASE("fisher-each-round aggregation stops on the combined p") {
  Script script{ok_entry(0.3), ok_entry(0.01), ok_entry(0.9)};
  EngineConfig cfg;
  cfg.aggregation = Aggregation::FisherEachRound;
  const RunResult result = run_script(script, cfg);
  REQUIRE_FALSE(result.aborted);
  const Verdict& v = result.verdict;
  CHECK(v.validated);
  CHECK(v.stopping_index == 2);
  REQUIRE(v.fisher_p.has_value());
  CHECK(*v.fisher_p ==
        doctest::Approx(popper::evidence::fisher_combine({0.3, 0.01}).value).epsilon(1e-12));
  CHECK(*v.fisher_p <= cfg.alpha);
  CHECK(v.summary.find("FISHER-P:") != std::string::npos);
  CHECK(v.summary.find("fisher-each-round") != std::string::npos);

  // The e-process would not have stopped here; the ledger still records it.
  CHECK(v.final_e < 1.0 / cfg.alpha);
}

TEST_CASE("summary of an empty verdict") {
  Verdict v;
  v.hypothesis = "h";
  const std::string text = render_summary(v);
  CHECK(text.find("NO TESTS EXECUTED") != std::string::npos);
  CHECK(text.find("FINAL: CONTINUE-EXHAUSTED E=1.0000 tau=0") != std::string::npos);
  // Parsed ledgers carry no aggregation hint and render without that header.
  CHECK(text.find("AGGREGATION") == std::string::npos);
}
