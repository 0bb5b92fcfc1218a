#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "popper/engine.hpp"
#include "popper/worlds.hpp"

namespace popper::mc {

// One sweep axis: vary a single plan parameter over these values, everything
// else (including seeds: common random numbers) held fixed.
struct SweepSpec {
  std::string parameter; // alpha | max_tests | beta_a | kappa | aggregation
  std::vector<std::variant<double, std::string>> values;
};

struct ExperimentPlan {
  worlds::WorldModel world; // world.seed is unused here; streams come from base_seed
  engine::EngineConfig engine;
  int replicates = 10000;
  std::uint64_t base_seed = 0;
  std::vector<SweepSpec> sweep;
  void validate() const; // throws evidence::ConfigError
};

struct RateEstimate {
  double rate = 0.0;
  int replicates = 0;
  double ci_low = 0.0;  // 95% Wilson interval
  double ci_high = 0.0;
  double mean_runtime_ms = 0.0;
};

struct SweepRow {
  std::string world;
  std::string parameter; // empty for the plain (non-sweep) estimate
  std::string value;
  RateEstimate estimate;
};

// 95% Wilson score interval for successes/n.
std::pair<double, double> wilson_interval(int successes, int n);

// One engine run of the plan's world at (seed, stream_id). Exposed so tests
// and the acceptance suite can inspect ledgers replicate by replicate.
engine::RunResult run_replicate(const worlds::WorldModel& world, const engine::EngineConfig& cfg,
                                std::uint64_t seed, std::uint64_t stream_id);

// Rejection frequency over stream_ids 0..replicates-1, parallel across
// hardware threads; the estimate is deterministic given base_seed
// (mean_runtime_ms is wall-clock metadata and is not).
RateEstimate estimate_rate(const ExperimentPlan& plan);

// Copy of the plan with one parameter replaced; throws evidence::ConfigError
// for unknown parameters or out-of-domain values.
ExperimentPlan apply_sweep_value(const ExperimentPlan& plan, const std::string& parameter,
                                 const std::variant<double, std::string>& value);

// One row per sweep value (plus nothing else); plans without a sweep get a
// single row with empty parameter/value.
std::vector<SweepRow> sweep(const ExperimentPlan& plan);

// Grand mean of every aggregated e-value across replicates of a null world.
// Validity contract is one-sided: mean <= 1 + 3 MC standard errors.
double mean_evalue_check(const worlds::WorldModel& world, const engine::EngineConfig& cfg,
                         int replicates, std::uint64_t base_seed = 0);

// CSV with header (world,parameter,value,rate,ci_low,ci_high,replicates,mean_runtime_ms).
std::string rows_to_csv(const std::vector<SweepRow>& rows);

// JSON report mirroring the plan plus all estimates.
std::string report_json(const ExperimentPlan& plan, const std::vector<SweepRow>& rows);

// Built-in pass/fail assertion lines for a finished sweep: Type-I bounds on
// null worlds, Fisher-inflation contrast for FisherEachRound plans, power
// monotonicity for budget sweeps on alternative worlds, plain POWER lines
// otherwise.
struct AssertionLine {
  std::string text;
  bool failed = false; // informational lines never fail
};
std::vector<AssertionLine> builtin_assertions(const ExperimentPlan& plan,
                                              const std::vector<SweepRow>& rows);

}  // namespace popper::mc
