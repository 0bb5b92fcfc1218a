#include "popper/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "popper/config.hpp"

namespace popper::mc {

using evidence::ConfigError;

void ExperimentPlan::validate() const {
  world.validate();
  engine.validate();
  if (replicates < 1) throw ConfigError("plan.replicates must be >= 1");
  for (const SweepSpec& spec : sweep) {
    if (spec.values.empty())
      throw ConfigError("sweep over \"" + spec.parameter + "\" has no values");
    for (const auto& value : spec.values)
      apply_sweep_value(*this, spec.parameter, value); // domain check, result discarded
  }
}

std::pair<double, double> wilson_interval(int successes, int n) {
  if (n <= 0) throw std::invalid_argument("wilson_interval: n must be positive");
  constexpr double z = 1.959963984540054; // 97.5% normal quantile
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

engine::RunResult run_replicate(const worlds::WorldModel& world, const engine::EngineConfig& cfg,
                                std::uint64_t seed, std::uint64_t stream_id) {
  worlds::ProviderTriple triple = worlds::make_world_provider(world, seed, stream_id);
  return engine::run_validation(std::string("synthetic:") + worlds::world_kind_name(world.kind),
                                *triple.design, *triple.relevance, *triple.executor, cfg);
}

namespace {

// Runs fn(stream_id) for ids 0..n-1 across hardware threads; rethrows the
// first worker exception after joining.
template <typename Fn>
void parallel_for_streams(int n, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(n));
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto body = [&]() {
    try {
      for (int r = next.fetch_add(1); r < n; r = next.fetch_add(1)) fn(r);
    } catch (...) {
      std::scoped_lock lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      next.store(n); // stop handing out work
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

RateEstimate estimate_rate(const ExperimentPlan& plan) {
  plan.validate();
  const int n = plan.replicates;
  std::atomic<int> rejected{0};
  std::atomic<long long> runtime_ns{0};

  parallel_for_streams(n, [&](int r) {
    const auto t0 = std::chrono::steady_clock::now();
    engine::RunResult result =
        run_replicate(plan.world, plan.engine, plan.base_seed, static_cast<std::uint64_t>(r));
    const auto t1 = std::chrono::steady_clock::now();
    runtime_ns.fetch_add(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    if (result.aborted)
      throw ConfigError("replicate " + std::to_string(r) + " aborted: " + result.abort_reason);
    if (result.verdict.validated) rejected.fetch_add(1);
  });

  RateEstimate est;
  est.replicates = n;
  est.rate = static_cast<double>(rejected.load()) / static_cast<double>(n);
  const auto [lo, hi] = wilson_interval(rejected.load(), n);
  est.ci_low = lo;
  est.ci_high = hi;
  est.mean_runtime_ms = static_cast<double>(runtime_ns.load()) / 1e6 / static_cast<double>(n);
  return est;
}

ExperimentPlan apply_sweep_value(const ExperimentPlan& plan, const std::string& parameter,
                                 const std::variant<double, std::string>& value) {
  ExperimentPlan out = plan;
  out.sweep.clear();
  const bool is_number = std::holds_alternative<double>(value);
  const double number = is_number ? std::get<double>(value) : 0.0;
  if (parameter == "alpha") {
    if (!is_number) throw ConfigError("sweep alpha values must be numeric");
    out.engine.alpha = number;
  } else if (parameter == "max_tests") {
    if (!is_number || number != std::floor(number))
      throw ConfigError("sweep max_tests values must be integers");
    out.engine.max_tests = static_cast<int>(number);
  } else if (parameter == "beta_a") {
    if (!is_number) throw ConfigError("sweep beta_a values must be numeric");
    out.world.beta_a = number;
    if (out.world.kind != worlds::WorldKind::AlternativeBeta)
      throw ConfigError("beta_a sweep requires an alternative_beta world");
  } else if (parameter == "kappa") {
    if (!is_number) throw ConfigError("sweep kappa values must be numeric");
    out.engine.calibrator.kappa = number;
  } else if (parameter == "aggregation") {
    if (is_number) throw ConfigError("sweep aggregation values must be strings");
    out.engine.aggregation = io::aggregation_from_name(std::get<std::string>(value));
  } else {
    throw ConfigError("unknown sweep parameter: " + parameter);
  }
  out.world.validate();
  out.engine.validate();
  return out;
}

namespace {

std::string value_to_string(const std::variant<double, std::string>& value) {
  if (std::holds_alternative<std::string>(value)) return std::get<std::string>(value);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", std::get<double>(value));
  return buf;
}

}  // namespace

std::vector<SweepRow> sweep(const ExperimentPlan& plan) {
  plan.validate();
  std::vector<SweepRow> rows;
  if (plan.sweep.empty()) {
    rows.push_back(SweepRow{worlds::world_kind_name(plan.world.kind), "", "",
                            estimate_rate(plan)});
    return rows;
  }
  for (const SweepSpec& spec : plan.sweep) {
    for (const auto& value : spec.values) {
      const ExperimentPlan varied = apply_sweep_value(plan, spec.parameter, value);
      rows.push_back(SweepRow{worlds::world_kind_name(varied.world.kind), spec.parameter,
                              value_to_string(value), estimate_rate(varied)});
    }
  }
  return rows;
}

double mean_evalue_check(const worlds::WorldModel& world, const engine::EngineConfig& cfg,
                         int replicates, std::uint64_t base_seed) {
  if (replicates < 1) throw ConfigError("mean_evalue_check: replicates must be >= 1");
  std::mutex mu;
  double sum = 0.0;
  long long count = 0;
  parallel_for_streams(replicates, [&](int r) {
    engine::RunResult result =
        run_replicate(world, cfg, base_seed, static_cast<std::uint64_t>(r));
    if (result.aborted)
      throw ConfigError("replicate " + std::to_string(r) + " aborted: " + result.abort_reason);
    double local = 0.0;
    long long local_n = 0;
    for (const engine::LedgerEntry& entry : result.verdict.ledger)
      if (entry.e) {
        local += *entry.e;
        local_n += 1;
      }
    std::scoped_lock lock(mu);
    sum += local;
    count += local_n;
  });
  if (count == 0) throw ConfigError("mean_evalue_check: no e-values were aggregated");
  return sum / static_cast<double>(count);
}

std::string rows_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "world,parameter,value,rate,ci_low,ci_high,replicates,mean_runtime_ms\n";
  char buf[160];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%d,%.4f", row.estimate.rate,
                  row.estimate.ci_low, row.estimate.ci_high, row.estimate.replicates,
                  row.estimate.mean_runtime_ms);
    out += row.world + "," + row.parameter + "," + row.value + "," + buf + "\n";
  }
  return out;
}

std::string report_json(const ExperimentPlan& plan, const std::vector<SweepRow>& rows) {
  nlohmann::json j;
  j["plan"] = io::plan_to_json(plan);
  nlohmann::json estimates = nlohmann::json::array();
  for (const SweepRow& row : rows) {
    estimates.push_back(nlohmann::json{{"world", row.world},
                                       {"parameter", row.parameter},
                                       {"value", row.value},
                                       {"rate", row.estimate.rate},
                                       {"ci_low", row.estimate.ci_low},
                                       {"ci_high", row.estimate.ci_high},
                                       {"replicates", row.estimate.replicates},
                                       {"mean_runtime_ms", row.estimate.mean_runtime_ms}});
  }
  j["estimates"] = std::move(estimates);
  return j.dump(2) + "\n";
}

namespace {

// Null-distributed worlds: uniform p-values regardless of history.
bool is_null_world(const worlds::WorldModel& world) {
  switch (world.kind) {
    case worlds::WorldKind::NullUniform:
    case worlds::WorldKind::AdaptiveAdversary: return true;
    case worlds::WorldKind::AlternativeBeta: return world.beta_a && *world.beta_a == 1.0;
    case worlds::WorldKind::ScriptedStream: return false;
  }
  return false;
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

}  // namespace

std::vector<AssertionLine> builtin_assertions(const ExperimentPlan& plan,
                                              const std::vector<SweepRow>& rows) {
  std::vector<AssertionLine> lines;
  std::size_t row_idx = 0;

  auto describe = [](const SweepRow& row) {
    std::string tag = " [world=" + row.world;
    if (!row.parameter.empty()) tag += " " + row.parameter + "=" + row.value;
    return tag + "]";
  };

  auto handle_row = [&](const SweepRow& row, const ExperimentPlan& effective) {
    const int n = row.estimate.replicates;
    if (is_null_world(effective.world)) {
      const double a = effective.engine.alpha;
      const double bound = a + 3.0 * std::sqrt(a * (1.0 - a) / static_cast<double>(n));
      const bool ok = row.estimate.rate <= bound;
      lines.push_back(AssertionLine{
          std::string(ok ? "TYPE-I OK: " : "TYPE-I FAIL: ") +
              fmt("rate=%.4f, bound=%.4f", row.estimate.rate, bound) + describe(row),
          !ok});
      if (effective.engine.aggregation == engine::Aggregation::FisherEachRound) {
        // Paired contrast against the anytime-valid aggregation on the same
        // seeds; inflation must clear 3 pooled MC standard errors.
        ExperimentPlan twin = effective;
        twin.engine.aggregation = engine::Aggregation::EProduct;
        const RateEstimate ep = estimate_rate(twin);
        const double f = row.estimate.rate, e = ep.rate;
        const double pooled =
            std::sqrt(f * (1.0 - f) / n + e * (1.0 - e) / static_cast<double>(ep.replicates));
        const double excess = f - e;
        const bool inflated = excess > 3.0 * pooled;
        lines.push_back(AssertionLine{
            std::string(inflated ? "FISHER-INFLATION OK: " : "FISHER-INFLATION FAIL: ") +
                fmt("fisher=%.4f, eproduct=%.4f, excess=%.4f, min_excess=%.4f", f, e, excess,
                    3.0 * pooled) +
                describe(row),
            !inflated});
      }
    } else {
      lines.push_back(AssertionLine{
          "POWER: " + fmt("rate=%.4f, ci=[%.4f,%.4f]", row.estimate.rate, row.estimate.ci_low,
                          row.estimate.ci_high) +
              describe(row),
          false});
    }
  };

  if (plan.sweep.empty()) {
    if (!rows.empty()) handle_row(rows.front(), plan);
    return lines;
  }

  for (const SweepSpec& spec : plan.sweep) {
    std::vector<double> spec_rates;
    bool alternative_budget_sweep =
        spec.parameter == "max_tests" &&
        plan.world.kind == worlds::WorldKind::AlternativeBeta && plan.world.beta_a &&
        *plan.world.beta_a < 1.0;
    for (const auto& value : spec.values) {
      const SweepRow& row = rows.at(row_idx++);
      handle_row(row, apply_sweep_value(plan, spec.parameter, value));
      spec_rates.push_back(row.estimate.rate);
    }
    if (alternative_budget_sweep && spec_rates.size() >= 2) {
      bool monotone = true;
      std::string rates = "[";
      for (std::size_t i = 0; i < spec_rates.size(); ++i) {
        if (i > 0 && spec_rates[i] + 1e-12 < spec_rates[i - 1]) monotone = false;
        rates += fmt("%.4f", spec_rates[i]) + (i + 1 < spec_rates.size() ? "," : "");
      }
      rates += "]";
      lines.push_back(AssertionLine{
          std::string(monotone ? "POWER-MONOTONE OK: " : "POWER-MONOTONE FAIL: ") +
              "rates=" + rates,
          !monotone});
    }
  }
  return lines;
}

}  // namespace popper::mc
