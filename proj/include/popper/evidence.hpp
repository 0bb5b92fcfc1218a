#pragma once

#include <stdexcept>
#include <vector>

namespace popper::evidence {

// Raised for invalid configuration values (bad kappa, alpha, budgets, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibratorConfig {
  double kappa = 0.5;      // calibrator exponent, in (0,1)
  double p_floor = 1e-300; // clamp floor; keeps e-values finite at p=0
  void validate() const;   // throws ConfigError
};

// A p-value after clamping into [p_floor, 1]; `clamped` records whether the
// raw input was altered (audit flag, carried into the ledger).
struct PValue {
  double value = 1.0;
  bool clamped = false;
};

struct EValue {
  double value = 0.0; // >= 0, finite
};

// Running e-process state. cumulative_e is the directly accumulated product;
// log_cumulative_e tracks the same product in log space so the value survives
// double overflow (saturated flags the case where even exp(log) is not
// representable). count=0 implies cumulative_e=1 (empty product).
struct EvidenceState {
  double cumulative_e = 1.0;
  double log_cumulative_e = 0.0;
  int count = 0;
  double alpha = 0.1;
  bool saturated = false;
};

enum class Decision { Reject, Continue };

enum class Procedure { Bonferroni, EBH };

// Rejection set over M hypotheses; indices are 1-based and sorted ascending.
struct MultiTestResult {
  std::vector<int> rejected_indices;
  Procedure procedure = Procedure::Bonferroni;
  double alpha = 0.1;
};

// min(1, max(p_floor, raw)); flags the clamp when raw <= 0, raw < p_floor or
// raw > 1. Throws std::invalid_argument on non-finite raw.
PValue clamp_p(double raw, const CalibratorConfig& cfg);

// kappa * p^(kappa-1). Expects p already clamped; strictly decreasing in p,
// equal to kappa at p=1. Throws ConfigError on invalid cfg.
EValue calibrate(const PValue& p, const CalibratorConfig& cfg);

// Returns a new state with the product extended by e; the input is untouched.
EvidenceState accumulate(EvidenceState state, const EValue& e);

// Reject iff cumulative_e >= 1/alpha (inclusive threshold).
Decision decide(const EvidenceState& state);

// Fisher's combined test: survival of chi-square with 2k dof at
// T = -2 sum(ln p_i). Throws std::invalid_argument on empty input or entries
// outside (0, 1].
PValue fisher_combine(const std::vector<double>& ps);

// Survival function of the chi-square distribution with 2k degrees of freedom
// (closed form for even dof, evaluated stably in log space). Exposed so tests
// can pit it against an independent CDF implementation.
double chi2_survival_even_df(double t, int k);

// Reject hypothesis i iff final_es[i] >= M/alpha (per-hypothesis level alpha/M).
MultiTestResult bonferroni(const std::vector<double>& final_es, double alpha);

// e-BH: with e-values sorted descending, k* = max{k : e_[k] >= M/(k*alpha)};
// rejects the k* largest, ties broken by lowest original index.
MultiTestResult ebh(const std::vector<double>& final_es, double alpha);

}  // namespace popper::evidence
