#include "popper/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace popper::evidence {

void CalibratorConfig::validate() const {
  if (!std::isfinite(kappa) || kappa <= 0.0 || kappa >= 1.0)
    throw ConfigError("calibrator.kappa must lie in (0,1)");
  if (!std::isfinite(p_floor) || p_floor <= 0.0 || p_floor >= 1.0)
    throw ConfigError("calibrator.p_floor must lie in (0,1)");
}

PValue clamp_p(double raw, const CalibratorConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(raw)) throw std::invalid_argument("p-value must be finite");
  PValue out;
  if (raw <= 0.0 || raw < cfg.p_floor) {
    out.value = cfg.p_floor;
    out.clamped = true;
  } else if (raw > 1.0) {
    out.value = 1.0;
    out.clamped = true;
  } else {
    out.value = raw;
    out.clamped = false;
  }
  return out;
}

EValue calibrate(const PValue& p, const CalibratorConfig& cfg) {
  cfg.validate();
  return EValue{cfg.kappa * std::pow(p.value, cfg.kappa - 1.0)};
}

EvidenceState accumulate(EvidenceState state, const EValue& e) {
  state.log_cumulative_e += std::log(e.value); // e=0 -> -inf, a legal absorbing state
  const double direct = state.cumulative_e * e.value;
  if (std::isfinite(direct)) {
    state.cumulative_e = direct;
  } else {
    // Direct product left double range; fall back to the log accumulator.
    state.cumulative_e = std::exp(state.log_cumulative_e);
    state.saturated = !std::isfinite(state.cumulative_e);
    if (state.saturated) state.cumulative_e = std::numeric_limits<double>::infinity();
  }
  state.count += 1;
  return state;
}

Decision decide(const EvidenceState& state) {
  return state.cumulative_e >= 1.0 / state.alpha ? Decision::Reject : Decision::Continue;
}

double chi2_survival_even_df(double t, int k) {
  // Q(T; 2k) = exp(-T/2) * sum_{j<k} (T/2)^j / j!; log-sum-exp keeps the
  // partial sums representable when T is large.
  if (t <= 0.0) return 1.0;
  const double h = t / 2.0;
  const double log_h = std::log(h);
  double max_log = -h; // j = 0 term
  std::vector<double> logs(static_cast<std::size_t>(k));
  double lfact = 0.0;
  for (int j = 0; j < k; ++j) {
    if (j > 0) lfact += std::log(static_cast<double>(j));
    logs[static_cast<std::size_t>(j)] = -h + j * log_h - lfact;
    max_log = std::max(max_log, logs[static_cast<std::size_t>(j)]);
  }
  double sum = 0.0;
  for (double l : logs) sum += std::exp(l - max_log);
  const double q = std::exp(max_log) * sum;
  return std::min(1.0, q);
}

PValue fisher_combine(const std::vector<double>& ps) {
  if (ps.empty()) throw std::invalid_argument("fisher_combine: empty p-value list");
  double t = 0.0;
  for (double p : ps) {
    if (!std::isfinite(p) || p <= 0.0 || p > 1.0)
      throw std::invalid_argument("fisher_combine: p-values must lie in (0,1]");
    t += -2.0 * std::log(p);
  }
  return PValue{chi2_survival_even_df(t, static_cast<int>(ps.size())), false};
}

MultiTestResult bonferroni(const std::vector<double>& final_es, double alpha) {
  if (final_es.empty()) throw std::invalid_argument("bonferroni: empty e-value list");
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("bonferroni: alpha must lie in (0,1)");
  MultiTestResult out;
  out.procedure = Procedure::Bonferroni;
  out.alpha = alpha;
  const double m = static_cast<double>(final_es.size());
  for (std::size_t i = 0; i < final_es.size(); ++i)
    if (final_es[i] >= m / alpha) out.rejected_indices.push_back(static_cast<int>(i) + 1);
  return out;
}

MultiTestResult ebh(const std::vector<double>& final_es, double alpha) {
  if (final_es.empty()) throw std::invalid_argument("ebh: empty e-value list");
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("ebh: alpha must lie in (0,1)");
  const std::size_t m = final_es.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  // Descending by e-value, ties by lowest original index.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return final_es[a] > final_es[b];
  });
  std::size_t k_star = 0;
  for (std::size_t k = 1; k <= m; ++k) {
    const double threshold = static_cast<double>(m) / (static_cast<double>(k) * alpha);
    if (final_es[order[k - 1]] >= threshold) k_star = k;
  }
  MultiTestResult out;
  out.procedure = Procedure::EBH;
  out.alpha = alpha;
  for (std::size_t k = 0; k < k_star; ++k)
    out.rejected_indices.push_back(static_cast<int>(order[k]) + 1);
  std::sort(out.rejected_indices.begin(), out.rejected_indices.end());
  return out;
}

}  // namespace popper::evidence
