#include "popper.h"

#include <cstring>
#include <exception>
#include <string>

#include "popper/config.hpp"
#include "popper/engine.hpp"
#include "popper/evidence.hpp"
#include "popper/harness.hpp"
#include "popper/ledger_io.hpp"
#include "popper/replay.hpp"

struct popper_run {
  popper::engine::RunResult result;
  std::string summary;
  std::string ledger_jsonl;
};

struct popper_mc {
  std::string csv;
  std::string report;
  std::string assertions;
  bool all_passed = true;
};

namespace {

thread_local std::string t_last_error;

popper_status fail(popper_status status, const std::string& message) {
  t_last_error = message;
  return status;
}

popper_status ok() {
  t_last_error.clear();
  return POPPER_OK;
}

// Uniform exception -> status mapping for API bodies.
template <typename Fn>
popper_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const popper::evidence::ConfigError& e) {
    return fail(POPPER_CONFIG, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(POPPER_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(POPPER_INTERNAL, e.what());
  } catch (...) {
    return fail(POPPER_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

popper_status selection_to_out(const popper::evidence::MultiTestResult& result, size_t count,
                               int* rejected_out, size_t* n_rejected_out) {
  if (result.rejected_indices.size() > count)
    return fail(POPPER_INTERNAL, "rejection set larger than input");
  for (size_t i = 0; i < result.rejected_indices.size(); ++i)
    rejected_out[i] = result.rejected_indices[i];
  *n_rejected_out = result.rejected_indices.size();
  return ok();
}

}  // namespace

extern "C" {

const char* popper_status_name(popper_status status) {
  switch (status) {
    case POPPER_OK: return "ok";
    case POPPER_INVALID_ARGUMENT: return "invalid_argument";
    case POPPER_CONFIG: return "config";
    case POPPER_ABORTED: return "aborted";
    case POPPER_FIXTURE_MISMATCH: return "fixture_mismatch";
    case POPPER_IO: return "io";
    case POPPER_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* popper_version(void) { return "0.1.0"; }

const char* popper_last_error(void) { return t_last_error.c_str(); }

popper_status popper_calibrate(double p_raw, double kappa, double p_floor, double* e_out) {
  if (!e_out) return fail(POPPER_INVALID_ARGUMENT, "e_out must not be NULL");
  return guarded([&] {
    popper::evidence::CalibratorConfig cfg;
    cfg.kappa = kappa;
    cfg.p_floor = p_floor;
    cfg.validate();
    *e_out = popper::evidence::calibrate(popper::evidence::clamp_p(p_raw, cfg), cfg).value;
    return ok();
  });
}

popper_status popper_fisher_combine(const double* ps, size_t count, double* p_out) {
  if (!ps || !p_out) return fail(POPPER_INVALID_ARGUMENT, "ps and p_out must not be NULL");
  return guarded([&] {
    *p_out = popper::evidence::fisher_combine(std::vector<double>(ps, ps + count)).value;
    return ok();
  });
}

popper_status popper_bonferroni(const double* final_es, size_t count, double alpha,
                                int* rejected_out, size_t* n_rejected_out) {
  if (!final_es || !rejected_out || !n_rejected_out)
    return fail(POPPER_INVALID_ARGUMENT, "output pointers must not be NULL");
  return guarded([&] {
    return selection_to_out(
        popper::evidence::bonferroni(std::vector<double>(final_es, final_es + count), alpha),
        count, rejected_out, n_rejected_out);
  });
}

popper_status popper_ebh(const double* final_es, size_t count, double alpha, int* rejected_out,
                         size_t* n_rejected_out) {
  if (!final_es || !rejected_out || !n_rejected_out)
    return fail(POPPER_INVALID_ARGUMENT, "output pointers must not be NULL");
  return guarded([&] {
    return selection_to_out(
        popper::evidence::ebh(std::vector<double>(final_es, final_es + count), alpha), count,
        rejected_out, n_rejected_out);
  });
}

popper_status popper_run_validation_json(const char* config_json, const char* base_dir,
                                         popper_run** run_out) {
  if (!config_json || !run_out)
    return fail(POPPER_INVALID_ARGUMENT, "config_json and run_out must not be NULL");
  *run_out = nullptr;
  return guarded([&]() -> popper_status {
    popper::io::ValidateConfig cfg =
        popper::io::parse_validate_config(config_json, base_dir ? base_dir : ".");
    popper::worlds::ProviderTriple triple = popper::io::providers_for(cfg);
    auto run = std::make_unique<popper_run>();
    run->result = popper::engine::run_validation(cfg.hypothesis, *triple.design,
                                                 *triple.relevance, *triple.executor, cfg.engine);
    run->summary = popper::engine::render_summary(run->result);
    run->ledger_jsonl = popper::io::ledger_file_text(run->result.verdict);
    const bool aborted = run->result.aborted;
    const std::string reason = run->result.abort_reason;
    *run_out = run.release();
    if (aborted) return fail(POPPER_ABORTED, "run aborted: " + reason);
    return ok();
  });
}

int popper_run_validated(const popper_run* run) {
  return run && run->result.verdict.validated ? 1 : 0;
}

double popper_run_final_e(const popper_run* run) {
  return run ? run->result.verdict.final_e : 0.0;
}

int popper_run_stopping_index(const popper_run* run) {
  return run ? run->result.verdict.stopping_index : 0;
}

double popper_run_alpha(const popper_run* run) { return run ? run->result.verdict.alpha : 0.0; }

size_t popper_run_ledger_size(const popper_run* run) {
  return run ? run->result.verdict.ledger.size() : 0;
}

int popper_run_aborted(const popper_run* run) { return run && run->result.aborted ? 1 : 0; }

const char* popper_run_abort_reason(const popper_run* run) {
  return run ? run->result.abort_reason.c_str() : "";
}

const char* popper_run_summary(const popper_run* run) {
  return run ? run->summary.c_str() : "";
}

const char* popper_run_ledger_jsonl(const popper_run* run) {
  return run ? run->ledger_jsonl.c_str() : "";
}

void popper_run_free(popper_run* run) { delete run; }

popper_status popper_mc_run_json(const char* plan_json, const char* base_dir,
                                 popper_mc** mc_out) {
  if (!plan_json || !mc_out)
    return fail(POPPER_INVALID_ARGUMENT, "plan_json and mc_out must not be NULL");
  *mc_out = nullptr;
  return guarded([&] {
    popper::mc::ExperimentPlan plan =
        popper::io::parse_plan(plan_json, base_dir ? base_dir : ".");
    std::vector<popper::mc::SweepRow> rows = popper::mc::sweep(plan);
    auto mc = std::make_unique<popper_mc>();
    mc->csv = popper::mc::rows_to_csv(rows);
    mc->report = popper::mc::report_json(plan, rows);
    for (const popper::mc::AssertionLine& line : popper::mc::builtin_assertions(plan, rows)) {
      mc->assertions += line.text + "\n";
      if (line.failed) mc->all_passed = false;
    }
    *mc_out = mc.release();
    return ok();
  });
}

const char* popper_mc_csv(const popper_mc* mc) { return mc ? mc->csv.c_str() : ""; }

const char* popper_mc_report_json(const popper_mc* mc) { return mc ? mc->report.c_str() : ""; }

const char* popper_mc_assertions(const popper_mc* mc) { return mc ? mc->assertions.c_str() : ""; }

int popper_mc_all_assertions_passed(const popper_mc* mc) {
  return mc && mc->all_passed ? 1 : 0;
}

void popper_mc_free(popper_mc* mc) { delete mc; }

popper_status popper_replay_path(const char* path, char** report_out) {
  if (!path || !report_out)
    return fail(POPPER_INVALID_ARGUMENT, "path and report_out must not be NULL");
  *report_out = nullptr;
  return guarded([&]() -> popper_status {
    popper::replay::ReplayReport report = popper::replay::replay_path(path);
    *report_out = dup_string(report.text);
    if (report.any_mismatch)
      return fail(POPPER_FIXTURE_MISMATCH, "fixture replay mismatched; see report");
    return ok();
  });
}

popper_status popper_render_summary_from_ledger(const char* ledger_jsonl, char** summary_out) {
  if (!ledger_jsonl || !summary_out)
    return fail(POPPER_INVALID_ARGUMENT, "ledger_jsonl and summary_out must not be NULL");
  *summary_out = nullptr;
  return guarded([&] {
    popper::engine::Verdict verdict = popper::io::parse_ledger_jsonl(ledger_jsonl);
    *summary_out = dup_string(popper::engine::render_summary(verdict));
    return ok();
  });
}

void popper_string_free(char* s) { delete[] s; }

}  // extern "C"
