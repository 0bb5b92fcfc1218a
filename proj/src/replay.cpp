#include "popper/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "popper/config.hpp"

namespace popper::replay {

using evidence::ConfigError;
using nlohmann::json;

TrajectoryFixture fixture_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("fixture must be a JSON object");
  for (const auto& item : j.items()) {
    static const char* allowed[] = {"name",       "hypothesis",
                                    "engine",     "script",
                                    "expected_cumulative", "expected_validated",
                                    "expected_stopping_index", "rel_tol",
                                    "note"};
    if (std::none_of(std::begin(allowed), std::end(allowed),
                     [&](const char* k) { return item.key() == k; }))
      throw ConfigError("fixture: unknown key \"" + item.key() + "\"");
  }
  TrajectoryFixture f;
  if (!j.contains("name") || !j.at("name").is_string())
    throw ConfigError("fixture: missing name");
  f.name = j.at("name").get<std::string>();
  if (!j.contains("hypothesis") || !j.at("hypothesis").is_string())
    throw ConfigError("fixture: missing hypothesis");
  f.hypothesis = j.at("hypothesis").get<std::string>();
  if (j.contains("engine")) f.engine = io::engine_config_from_json(j.at("engine"));
  if (!j.contains("script")) throw ConfigError("fixture: missing script");
  f.script = io::script_from_json(j.at("script"));
  if (j.contains("expected_cumulative")) {
    const json& arr = j.at("expected_cumulative");
    if (!arr.is_array()) throw ConfigError("fixture: expected_cumulative must be an array");
    for (const json& pair : arr) {
      if (!pair.is_array() || pair.size() != 2 || !pair.at(0).is_number_integer() ||
          !pair.at(1).is_number())
        throw ConfigError("fixture: expected_cumulative entries must be [ordinal, value]");
      FixtureExpectation exp;
      exp.ordinal = pair.at(0).get<int>();
      exp.value = pair.at(1).get<double>();
      if (exp.ordinal < 1) throw ConfigError("fixture: expectation ordinals are 1-based");
      f.expected_cumulative.push_back(exp);
    }
  }
  if (j.contains("expected_validated")) {
    if (!j.at("expected_validated").is_boolean())
      throw ConfigError("fixture: expected_validated must be a boolean");
    f.expected_validated = j.at("expected_validated").get<bool>();
  }
  if (j.contains("expected_stopping_index")) {
    if (!j.at("expected_stopping_index").is_number_integer())
      throw ConfigError("fixture: expected_stopping_index must be an integer");
    f.expected_stopping_index = j.at("expected_stopping_index").get<int>();
  }
  if (j.contains("rel_tol")) {
    if (!j.at("rel_tol").is_number() || j.at("rel_tol").get<double>() <= 0.0)
      throw ConfigError("fixture: rel_tol must be a positive number");
    f.rel_tol = j.at("rel_tol").get<double>();
  }
  if (j.contains("note")) {
    if (!j.at("note").is_string()) throw ConfigError("fixture: note must be a string");
    f.note = j.at("note").get<std::string>();
  }
  return f;
}

TrajectoryFixture load_fixture(const std::string& path) {
  return fixture_from_json(io::parse_json_text(io::read_text_file(path), path));
}

namespace {

bool close_rel(double expected, double actual, double rel_tol) {
  return std::abs(actual - expected) <= rel_tol * std::abs(expected);
}

std::string fmt_pair(const char* what, double expected, double actual) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s: expected %.17g, got %.17g", what, expected, actual);
  return buf;
}

}  // namespace

ReplayOutcome replay_fixture(const TrajectoryFixture& fixture) {
  ReplayOutcome out;
  out.fixture = fixture.name;
  worlds::ProviderTriple triple = worlds::scripted_provider(fixture.script);
  out.result = engine::run_validation(fixture.hypothesis, *triple.design, *triple.relevance,
                                      *triple.executor, fixture.engine);
  if (out.result.aborted) {
    out.mismatched = true;
    out.lines.push_back("run aborted: " + out.result.abort_reason);
    return out;
  }
  const engine::Verdict& v = out.result.verdict;

  std::vector<double> cumulative; // by aggregated ordinal
  for (const engine::LedgerEntry& entry : v.ledger)
    if (entry.disposition == engine::Disposition::Aggregated)
      cumulative.push_back(entry.cumulative_e_after);

  for (const FixtureExpectation& exp : fixture.expected_cumulative) {
    char what[48];
    std::snprintf(what, sizeof(what), "cumulative[%d]", exp.ordinal);
    if (exp.ordinal > static_cast<int>(cumulative.size())) {
      out.mismatched = true;
      out.lines.push_back(std::string(what) + ": only " + std::to_string(cumulative.size()) +
                          " aggregated entries");
      continue;
    }
    const double actual = cumulative[static_cast<std::size_t>(exp.ordinal) - 1];
    if (!close_rel(exp.value, actual, fixture.rel_tol)) {
      out.mismatched = true;
      out.lines.push_back(fmt_pair(what, exp.value, actual));
    }
  }
  if (fixture.expected_validated && v.validated != *fixture.expected_validated) {
    out.mismatched = true;
    out.lines.push_back(std::string("validated: expected ") +
                        (*fixture.expected_validated ? "true" : "false") + ", got " +
                        (v.validated ? "true" : "false"));
  }
  if (fixture.expected_stopping_index && v.stopping_index != *fixture.expected_stopping_index) {
    out.mismatched = true;
    out.lines.push_back("stopping_index: expected " +
                        std::to_string(*fixture.expected_stopping_index) + ", got " +
                        std::to_string(v.stopping_index));
  }
  return out;
}

ReplayReport replay_path(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const fs::directory_entry& entry : fs::directory_iterator(path, ec))
      if (entry.is_regular_file() && entry.path().extension() == ".json")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no fixture files (*.json) under " + path);
  } else if (fs::is_regular_file(path, ec)) {
    files.push_back(path);
  } else {
    throw ConfigError("no such fixture file or directory: " + path);
  }

  ReplayReport report;
  for (const std::string& file : files) {
    const TrajectoryFixture fixture = load_fixture(file);
    const ReplayOutcome outcome = replay_fixture(fixture);
    report.fixture_count += 1;
    if (outcome.mismatched) {
      report.any_mismatch = true;
      report.text += "REPLAY MISMATCH: " + outcome.fixture + " (" + file + ")\n";
      for (const std::string& line : outcome.lines) report.text += "  " + line + "\n";
    } else {
      const std::size_t checks = fixture.expected_cumulative.size() +
                                 (fixture.expected_validated ? 1 : 0) +
                                 (fixture.expected_stopping_index ? 1 : 0);
      report.text += "REPLAY OK: " + outcome.fixture + " (" + std::to_string(checks) +
                     " checks)\n";
    }
  }
  return report;
}

}  // namespace popper::replay
