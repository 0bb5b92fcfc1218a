#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "popper/engine.hpp"
#include "popper/worlds.hpp"

namespace popper::replay {

// Expected cumulative e-value after the ordinal-th aggregated entry
// (1-based, counting Aggregated ledger rows only).
struct FixtureExpectation {
  int ordinal = 0;
  double value = 0.0;
};

// A recorded validation trajectory: the script that reproduces it plus the
// checkpoints the replay must hit. rel_tol applies to every expected value.
struct TrajectoryFixture {
  std::string name;
  std::string hypothesis;
  engine::EngineConfig engine;
  worlds::Script script;
  std::vector<FixtureExpectation> expected_cumulative;
  std::optional<bool> expected_validated;
  std::optional<int> expected_stopping_index;
  double rel_tol = 1e-9;
  std::string note;
};

TrajectoryFixture fixture_from_json(const nlohmann::json& j); // throws ConfigError
TrajectoryFixture load_fixture(const std::string& path);      // throws ConfigError

struct ReplayOutcome {
  std::string fixture; // fixture name
  bool mismatched = false;
  std::vector<std::string> lines; // one detail line per failed check
  engine::RunResult result;
};

// Runs the fixture's script through the engine and checks every expectation.
// An aborted run counts as a mismatch.
ReplayOutcome replay_fixture(const TrajectoryFixture& fixture);

struct ReplayReport {
  std::string text; // one REPLAY OK/MISMATCH line per fixture plus details
  bool any_mismatch = false;
  int fixture_count = 0;
};

// path is a fixture file or a directory of *.json fixtures (sorted by name).
// Throws ConfigError when the path is missing, unreadable, malformed, or a
// directory with no fixtures.
ReplayReport replay_path(const std::string& path);

}  // namespace popper::replay
