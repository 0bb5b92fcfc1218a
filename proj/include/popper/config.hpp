#pragma once

#include <string>

#include <json.hpp>

#include "popper/engine.hpp"
#include "popper/harness.hpp"
#include "popper/remote.hpp"
#include "popper/worlds.hpp"

namespace popper::io {

const char* failed_test_policy_name(engine::FailedTestPolicy p);
engine::FailedTestPolicy failed_test_policy_from_name(const std::string& name);

const char* aggregation_name(engine::Aggregation a);
engine::Aggregation aggregation_from_name(const std::string& name);

// Engine block. Every field is optional and defaults to EngineConfig's
// defaults; unknown keys are rejected to catch typos.
nlohmann::json engine_config_to_json(const engine::EngineConfig& cfg);
engine::EngineConfig engine_config_from_json(const nlohmann::json& j);

// Script entries: {"relevance", "status": "ok"|"fail", "p", "name",
// "description"}; p required iff status is ok.
nlohmann::json script_entry_to_json(const worlds::ScriptEntry& entry);
worlds::ScriptEntry script_entry_from_json(const nlohmann::json& j);
nlohmann::json script_to_json(const worlds::Script& script);
worlds::Script script_from_json(const nlohmann::json& j);

// World block: {"kind", "beta_a", "script"|"script_path", "seed"}. Relative
// script_path values resolve against base_dir.
nlohmann::json world_to_json(const worlds::WorldModel& world);
worlds::WorldModel world_from_json(const nlohmann::json& j, const std::string& base_dir = ".");

nlohmann::json endpoint_to_json(const remote::RemoteEndpointConfig& cfg);
remote::RemoteEndpointConfig endpoint_from_json(const nlohmann::json& j);

// Monte Carlo plan: {"world", "engine", "replicates", "base_seed", "sweep":
// [{"parameter", "values"}]}. world.seed is ignored by the harness.
nlohmann::json plan_to_json(const mc::ExperimentPlan& plan);
mc::ExperimentPlan plan_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
mc::ExperimentPlan parse_plan(const std::string& text, const std::string& base_dir = ".");

enum class SourceKind { Scripted, Synthetic, Remote };

const char* source_kind_name(SourceKind k);
SourceKind source_kind_from_name(const std::string& name);

// One validation run: the hypothesis, the engine settings and where the
// three providers come from. Exactly one source block applies:
//   scripted  - "script" (inline) or "script_path"
//   synthetic - "world" (seeded from world.seed)
//   remote    - "endpoint" (+ optional "prompt_dir" checked for completeness)
struct ValidateConfig {
  std::string hypothesis;
  engine::EngineConfig engine;
  SourceKind source = SourceKind::Scripted;
  worlds::Script script;
  worlds::WorldModel world;
  remote::RemoteEndpointConfig endpoint;
  std::string prompt_dir;
  void validate() const; // throws evidence::ConfigError
};

nlohmann::json validate_config_to_json(const ValidateConfig& cfg);
ValidateConfig validate_config_from_json(const nlohmann::json& j,
                                         const std::string& base_dir = ".");
ValidateConfig parse_validate_config(const std::string& text, const std::string& base_dir = ".");

// Builds the provider triple a ValidateConfig describes. seed_override, when
// present, replaces world.seed for synthetic sources (scripted and remote
// sources have no randomness to seed).
worlds::ProviderTriple providers_for(const ValidateConfig& cfg);

// Reads a whole file; throws ConfigError on IO failure.
std::string read_text_file(const std::string& path);
nlohmann::json parse_json_text(const std::string& text, const std::string& what);

}  // namespace popper::io
