#include "popper/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "popper/prompts.hpp"

namespace popper::io {

using evidence::ConfigError;
using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

// Rejects keys outside `allowed`; typos in optional fields would otherwise
// silently fall back to defaults.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& what) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) { known = true; break; }
    if (!known) throw ConfigError(what + ": unknown key \"" + item.key() + "\"");
  }
}

double get_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string(key) + " must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer())
    throw ConfigError(std::string(key) + " must be an integer");
  return j.at(key).get<int>();
}

bool get_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(std::string(key) + " must be a boolean");
  return j.at(key).get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(std::string(key) + " must be a string");
  return j.at(key).get<std::string>();
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

const char* failed_test_policy_name(engine::FailedTestPolicy p) {
  return p == engine::FailedTestPolicy::AggregateP1 ? "aggregate_p1" : "skip";
}

engine::FailedTestPolicy failed_test_policy_from_name(const std::string& name) {
  if (name == "aggregate_p1") return engine::FailedTestPolicy::AggregateP1;
  if (name == "skip") return engine::FailedTestPolicy::Skip;
  throw ConfigError("unknown failed_test_policy: " + name);
}

const char* aggregation_name(engine::Aggregation a) {
  return a == engine::Aggregation::EProduct ? "e_product" : "fisher_each_round";
}

engine::Aggregation aggregation_from_name(const std::string& name) {
  if (name == "e_product") return engine::Aggregation::EProduct;
  if (name == "fisher_each_round") return engine::Aggregation::FisherEachRound;
  throw ConfigError("unknown aggregation: " + name);
}

json engine_config_to_json(const engine::EngineConfig& cfg) {
  return json{{"alpha", cfg.alpha},
              {"max_tests", cfg.max_tests},
              {"max_exec_retries", cfg.max_exec_retries},
              {"max_relevance_retries", cfg.max_relevance_retries},
              {"relevance_threshold", cfg.relevance_threshold},
              {"calibrator", json{{"kappa", cfg.calibrator.kappa},
                                  {"p_floor", cfg.calibrator.p_floor}}},
              {"failed_test_policy", failed_test_policy_name(cfg.failed_test_policy)},
              {"aggregation", aggregation_name(cfg.aggregation)},
              {"relevance_failure_consumes_budget", cfg.relevance_failure_consumes_budget}};
}

engine::EngineConfig engine_config_from_json(const json& j) {
  require_object(j, "engine");
  reject_unknown_keys(j,
                      {"alpha", "max_tests", "max_exec_retries", "max_relevance_retries",
                       "relevance_threshold", "calibrator", "failed_test_policy", "aggregation",
                       "relevance_failure_consumes_budget"},
                      "engine");
  engine::EngineConfig cfg;
  cfg.alpha = get_number(j, "alpha", cfg.alpha);
  cfg.max_tests = get_int(j, "max_tests", cfg.max_tests);
  cfg.max_exec_retries = get_int(j, "max_exec_retries", cfg.max_exec_retries);
  cfg.max_relevance_retries = get_int(j, "max_relevance_retries", cfg.max_relevance_retries);
  cfg.relevance_threshold = get_number(j, "relevance_threshold", cfg.relevance_threshold);
  if (j.contains("calibrator")) {
    const json& c = j.at("calibrator");
    require_object(c, "engine.calibrator");
    reject_unknown_keys(c, {"kappa", "p_floor"}, "engine.calibrator");
    cfg.calibrator.kappa = get_number(c, "kappa", cfg.calibrator.kappa);
    cfg.calibrator.p_floor = get_number(c, "p_floor", cfg.calibrator.p_floor);
  }
  if (j.contains("failed_test_policy"))
    cfg.failed_test_policy = failed_test_policy_from_name(get_string(j, "failed_test_policy", ""));
  if (j.contains("aggregation"))
    cfg.aggregation = aggregation_from_name(get_string(j, "aggregation", ""));
  cfg.relevance_failure_consumes_budget =
      get_bool(j, "relevance_failure_consumes_budget", cfg.relevance_failure_consumes_budget);
  cfg.validate();
  return cfg;
}

json script_entry_to_json(const worlds::ScriptEntry& entry) {
  json j{{"relevance", entry.relevance},
         {"status", entry.status == engine::ExecStatus::Succeeded ? "ok" : "fail"}};
  if (entry.p) j["p"] = *entry.p;
  if (!entry.name.empty()) j["name"] = entry.name;
  if (!entry.description.empty()) j["description"] = entry.description;
  return j;
}

worlds::ScriptEntry script_entry_from_json(const json& j) {
  require_object(j, "script entry");
  reject_unknown_keys(j, {"relevance", "status", "p", "name", "description"}, "script entry");
  worlds::ScriptEntry entry;
  entry.relevance = get_number(j, "relevance", entry.relevance);
  const std::string status = get_string(j, "status", "ok");
  if (status == "ok") entry.status = engine::ExecStatus::Succeeded;
  else if (status == "fail") entry.status = engine::ExecStatus::Failed;
  else throw ConfigError("script entry status must be \"ok\" or \"fail\", got \"" + status + "\"");
  if (j.contains("p")) {
    if (!j.at("p").is_number()) throw ConfigError("script entry p must be a number");
    entry.p = j.at("p").get<double>();
  }
  entry.name = get_string(j, "name", "");
  entry.description = get_string(j, "description", "");
  return entry;
}

json script_to_json(const worlds::Script& script) {
  json arr = json::array();
  for (const worlds::ScriptEntry& entry : script) arr.push_back(script_entry_to_json(entry));
  return arr;
}

worlds::Script script_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("script must be a JSON array");
  worlds::Script script;
  for (const json& item : j) script.push_back(script_entry_from_json(item));
  return script;
}

json world_to_json(const worlds::WorldModel& world) {
  json j{{"kind", worlds::world_kind_name(world.kind)}, {"seed", world.seed}};
  if (world.beta_a) j["beta_a"] = *world.beta_a;
  if (world.script) j["script"] = script_to_json(*world.script);
  return j;
}

worlds::WorldModel world_from_json(const json& j, const std::string& base_dir) {
  require_object(j, "world");
  reject_unknown_keys(j, {"kind", "beta_a", "script", "script_path", "seed"}, "world");
  worlds::WorldModel world;
  world.kind = worlds::world_kind_from_name(get_string(j, "kind", "null_uniform"));
  if (j.contains("beta_a")) world.beta_a = get_number(j, "beta_a", 0.0);
  if (j.contains("script") && j.contains("script_path"))
    throw ConfigError("world: give either script or script_path, not both");
  if (j.contains("script")) world.script = script_from_json(j.at("script"));
  if (j.contains("script_path")) {
    const std::string path = resolve_path(get_string(j, "script_path", ""), base_dir);
    world.script = script_from_json(parse_json_text(read_text_file(path), path));
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigError("world.seed must be an integer");
    world.seed = j.at("seed").get<std::uint64_t>();
  }
  world.validate();
  return world;
}

json endpoint_to_json(const remote::RemoteEndpointConfig& cfg) {
  json j{{"base_url", cfg.base_url},
         {"timeout_seconds", cfg.timeout_seconds},
         {"max_transport_retries", cfg.max_transport_retries}};
  if (!cfg.auth_token_env_var.empty()) j["auth_token_env_var"] = cfg.auth_token_env_var;
  return j;
}

remote::RemoteEndpointConfig endpoint_from_json(const json& j) {
  require_object(j, "endpoint");
  reject_unknown_keys(j, {"base_url", "timeout_seconds", "max_transport_retries",
                          "auth_token_env_var"},
                      "endpoint");
  remote::RemoteEndpointConfig cfg;
  cfg.base_url = get_string(j, "base_url", "");
  cfg.timeout_seconds = get_number(j, "timeout_seconds", cfg.timeout_seconds);
  cfg.max_transport_retries = get_int(j, "max_transport_retries", cfg.max_transport_retries);
  cfg.auth_token_env_var = get_string(j, "auth_token_env_var", "");
  cfg.validate();
  return cfg;
}

json plan_to_json(const mc::ExperimentPlan& plan) {
  json j{{"world", world_to_json(plan.world)},
         {"engine", engine_config_to_json(plan.engine)},
         {"replicates", plan.replicates},
         {"base_seed", plan.base_seed}};
  if (!plan.sweep.empty()) {
    json sweeps = json::array();
    for (const mc::SweepSpec& spec : plan.sweep) {
      json values = json::array();
      for (const auto& value : spec.values) {
        if (std::holds_alternative<double>(value)) values.push_back(std::get<double>(value));
        else values.push_back(std::get<std::string>(value));
      }
      sweeps.push_back(json{{"parameter", spec.parameter}, {"values", std::move(values)}});
    }
    j["sweep"] = std::move(sweeps);
  }
  return j;
}

mc::ExperimentPlan plan_from_json(const json& j, const std::string& base_dir) {
  require_object(j, "plan");
  reject_unknown_keys(j, {"world", "engine", "replicates", "base_seed", "sweep"}, "plan");
  mc::ExperimentPlan plan;
  if (!j.contains("world")) throw ConfigError("plan: missing world");
  plan.world = world_from_json(j.at("world"), base_dir);
  if (j.contains("engine")) plan.engine = engine_config_from_json(j.at("engine"));
  plan.replicates = get_int(j, "replicates", plan.replicates);
  if (j.contains("base_seed")) {
    if (!j.at("base_seed").is_number_unsigned() && !j.at("base_seed").is_number_integer())
      throw ConfigError("plan.base_seed must be an integer");
    plan.base_seed = j.at("base_seed").get<std::uint64_t>();
  }
  if (j.contains("sweep")) {
    if (!j.at("sweep").is_array()) throw ConfigError("plan.sweep must be an array");
    for (const json& spec_json : j.at("sweep")) {
      require_object(spec_json, "sweep spec");
      reject_unknown_keys(spec_json, {"parameter", "values"}, "sweep spec");
      mc::SweepSpec spec;
      spec.parameter = get_string(spec_json, "parameter", "");
      if (!spec_json.contains("values") || !spec_json.at("values").is_array())
        throw ConfigError("sweep spec: values must be an array");
      for (const json& value : spec_json.at("values")) {
        if (value.is_number()) spec.values.emplace_back(value.get<double>());
        else if (value.is_string()) spec.values.emplace_back(value.get<std::string>());
        else throw ConfigError("sweep values must be numbers or strings");
      }
      plan.sweep.push_back(std::move(spec));
    }
  }
  plan.validate();
  return plan;
}

mc::ExperimentPlan parse_plan(const std::string& text, const std::string& base_dir) {
  return plan_from_json(parse_json_text(text, "plan"), base_dir);
}

const char* source_kind_name(SourceKind k) {
  switch (k) {
    case SourceKind::Scripted: return "scripted";
    case SourceKind::Synthetic: return "synthetic";
    case SourceKind::Remote: return "remote";
  }
  return "scripted";
}

SourceKind source_kind_from_name(const std::string& name) {
  if (name == "scripted") return SourceKind::Scripted;
  if (name == "synthetic") return SourceKind::Synthetic;
  if (name == "remote") return SourceKind::Remote;
  throw ConfigError("unknown source kind: " + name);
}

void ValidateConfig::validate() const {
  if (hypothesis.empty()) throw ConfigError("hypothesis must be non-empty");
  engine.validate();
  switch (source) {
    case SourceKind::Scripted:
      if (script.empty()) throw ConfigError("scripted source requires a non-empty script");
      break;
    case SourceKind::Synthetic:
      world.validate();
      if (world.kind == worlds::WorldKind::ScriptedStream)
        throw ConfigError("synthetic source cannot use a scripted_stream world; use source scripted");
      break;
    case SourceKind::Remote:
      endpoint.validate();
      break;
  }
}

json validate_config_to_json(const ValidateConfig& cfg) {
  json j{{"hypothesis", cfg.hypothesis},
         {"engine", engine_config_to_json(cfg.engine)},
         {"source", source_kind_name(cfg.source)}};
  switch (cfg.source) {
    case SourceKind::Scripted: j["script"] = script_to_json(cfg.script); break;
    case SourceKind::Synthetic: j["world"] = world_to_json(cfg.world); break;
    case SourceKind::Remote:
      j["endpoint"] = endpoint_to_json(cfg.endpoint);
      if (!cfg.prompt_dir.empty()) j["prompt_dir"] = cfg.prompt_dir;
      break;
  }
  return j;
}

ValidateConfig validate_config_from_json(const json& j, const std::string& base_dir) {
  require_object(j, "config");
  reject_unknown_keys(j, {"hypothesis", "engine", "source", "script", "script_path", "world",
                          "endpoint", "prompt_dir"},
                      "config");
  ValidateConfig cfg;
  cfg.hypothesis = get_string(j, "hypothesis", "");
  if (j.contains("engine")) cfg.engine = engine_config_from_json(j.at("engine"));
  cfg.source = source_kind_from_name(get_string(j, "source", "scripted"));
  if (j.contains("script") && j.contains("script_path"))
    throw ConfigError("config: give either script or script_path, not both");
  if (j.contains("script")) cfg.script = script_from_json(j.at("script"));
  if (j.contains("script_path")) {
    const std::string path = resolve_path(get_string(j, "script_path", ""), base_dir);
    cfg.script = script_from_json(parse_json_text(read_text_file(path), path));
  }
  if (j.contains("world")) cfg.world = world_from_json(j.at("world"), base_dir);
  if (j.contains("endpoint")) cfg.endpoint = endpoint_from_json(j.at("endpoint"));
  if (j.contains("prompt_dir"))
    cfg.prompt_dir = resolve_path(get_string(j, "prompt_dir", ""), base_dir);
  cfg.validate();
  return cfg;
}

ValidateConfig parse_validate_config(const std::string& text, const std::string& base_dir) {
  return validate_config_from_json(parse_json_text(text, "config"), base_dir);
}

worlds::ProviderTriple providers_for(const ValidateConfig& cfg) {
  switch (cfg.source) {
    case SourceKind::Scripted: return worlds::scripted_provider(cfg.script);
    case SourceKind::Synthetic:
      return worlds::make_world_provider(cfg.world, cfg.world.seed, /*stream_id=*/0);
    case SourceKind::Remote: {
      // Fail fast on an incomplete template directory before any network IO.
      if (!cfg.prompt_dir.empty()) remote::PromptRegistry::load(cfg.prompt_dir);
      return remote::remote_provider(cfg.endpoint);
    }
  }
  throw ConfigError("unhandled source kind");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw ConfigError("error reading file: " + path);
  return buf.str();
}

json parse_json_text(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid JSON in " + what);
  return j;
}

}  // namespace popper::io
