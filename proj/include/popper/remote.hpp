#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "popper/engine.hpp"
#include "popper/worlds.hpp"

namespace popper::remote {

struct RemoteEndpointConfig {
  std::string base_url;          // e.g. http://127.0.0.1:8080
  double timeout_seconds = 30.0;
  int max_transport_retries = 2; // retries after the first attempt
  std::string auth_token_env_var; // name only; value read from the environment
  void validate() const;          // throws evidence::ConfigError
};

// Template ids attached to each role's request so the serving side knows
// which prompt to apply. Defaults follow the shipped registry.
struct RemoteTemplateIds {
  std::string design = "statistical_agent";
  std::string relevance = "relevance_checker";
  std::string execute = "coding_agent";
};

struct ProviderRequest {
  std::string role; // "design" | "relevance" | "execute"
  std::string hypothesis;
  std::optional<engine::FalsificationTest> test; // required for relevance/execute
  engine::Ledger history;
  std::string prompt_template_id;
};

// Exactly one payload present, matching role.
struct ProviderResponse {
  std::string role;
  std::optional<engine::FalsificationTest> test;
  std::optional<engine::RelevanceScore> relevance;
  std::optional<engine::ExperimentOutcome> outcome;
};

nlohmann::json request_to_json(const ProviderRequest& req);
ProviderRequest request_from_json(const nlohmann::json& j); // throws ConfigError

nlohmann::json response_to_json(const ProviderResponse& resp);
// Validates the role-specific schema (score in [0,1], p present and finite
// for status "ok", non-empty test fields). Throws ConfigError on violation.
ProviderResponse response_from_json(const std::string& role, const nlohmann::json& j);

// POSTs the request to {base_url}/{role}; timeouts, non-2xx statuses and
// schema violations are retried up to max_transport_retries and then thrown
// as engine::ProviderError (the engine's abort path).
ProviderResponse call_remote(const ProviderRequest& req, const RemoteEndpointConfig& cfg);

// Engine-facing adapter triple over the wire protocol. A transport failure
// never fabricates a p-value; it surfaces as ProviderError.
worlds::ProviderTriple remote_provider(const RemoteEndpointConfig& cfg,
                                       RemoteTemplateIds ids = {});

}  // namespace popper::remote
