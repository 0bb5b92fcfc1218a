#include "popper/remote.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>

#include "popper/ledger_io.hpp"

namespace popper::remote {

using engine::ExecStatus;
using engine::ExperimentOutcome;
using engine::FalsificationTest;
using engine::ProviderError;
using engine::RelevanceScore;
using evidence::ConfigError;

void RemoteEndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint.base_url must be set");
  if (!(timeout_seconds > 0.0)) throw ConfigError("endpoint.timeout_seconds must be > 0");
  if (max_transport_retries < 0)
    throw ConfigError("endpoint.max_transport_retries must be >= 0");
}

nlohmann::json request_to_json(const ProviderRequest& req) {
  nlohmann::json j;
  j["role"] = req.role;
  j["hypothesis"] = req.hypothesis;
  j["test"] = req.test ? io::test_to_json(*req.test) : nlohmann::json(nullptr);
  nlohmann::json history = nlohmann::json::array();
  for (const auto& entry : req.history) history.push_back(io::entry_to_json(entry));
  j["history"] = std::move(history);
  j["prompt_template_id"] = req.prompt_template_id;
  return j;
}

ProviderRequest request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("request must be a JSON object");
  ProviderRequest req;
  req.role = j.at("role").get<std::string>();
  if (req.role != "design" && req.role != "relevance" && req.role != "execute")
    throw ConfigError("unknown role: " + req.role);
  req.hypothesis = j.at("hypothesis").get<std::string>();
  if (j.contains("test") && !j.at("test").is_null()) req.test = io::test_from_json(j.at("test"));
  if ((req.role == "relevance" || req.role == "execute") && !req.test)
    throw ConfigError("role " + req.role + " requires a test payload");
  if (j.contains("history"))
    for (const auto& entry : j.at("history")) req.history.push_back(io::entry_from_json(entry));
  if (j.contains("prompt_template_id"))
    req.prompt_template_id = j.at("prompt_template_id").get<std::string>();
  return req;
}

nlohmann::json response_to_json(const ProviderResponse& resp) {
  if (resp.test) return io::test_to_json(*resp.test);
  if (resp.relevance)
    return nlohmann::json{{"score", resp.relevance->score},
                          {"rationale", resp.relevance->rationale}};
  if (resp.outcome) {
    nlohmann::json j;
    j["status"] = resp.outcome->status == ExecStatus::Succeeded ? "ok" : "fail";
    if (resp.outcome->p_raw) j["p"] = *resp.outcome->p_raw;
    j["log"] = resp.outcome->log;
    return j;
  }
  throw ConfigError("response has no payload");
}

ProviderResponse response_from_json(const std::string& role, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("response must be a JSON object");
  ProviderResponse resp;
  resp.role = role;
  if (role == "design") {
    resp.test = io::test_from_json(j);
  } else if (role == "relevance") {
    if (!j.contains("score") || !j.at("score").is_number())
      throw ConfigError("relevance response requires a numeric score");
    RelevanceScore score;
    score.score = j.at("score").get<double>();
    if (!std::isfinite(score.score) || score.score < 0.0 || score.score > 1.0)
      throw ConfigError("relevance score must lie in [0,1]");
    score.rationale = j.contains("rationale") && j.at("rationale").is_string()
                          ? j.at("rationale").get<std::string>()
                          : "";
    resp.relevance = score;
  } else if (role == "execute") {
    const std::string status = j.contains("status") && j.at("status").is_string()
                                   ? j.at("status").get<std::string>()
                                   : "";
    ExperimentOutcome outcome;
    if (status == "ok") {
      if (!j.contains("p") || !j.at("p").is_number())
        throw ConfigError("execute response with status \"ok\" requires a numeric p");
      const double p = j.at("p").get<double>();
      if (!std::isfinite(p)) throw ConfigError("execute response p must be finite");
      outcome.status = ExecStatus::Succeeded;
      outcome.p_raw = p;
    } else if (status == "fail") {
      outcome.status = ExecStatus::Failed;
    } else {
      throw ConfigError("execute response status must be \"ok\" or \"fail\"");
    }
    outcome.log = j.contains("log") && j.at("log").is_string() ? j.at("log").get<std::string>()
                                                               : "";
    resp.outcome = outcome;
  } else {
    throw ConfigError("unknown role: " + role);
  }
  return resp;
}

ProviderResponse call_remote(const ProviderRequest& req, const RemoteEndpointConfig& cfg) {
  cfg.validate();
  const std::string body = request_to_json(req).dump();
  const std::string path = "/" + req.role;

  httplib::Client client(cfg.base_url);
  const auto sec = static_cast<time_t>(cfg.timeout_seconds);
  const auto usec = static_cast<long>((cfg.timeout_seconds - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  if (!cfg.auth_token_env_var.empty()) {
    if (const char* token = std::getenv(cfg.auth_token_env_var.c_str()))
      client.set_default_headers({{"Authorization", std::string("Bearer ") + token}});
  }

  std::string last_error;
  const int attempts = cfg.max_transport_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Result res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "endpoint returned HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      return response_from_json(req.role, nlohmann::json::parse(res->body));
    } catch (const std::exception& err) {
      last_error = std::string("malformed response: ") + err.what();
    }
  }
  throw ProviderError(req.role + " provider failed after " + std::to_string(attempts) +
                      " attempts: " + last_error);
}

namespace {

// The engine's execute(test) contract carries no hypothesis, but serving
// sides want it; design/relevance record the run's hypothesis here and the
// executor echoes it (propose always precedes execute within a round).
struct SharedHypothesis {
  std::string text;
};

struct RemoteDesign final : engine::DesignProvider {
  RemoteEndpointConfig cfg;
  std::string template_id;
  std::shared_ptr<SharedHypothesis> hyp;
  FalsificationTest propose(const std::string& hypothesis,
                            const engine::Ledger& history) override {
    hyp->text = hypothesis;
    ProviderRequest req{"design", hypothesis, std::nullopt, history, template_id};
    return *call_remote(req, cfg).test;
  }
};

struct RemoteRelevance final : engine::RelevanceProvider {
  RemoteEndpointConfig cfg;
  std::string template_id;
  std::shared_ptr<SharedHypothesis> hyp;
  RelevanceScore score(const std::string& hypothesis,
                       const FalsificationTest& test) override {
    hyp->text = hypothesis;
    ProviderRequest req{"relevance", hypothesis, test, {}, template_id};
    return *call_remote(req, cfg).relevance;
  }
};

struct RemoteExecutor final : engine::ExecutionProvider {
  RemoteEndpointConfig cfg;
  std::string template_id;
  std::shared_ptr<SharedHypothesis> hyp;
  ExperimentOutcome execute(const FalsificationTest& test) override {
    ProviderRequest req{"execute", hyp->text, test, {}, template_id};
    return *call_remote(req, cfg).outcome;
  }
};

}  // namespace

worlds::ProviderTriple remote_provider(const RemoteEndpointConfig& cfg, RemoteTemplateIds ids) {
  cfg.validate();
  auto hyp = std::make_shared<SharedHypothesis>();
  auto design = std::make_shared<RemoteDesign>();
  design->cfg = cfg;
  design->template_id = ids.design;
  design->hyp = hyp;
  auto relevance = std::make_shared<RemoteRelevance>();
  relevance->cfg = cfg;
  relevance->template_id = ids.relevance;
  relevance->hyp = hyp;
  auto executor = std::make_shared<RemoteExecutor>();
  executor->cfg = cfg;
  executor->template_id = ids.execute;
  executor->hyp = hyp;
  return worlds::ProviderTriple{design, relevance, executor};
}

}  // namespace popper::remote
