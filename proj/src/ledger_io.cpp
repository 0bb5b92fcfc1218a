#include "popper/ledger_io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace popper::io {

using evidence::ConfigError;
using engine::Disposition;
using engine::FalsificationTest;
using engine::LedgerEntry;
using engine::RelevanceScore;
using engine::Verdict;

std::string format_real17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string json_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 8);
  for (unsigned char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

const char* disposition_name(Disposition d) {
  switch (d) {
    case Disposition::RelevanceRejected: return "RelevanceRejected";
    case Disposition::ExecutionFailed: return "ExecutionFailed";
    case Disposition::Aggregated: return "Aggregated";
  }
  return "unknown";
}

Disposition disposition_from_name(const std::string& name) {
  if (name == "RelevanceRejected") return Disposition::RelevanceRejected;
  if (name == "ExecutionFailed") return Disposition::ExecutionFailed;
  if (name == "Aggregated") return Disposition::Aggregated;
  throw ConfigError("unknown disposition: " + name);
}

namespace {

std::string jquote(std::string_view s) { return "\"" + json_escape(s) + "\""; }

std::string test_fields(const FalsificationTest& t) {
  return "{\"name\":" + jquote(t.name) + ",\"description\":" + jquote(t.description) +
         ",\"null_sub_hypothesis\":" + jquote(t.null_sub_hypothesis) +
         ",\"alternative_sub_hypothesis\":" + jquote(t.alternative_sub_hypothesis) + "}";
}

}  // namespace

std::string entry_to_jsonl(const LedgerEntry& entry) {
  std::string out = "{\"round_index\":" + std::to_string(entry.round_index);
  out += ",\"test\":" + test_fields(entry.test);
  out += ",\"relevance\":";
  if (entry.relevance) {
    out += "{\"score\":" + format_real17(entry.relevance->score) +
           ",\"rationale\":" + jquote(entry.relevance->rationale) + "}";
  } else {
    out += "null";
  }
  out += ",\"disposition\":" + jquote(disposition_name(entry.disposition));
  out += ",\"p\":" + (entry.p ? format_real17(*entry.p) : std::string("null"));
  out += ",\"e\":" + (entry.e ? format_real17(*entry.e) : std::string("null"));
  out += ",\"cumulative_e_after\":" + format_real17(entry.cumulative_e_after);
  out += ",\"clamped\":" + std::string(entry.clamped ? "true" : "false");
  out += "}";
  return out;
}

std::string verdict_trailer_to_jsonl(const Verdict& verdict) {
  std::string out = "{\"hypothesis\":" + jquote(verdict.hypothesis);
  out += ",\"validated\":" + std::string(verdict.validated ? "true" : "false");
  out += ",\"final_e\":" + format_real17(verdict.final_e);
  out += ",\"stopping_index\":" + std::to_string(verdict.stopping_index);
  out += ",\"alpha\":" + format_real17(verdict.alpha);
  out += "}";
  return out;
}

std::string ledger_file_text(const Verdict& verdict) {
  std::string out;
  for (const LedgerEntry& entry : verdict.ledger) out += entry_to_jsonl(entry) + "\n";
  out += verdict_trailer_to_jsonl(verdict) + "\n";
  return out;
}

nlohmann::json test_to_json(const FalsificationTest& test) {
  return nlohmann::json{{"name", test.name},
                        {"description", test.description},
                        {"null_sub_hypothesis", test.null_sub_hypothesis},
                        {"alternative_sub_hypothesis", test.alternative_sub_hypothesis}};
}

namespace {

std::string require_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ConfigError(std::string("expected string field \"") + key + "\"");
  return j.at(key).get<std::string>();
}

double require_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ConfigError(std::string("expected numeric field \"") + key + "\"");
  return j.at(key).get<double>();
}

}  // namespace

FalsificationTest test_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("test must be a JSON object");
  FalsificationTest t;
  t.name = require_string(j, "name");
  t.description = require_string(j, "description");
  t.null_sub_hypothesis = require_string(j, "null_sub_hypothesis");
  t.alternative_sub_hypothesis = require_string(j, "alternative_sub_hypothesis");
  if (t.name.empty() || t.description.empty() || t.null_sub_hypothesis.empty() ||
      t.alternative_sub_hypothesis.empty())
    throw ConfigError("test fields must be non-empty");
  return t;
}

nlohmann::json entry_to_json(const LedgerEntry& entry) {
  // Route through the canonical line renderer so wire and file agree exactly.
  return nlohmann::json::parse(entry_to_jsonl(entry));
}

LedgerEntry entry_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("ledger entry must be a JSON object");
  LedgerEntry entry;
  const double round = require_number(j, "round_index");
  entry.round_index = static_cast<int>(round);
  if (entry.round_index < 1) throw ConfigError("round_index must be a positive integer");
  entry.test = test_from_json(j.at("test"));
  if (j.contains("relevance") && !j.at("relevance").is_null()) {
    const auto& r = j.at("relevance");
    RelevanceScore score;
    score.score = require_number(r, "score");
    score.rationale = r.contains("rationale") && r.at("rationale").is_string()
                          ? r.at("rationale").get<std::string>()
                          : "";
    if (score.score < 0.0 || score.score > 1.0)
      throw ConfigError("relevance.score must lie in [0,1]");
    entry.relevance = score;
  }
  entry.disposition = disposition_from_name(require_string(j, "disposition"));
  if (j.contains("p") && !j.at("p").is_null()) entry.p = j.at("p").get<double>();
  if (j.contains("e") && !j.at("e").is_null()) entry.e = j.at("e").get<double>();
  entry.cumulative_e_after = require_number(j, "cumulative_e_after");
  entry.clamped = j.contains("clamped") && j.at("clamped").is_boolean()
                      ? j.at("clamped").get<bool>()
                      : false;
  const bool aggregated = entry.disposition == Disposition::Aggregated;
  if (aggregated != (entry.p.has_value() && entry.e.has_value()))
    throw ConfigError("disposition Aggregated requires exactly the entries with p and e present");
  return entry;
}

Verdict parse_ledger_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<nlohmann::json> objects;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw ConfigError(std::string("corrupt ledger line: ") + err.what());
    }
    objects.push_back(std::move(j));
  }
  if (objects.empty()) throw ConfigError("ledger file is empty");
  const nlohmann::json trailer = objects.back();
  objects.pop_back();
  if (!trailer.is_object() || !trailer.contains("hypothesis"))
    throw ConfigError("ledger file lacks the trailing verdict object");
  Verdict v;
  v.hypothesis = require_string(trailer, "hypothesis");
  if (!trailer.contains("validated") || !trailer.at("validated").is_boolean())
    throw ConfigError("verdict.validated must be a boolean");
  v.validated = trailer.at("validated").get<bool>();
  v.final_e = require_number(trailer, "final_e");
  v.stopping_index = static_cast<int>(require_number(trailer, "stopping_index"));
  v.alpha = require_number(trailer, "alpha");
  for (const nlohmann::json& obj : objects) v.ledger.push_back(entry_from_json(obj));
  return v;
}

}  // namespace popper::io
