#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "popper/engine.hpp"

namespace popper::io {

// %.17g: enough significant digits to round-trip any double exactly.
std::string format_real17(double value);

std::string json_escape(std::string_view text);

const char* disposition_name(engine::Disposition d);
engine::Disposition disposition_from_name(const std::string& name); // throws ConfigError

// One JSON object per line, field names exactly as in the type definition,
// reals with 17 significant digits, absent optionals rendered as null.
// Hand-rendered so the byte layout is deterministic.
std::string entry_to_jsonl(const engine::LedgerEntry& entry);

// Trailing object {hypothesis, validated, final_e, stopping_index, alpha}.
std::string verdict_trailer_to_jsonl(const engine::Verdict& verdict);

// Entries then trailer, each line newline-terminated.
std::string ledger_file_text(const engine::Verdict& verdict);

// Wire-side value representations (shared field schema with the JSONL form).
nlohmann::json test_to_json(const engine::FalsificationTest& test);
engine::FalsificationTest test_from_json(const nlohmann::json& j); // throws ConfigError
nlohmann::json entry_to_json(const engine::LedgerEntry& entry);
engine::LedgerEntry entry_from_json(const nlohmann::json& j); // throws ConfigError

// Inverse of ledger_file_text: entries plus trailing verdict object. The
// returned verdict has no summary and no aggregation hint (the file format
// does not record the aggregation mode). Throws ConfigError on corrupt input.
engine::Verdict parse_ledger_jsonl(const std::string& text);

}  // namespace popper::io
