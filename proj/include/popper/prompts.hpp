#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>

namespace popper::remote {

// The five template ids the registry must provide; {id}.txt under the
// registry directory. Templates are opaque text with {name} placeholders.
inline constexpr std::array<const char*, 5> kPromptTemplateIds = {
    "coding_agent", "statistical_agent", "relevance_checker", "summarizer", "estimation"};

class PromptRegistry {
 public:
  // Reads all five templates; throws evidence::ConfigError when any is missing
  // or unreadable.
  static PromptRegistry load(const std::filesystem::path& dir);

  // Throws evidence::ConfigError for unknown ids.
  const std::string& text(const std::string& id) const;

  bool contains(const std::string& id) const { return texts_.count(id) > 0; }

  // Replaces every "{key}" for the provided keys; all other brace spans are
  // left untouched (templates contain placeholders the caller never binds).
  static std::string render(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

 private:
  std::map<std::string, std::string> texts_;
};

}  // namespace popper::remote
