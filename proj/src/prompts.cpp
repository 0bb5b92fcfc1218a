#include "popper/prompts.hpp"

#include <fstream>
#include <sstream>

#include "popper/evidence.hpp"

namespace popper::remote {

PromptRegistry PromptRegistry::load(const std::filesystem::path& dir) {
  PromptRegistry reg;
  for (const char* id : kPromptTemplateIds) {
    const std::filesystem::path file = dir / (std::string(id) + ".txt");
    std::ifstream in(file);
    if (!in) throw evidence::ConfigError("missing prompt template: " + file.string());
    std::ostringstream body;
    body << in.rdbuf();
    reg.texts_[id] = body.str();
  }
  return reg;
}

const std::string& PromptRegistry::text(const std::string& id) const {
  auto it = texts_.find(id);
  if (it == texts_.end()) throw evidence::ConfigError("unknown prompt template id: " + id);
  return it->second;
}

std::string PromptRegistry::render(const std::string& tmpl,
                                   const std::map<std::string, std::string>& vars) {
  std::string out = tmpl;
  for (const auto& [key, value] : vars) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
      out.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace popper::remote
