#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "popper/engine.hpp"

namespace popper::worlds {

// One scripted proposal: the relevance score it will receive and the
// execution outcome if it passes the gate. `p` is required when status is
// Succeeded. name/description are optional fixture dressing; defaults are
// generated from the entry ordinal.
struct ScriptEntry {
  double relevance = 1.0;
  engine::ExecStatus status = engine::ExecStatus::Succeeded;
  std::optional<double> p;
  std::string name;
  std::string description;
};

using Script = std::vector<ScriptEntry>;

enum class WorldKind { NullUniform, AlternativeBeta, ScriptedStream, AdaptiveAdversary };

struct WorldModel {
  WorldKind kind = WorldKind::NullUniform;
  std::optional<double> beta_a; // Beta(a,1) shape, required for AlternativeBeta
  std::optional<Script> script; // required for ScriptedStream
  std::uint64_t seed = 0;
  void validate() const; // throws evidence::ConfigError
};

const char* world_kind_name(WorldKind kind);
WorldKind world_kind_from_name(const std::string& name); // throws ConfigError

// The three provider roles of one world, sharing whatever state the world
// needs. A triple serves exactly one engine run.
struct ProviderTriple {
  std::shared_ptr<engine::DesignProvider> design;
  std::shared_ptr<engine::RelevanceProvider> relevance;
  std::shared_ptr<engine::ExecutionProvider> executor;
};

// p ~ Uniform(0,1], relevance always 1.0, generically named tests.
ProviderTriple null_world_provider(std::uint64_t seed, std::uint64_t stream_id = 0);

// p ~ Beta(a,1): P(p <= t) = t^a, sampled as U^(1/a). a=1 reproduces the null
// world's p-stream exactly.
ProviderTriple alternative_world_provider(double beta_a, std::uint64_t seed,
                                          std::uint64_t stream_id = 0);

// History-dependent scheduling (test names, relevance scores and execution
// failures all derive from hashes of the ledger) over a p-stream that stays
// conditionally Uniform(0,1]: successful attempts consume a dedicated
// counter-RNG stream in order, independent of the scheduling.
ProviderTriple adaptive_adversary_provider(std::uint64_t seed, std::uint64_t stream_id = 0);

// Replays the script verbatim; one entry per proposal, retries of a failing
// execution observe the same entry. Exhausting the script throws
// engine::ProviderError (the engine's abort path).
ProviderTriple scripted_provider(Script script);

// Dispatch on world.kind; seed taken from the arguments, not the model, so
// Monte Carlo replicates can re-key a shared WorldModel.
ProviderTriple make_world_provider(const WorldModel& world, std::uint64_t seed,
                                   std::uint64_t stream_id);

}  // namespace popper::worlds
