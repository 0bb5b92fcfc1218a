#include "popper/worlds.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "popper/rng.hpp"

namespace popper::worlds {

using engine::ExecStatus;
using engine::ExperimentOutcome;
using engine::FalsificationTest;
using engine::Ledger;
using engine::LedgerEntry;
using engine::ProviderError;
using engine::RelevanceScore;

void WorldModel::validate() const {
  if (kind == WorldKind::AlternativeBeta) {
    if (!beta_a || !(*beta_a > 0.0) || *beta_a > 1.0)
      throw evidence::ConfigError("world.beta_a must lie in (0,1] for alternative_beta");
  }
  if (kind == WorldKind::ScriptedStream && (!script || script->empty()))
    throw evidence::ConfigError("world.script is required and non-empty for scripted");
}

const char* world_kind_name(WorldKind kind) {
  switch (kind) {
    case WorldKind::NullUniform: return "null_uniform";
    case WorldKind::AlternativeBeta: return "alternative_beta";
    case WorldKind::ScriptedStream: return "scripted";
    case WorldKind::AdaptiveAdversary: return "adaptive_adversary";
  }
  return "unknown";
}

WorldKind world_kind_from_name(const std::string& name) {
  if (name == "null_uniform") return WorldKind::NullUniform;
  if (name == "alternative_beta") return WorldKind::AlternativeBeta;
  if (name == "scripted") return WorldKind::ScriptedStream;
  if (name == "adaptive_adversary") return WorldKind::AdaptiveAdversary;
  throw evidence::ConfigError("unknown world kind: " + name);
}

namespace {

// Stream salts per provider role; executors of all stochastic worlds share
// salt 3 so AlternativeBeta(a=1) replays the null world's p-stream exactly.
constexpr std::uint64_t kExecSalt = 3;

FalsificationTest synthetic_test(const char* world, int ordinal) {
  FalsificationTest t;
  t.name = std::string(world) + "-test-" + std::to_string(ordinal);
  t.description = "synthetic draw " + std::to_string(ordinal) + " from the " + world + " world";
  t.null_sub_hypothesis = "the emitted p-value is super-uniform";
  t.alternative_sub_hypothesis = "the emitted p-value concentrates near zero";
  return t;
}

struct SyntheticDesign final : engine::DesignProvider {
  const char* world;
  int calls = 0;
  explicit SyntheticDesign(const char* w) : world(w) {}
  FalsificationTest propose(const std::string&, const Ledger&) override {
    return synthetic_test(world, ++calls);
  }
};

struct ConstantRelevance final : engine::RelevanceProvider {
  RelevanceScore score(const std::string&, const FalsificationTest&) override {
    return RelevanceScore{1.0, "synthetic world: every draw bears on the hypothesis"};
  }
};

// inv_a = 1/a; a=1 leaves the uniform untouched (pow(u,1) == u).
struct BetaExecutor final : engine::ExecutionProvider {
  rng::CounterRng stream;
  double inv_a;
  BetaExecutor(std::uint64_t seed, std::uint64_t stream_id, double a)
      : stream(seed, stream_id, kExecSalt), inv_a(1.0 / a) {}
  ExperimentOutcome execute(const FalsificationTest&) override {
    const double p = std::pow(stream.uniform_positive(), inv_a);
    return ExperimentOutcome{ExecStatus::Succeeded, p, ""};
  }
};

// ---------------------------------------------------------------- scripted

struct ScriptedState {
  Script script;
  std::size_t cursor = 0;          // next entry to propose
  std::size_t pending = 0;         // entry currently in flight
};

FalsificationTest scripted_test(const ScriptEntry& entry, std::size_t ordinal) {
  FalsificationTest t;
  t.name = entry.name.empty() ? "scripted-test-" + std::to_string(ordinal) : entry.name;
  t.description = entry.description.empty()
                      ? "scripted fixture entry " + std::to_string(ordinal)
                      : entry.description;
  t.null_sub_hypothesis = "scripted null sub-hypothesis " + std::to_string(ordinal);
  t.alternative_sub_hypothesis = "scripted alternative sub-hypothesis " + std::to_string(ordinal);
  return t;
}

struct ScriptedDesign final : engine::DesignProvider {
  std::shared_ptr<ScriptedState> st;
  explicit ScriptedDesign(std::shared_ptr<ScriptedState> s) : st(std::move(s)) {}
  FalsificationTest propose(const std::string&, const Ledger&) override {
    if (st->cursor >= st->script.size())
      throw ProviderError("script exhausted after " + std::to_string(st->script.size()) +
                          " entries");
    st->pending = st->cursor++;
    return scripted_test(st->script[st->pending], st->pending + 1);
  }
};

struct ScriptedRelevance final : engine::RelevanceProvider {
  std::shared_ptr<ScriptedState> st;
  explicit ScriptedRelevance(std::shared_ptr<ScriptedState> s) : st(std::move(s)) {}
  RelevanceScore score(const std::string&, const FalsificationTest&) override {
    return RelevanceScore{st->script[st->pending].relevance, "scripted relevance"};
  }
};

struct ScriptedExecutor final : engine::ExecutionProvider {
  std::shared_ptr<ScriptedState> st;
  explicit ScriptedExecutor(std::shared_ptr<ScriptedState> s) : st(std::move(s)) {}
  ExperimentOutcome execute(const FalsificationTest&) override {
    const ScriptEntry& entry = st->script[st->pending];
    if (entry.status == ExecStatus::Succeeded)
      return ExperimentOutcome{ExecStatus::Succeeded, entry.p, "scripted success"};
    return ExperimentOutcome{ExecStatus::Failed, std::nullopt, "scripted failure"};
  }
};

// ---------------------------------------------------------------- adversary

// Order-sensitive digest of the ledger; the adversary may key any decision on
// this, which exercises arbitrary history dependence without touching the
// p-stream.
std::uint64_t history_digest(std::uint64_t seed_key, const Ledger& history) {
  std::uint64_t h = seed_key;
  for (const LedgerEntry& entry : history) {
    h = rng::hash_combine(h, static_cast<std::uint64_t>(entry.round_index));
    h = rng::hash_combine(h, static_cast<std::uint64_t>(entry.disposition));
    std::uint64_t bits = 0;
    std::memcpy(&bits, &entry.cumulative_e_after, sizeof(bits));
    h = rng::hash_combine(h, bits);
  }
  return h;
}

struct AdversaryState {
  std::uint64_t seed_key;
  rng::CounterRng p_stream;
  std::uint64_t last_test_digest = 0;
  int proposals = 0;
  AdversaryState(std::uint64_t seed, std::uint64_t stream_id)
      : seed_key(rng::hash_combine(rng::mix64(seed), stream_id)),
        p_stream(seed, stream_id, kExecSalt) {}
};

struct AdversaryDesign final : engine::DesignProvider {
  std::shared_ptr<AdversaryState> st;
  explicit AdversaryDesign(std::shared_ptr<AdversaryState> s) : st(std::move(s)) {}
  FalsificationTest propose(const std::string&, const Ledger& history) override {
    const std::uint64_t digest = history_digest(st->seed_key, history);
    st->last_test_digest = digest;
    const int ordinal = ++st->proposals;
    FalsificationTest t;
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(digest));
    t.name = "adversary-test-" + std::to_string(ordinal) + "-" + hex;
    t.description = (digest & 1) ? "targets the most recent evidence swing"
                                 : "revisits an earlier line of attack";
    t.null_sub_hypothesis = "the emitted p-value is super-uniform given the history";
    t.alternative_sub_hypothesis = "the emitted p-value concentrates near zero";
    return t;
  }
};

// ~10% of proposals score below the default 0.8 gate.
struct AdversaryRelevance final : engine::RelevanceProvider {
  std::shared_ptr<AdversaryState> st;
  explicit AdversaryRelevance(std::shared_ptr<AdversaryState> s) : st(std::move(s)) {}
  RelevanceScore score(const std::string&, const FalsificationTest&) override {
    const std::uint64_t h = rng::hash_combine(st->last_test_digest, 0x5e1ec7ed);
    const bool reject = (h % 10) == 0;
    return RelevanceScore{reject ? 0.6 : 1.0,
                          reject ? "adversary withholds relevance this time"
                                 : "adversary plays along"};
  }
};

// Each attempt fails with probability 1/3, scheduled purely from the history
// digest and attempt count; successful attempts draw the next uniform from
// the dedicated p-stream, so every emitted p is conditionally Uniform(0,1].
struct AdversaryExecutor final : engine::ExecutionProvider {
  std::shared_ptr<AdversaryState> st;
  int attempts = 0;
  explicit AdversaryExecutor(std::shared_ptr<AdversaryState> s) : st(std::move(s)) {}
  ExperimentOutcome execute(const FalsificationTest&) override {
    const std::uint64_t h =
        rng::hash_combine(st->last_test_digest, static_cast<std::uint64_t>(++attempts));
    if (h % 3 == 0)
      return ExperimentOutcome{ExecStatus::Failed, std::nullopt, "adversary sabotages the run"};
    return ExperimentOutcome{ExecStatus::Succeeded, st->p_stream.uniform_positive(), ""};
  }
};

}  // namespace

ProviderTriple null_world_provider(std::uint64_t seed, std::uint64_t stream_id) {
  return ProviderTriple{std::make_shared<SyntheticDesign>("null-uniform"),
                        std::make_shared<ConstantRelevance>(),
                        std::make_shared<BetaExecutor>(seed, stream_id, 1.0)};
}

ProviderTriple alternative_world_provider(double beta_a, std::uint64_t seed,
                                          std::uint64_t stream_id) {
  if (!(beta_a > 0.0) || beta_a > 1.0)
    throw evidence::ConfigError("beta_a must lie in (0,1]");
  return ProviderTriple{std::make_shared<SyntheticDesign>("alternative-beta"),
                        std::make_shared<ConstantRelevance>(),
                        std::make_shared<BetaExecutor>(seed, stream_id, beta_a)};
}

ProviderTriple adaptive_adversary_provider(std::uint64_t seed, std::uint64_t stream_id) {
  auto st = std::make_shared<AdversaryState>(seed, stream_id);
  return ProviderTriple{std::make_shared<AdversaryDesign>(st),
                        std::make_shared<AdversaryRelevance>(st),
                        std::make_shared<AdversaryExecutor>(st)};
}

ProviderTriple scripted_provider(Script script) {
  if (script.empty()) throw evidence::ConfigError("scripted provider requires a non-empty script");
  for (std::size_t i = 0; i < script.size(); ++i) {
    const ScriptEntry& entry = script[i];
    if (entry.status == ExecStatus::Succeeded &&
        (!entry.p || !std::isfinite(*entry.p)))
      throw evidence::ConfigError("script entry " + std::to_string(i + 1) +
                                  ": status \"ok\" requires a finite p");
    if (!(entry.relevance >= 0.0) || entry.relevance > 1.0)
      throw evidence::ConfigError("script entry " + std::to_string(i + 1) +
                                  ": relevance must lie in [0,1]");
  }
  auto st = std::make_shared<ScriptedState>();
  st->script = std::move(script);
  return ProviderTriple{std::make_shared<ScriptedDesign>(st),
                        std::make_shared<ScriptedRelevance>(st),
                        std::make_shared<ScriptedExecutor>(st)};
}

ProviderTriple make_world_provider(const WorldModel& world, std::uint64_t seed,
                                   std::uint64_t stream_id) {
  world.validate();
  switch (world.kind) {
    case WorldKind::NullUniform: return null_world_provider(seed, stream_id);
    case WorldKind::AlternativeBeta:
      return alternative_world_provider(*world.beta_a, seed, stream_id);
    case WorldKind::ScriptedStream: return scripted_provider(*world.script);
    case WorldKind::AdaptiveAdversary: return adaptive_adversary_provider(seed, stream_id);
  }
  throw evidence::ConfigError("unhandled world kind");
}

}  // namespace popper::worlds
