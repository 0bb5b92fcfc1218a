// Command-line front end over the C API (popper.h). The tool owns argument
// parsing, file IO and the seed override; all statistics live behind the API.
#include <popper.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;

int exit_code_for(popper_status status) {
  switch (status) {
    case POPPER_OK: return 0;
    case POPPER_ABORTED: return 2;
    case POPPER_FIXTURE_MISMATCH: return 3;
    default: return 1;
  }
}

int fail_with(popper_status status) {
  std::cerr << "error (" << popper_status_name(status) << "): " << popper_last_error() << "\n";
  return exit_code_for(status);
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << text;
  return out.good();
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// The only artifact allowed to contain timestamps; everything else must be
// byte-identical across reruns.
bool write_run_meta(const fs::path& out_dir, const std::string& command,
                    const std::string& config_path, const std::optional<std::uint64_t>& seed,
                    popper_status status) {
  nlohmann::json meta{{"command", command},
                      {"config_path", config_path},
                      {"seed_override", nullptr},
                      {"status", popper_status_name(status)},
                      {"version", popper_version()},
                      {"timestamp_utc", iso8601_now()}};
  if (seed) meta["seed_override"] = *seed;
  return write_file(out_dir / "run_meta.json", meta.dump(2) + "\n");
}

struct LoadedConfig {
  std::string text;     // possibly seed-patched JSON
  std::string base_dir; // directory of the config file
};

// Loads the config and applies --seed: validate configs get world.seed,
// plans get base_seed. Scripted/remote validate configs have no seed to
// patch; the override is rejected so a typo does not silently do nothing.
std::optional<LoadedConfig> load_config(const std::string& path,
                                        const std::optional<std::uint64_t>& seed,
                                        bool is_plan, std::string& error) {
  std::optional<std::string> text = read_file(path);
  if (!text) {
    error = "cannot open config: " + path;
    return std::nullopt;
  }
  LoadedConfig loaded;
  loaded.base_dir = fs::path(path).parent_path().string();
  if (loaded.base_dir.empty()) loaded.base_dir = ".";
  if (!seed) {
    loaded.text = std::move(*text);
    return loaded;
  }
  nlohmann::json j = nlohmann::json::parse(*text, nullptr, false);
  if (j.is_discarded()) {
    error = "invalid JSON in config: " + path;
    return std::nullopt;
  }
  if (is_plan) {
    j["base_seed"] = *seed;
  } else if (j.contains("world") && j["world"].is_object()) {
    j["world"]["seed"] = *seed;
  } else {
    error = "--seed needs a config with a world block (scripted runs are seedless)";
    return std::nullopt;
  }
  loaded.text = j.dump();
  return loaded;
}

int run_validate(const std::string& config_path, const std::string& out_dir,
                 const std::optional<std::uint64_t>& seed, bool verbose) {
  std::string error;
  std::optional<LoadedConfig> cfg = load_config(config_path, seed, /*is_plan=*/false, error);
  if (!cfg) {
    std::cerr << "error: " << error << "\n";
    return 1;
  }
  popper_run* run = nullptr;
  const popper_status status =
      popper_run_validation_json(cfg->text.c_str(), cfg->base_dir.c_str(), &run);
  if (!run) return fail_with(status);

  std::cout << popper_run_summary(run);
  if (verbose) std::cout << popper_run_ledger_jsonl(run);
  if (status == POPPER_ABORTED)
    std::cerr << "error (aborted): " << popper_run_abort_reason(run) << "\n";

  int code = exit_code_for(status);
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !write_file(fs::path(out_dir) / "ledger.jsonl", popper_run_ledger_jsonl(run)) ||
        !write_file(fs::path(out_dir) / "summary.txt", popper_run_summary(run)) ||
        !write_run_meta(out_dir, "validate", config_path, seed, status)) {
      std::cerr << "error: cannot write artifacts under " << out_dir << "\n";
      code = 1;
    }
  }
  popper_run_free(run);
  return code;
}

int run_plan(const std::string& command, const std::string& config_path,
             const std::string& out_dir, const std::optional<std::uint64_t>& seed,
             bool verbose) {
  std::string error;
  std::optional<LoadedConfig> cfg = load_config(config_path, seed, /*is_plan=*/true, error);
  if (!cfg) {
    std::cerr << "error: " << error << "\n";
    return 1;
  }
  popper_mc* mc = nullptr;
  const popper_status status = popper_mc_run_json(cfg->text.c_str(), cfg->base_dir.c_str(), &mc);
  if (status != POPPER_OK) return fail_with(status);

  std::cout << popper_mc_assertions(mc);
  if (verbose) std::cout << popper_mc_csv(mc);

  int code = 0;
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !write_file(fs::path(out_dir) / "results.csv", popper_mc_csv(mc)) ||
        !write_file(fs::path(out_dir) / "report.json", popper_mc_report_json(mc)) ||
        !write_run_meta(out_dir, command, config_path, seed, status)) {
      std::cerr << "error: cannot write artifacts under " << out_dir << "\n";
      code = 1;
    }
  }
  popper_mc_free(mc);
  return code;
}

int run_replay(const std::string& path) {
  char* report = nullptr;
  const popper_status status = popper_replay_path(path.c_str(), &report);
  if (report) {
    std::cout << report;
    popper_string_free(report);
  }
  if (status != POPPER_OK) return fail_with(status);
  return 0;
}

int run_report(const std::string& out_dir) {
  const fs::path ledger_path = fs::path(out_dir) / "ledger.jsonl";
  std::optional<std::string> text = read_file(ledger_path.string());
  if (!text) {
    std::cerr << "error: cannot open " << ledger_path.string() << "\n";
    return 1;
  }
  char* summary = nullptr;
  const popper_status status = popper_render_summary_from_ledger(text->c_str(), &summary);
  if (status != POPPER_OK) return fail_with(status);
  std::cout << summary;
  popper_string_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential falsification runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string replay_target = "fixtures/trajectories";
  std::optional<std::uint64_t> seed;
  bool verbose = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "JSON config path")->required();
    cmd->add_option("--out", out_dir, "Directory for artifacts (omit to print only)");
    cmd->add_option("--seed", seed, "Override the config's seed");
    cmd->add_flag("-v,--verbose", verbose, "Print secondary artifacts to stdout");
  };

  CLI::App* validate = app.add_subcommand("validate", "Run one hypothesis validation");
  add_common(validate, true);
  CLI::App* simulate = app.add_subcommand("simulate", "Run a Monte Carlo plan");
  add_common(simulate, true);
  CLI::App* sweep = app.add_subcommand("sweep", "Run a Monte Carlo parameter sweep");
  add_common(sweep, true);
  CLI::App* replay = app.add_subcommand("replay", "Replay trajectory fixtures");
  replay->add_option("path", replay_target, "Fixture file or directory");
  CLI::App* report = app.add_subcommand("report", "Re-render the summary from saved artifacts");
  report->add_option("--out", out_dir, "Artifact directory holding ledger.jsonl")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return run_validate(config_path, out_dir, seed, verbose);
  if (simulate->parsed()) return run_plan("simulate", config_path, out_dir, seed, verbose);
  if (sweep->parsed()) return run_plan("sweep", config_path, out_dir, seed, verbose);
  if (replay->parsed()) return run_replay(replay_target);
  if (report->parsed()) return run_report(out_dir);
  return 1;
}
