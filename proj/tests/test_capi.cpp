#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "popper.h"
#include "popper/evidence.hpp"
#include "popper/ledger_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

const char* kScriptedConfig = R"({
  "hypothesis": "X regulates Y",
  "engine": {"alpha": 0.1, "max_tests": 5},
  "source": "scripted",
  "script": [
    {"relevance": 0.8, "status": "ok", "p": 1.0},
    {"relevance": 0.8, "status": "ok", "p": 1.0},
    {"relevance": 0.8, "status": "ok", "p": 0.0942},
    {"relevance": 0.8, "status": "ok", "p": 8.06e-05}
  ]
})";

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(popper_status_name(POPPER_OK)) == "ok");
  CHECK(std::string(popper_status_name(POPPER_INVALID_ARGUMENT)) == "invalid_argument");
  CHECK(std::string(popper_status_name(POPPER_CONFIG)) == "config");
  CHECK(std::string(popper_status_name(POPPER_ABORTED)) == "aborted");
  CHECK(std::string(popper_status_name(POPPER_FIXTURE_MISMATCH)) == "fixture_mismatch");
  CHECK(std::string(popper_status_name(POPPER_IO)) == "io");
  CHECK(std::string(popper_status_name(POPPER_INTERNAL)) == "internal");
  CHECK(std::string(popper_version()) == "0.1.0");
}

TEST_CASE("calibrate mirrors the core and reports errors") {
  double e = 0.0;
  REQUIRE(popper_calibrate(0.031, 0.5, 1e-300, &e) == POPPER_OK);
  popper::evidence::CalibratorConfig cfg;
  CHECK(e == popper::evidence::calibrate(popper::evidence::clamp_p(0.031, cfg), cfg).value);
  CHECK(std::string(popper_last_error()).empty());

  CHECK(popper_calibrate(0.5, 1.5, 1e-300, &e) == POPPER_CONFIG);
  CHECK_FALSE(std::string(popper_last_error()).empty());

  const double nan = std::nan("");
  CHECK(popper_calibrate(nan, 0.5, 1e-300, &e) == POPPER_INVALID_ARGUMENT);
  CHECK(popper_calibrate(0.5, 0.5, 1e-300, nullptr) == POPPER_INVALID_ARGUMENT);

  // A successful call clears the sticky message.
  REQUIRE(popper_calibrate(1.0, 0.5, 1e-300, &e) == POPPER_OK);
  CHECK(e == 0.5);
  CHECK(std::string(popper_last_error()).empty());
}

TEST_CASE("fisher combine over arrays") {
  const double ps[] = {0.1, 0.1};
  double p = 0.0;
  REQUIRE(popper_fisher_combine(ps, 2, &p) == POPPER_OK);
  CHECK(p == popper::evidence::fisher_combine({0.1, 0.1}).value);

  CHECK(popper_fisher_combine(ps, 0, &p) == POPPER_INVALID_ARGUMENT);
  CHECK(popper_fisher_combine(nullptr, 2, &p) == POPPER_INVALID_ARGUMENT);
}

TEST_CASE("multiple-testing selections over arrays") {
  const double es[] = {29.0, 18.0, 2.0};
  int rejected[3] = {0, 0, 0};
  size_t n = 99;

  REQUIRE(popper_bonferroni(es, 3, 0.1, rejected, &n) == POPPER_OK);
  CHECK(n == 0); // 29 < 3/0.1

  REQUIRE(popper_ebh(es, 3, 0.1, rejected, &n) == POPPER_OK);
  REQUIRE(n == 2);
  CHECK(rejected[0] == 1);
  CHECK(rejected[1] == 2);

  const double strong[] = {40.0, 35.0, 5.0};
  REQUIRE(popper_bonferroni(strong, 3, 0.1, rejected, &n) == POPPER_OK);
  REQUIRE(n == 2);
  CHECK(rejected[0] == 1);
  CHECK(rejected[1] == 2);

  CHECK(popper_ebh(es, 3, 1.5, rejected, &n) == POPPER_INVALID_ARGUMENT);
  CHECK(popper_ebh(es, 0, 0.1, rejected, &n) == POPPER_INVALID_ARGUMENT);
  CHECK(popper_bonferroni(nullptr, 3, 0.1, rejected, &n) == POPPER_INVALID_ARGUMENT);
}

TEST_CASE("scripted validation run through the C surface") {
  popper_run* run = nullptr;
  REQUIRE(popper_run_validation_json(kScriptedConfig, nullptr, &run) == POPPER_OK);
  REQUIRE(run != nullptr);
  CHECK(popper_run_validated(run) == 1);
  CHECK(popper_run_final_e(run) == doctest::Approx(22.682297641798968).epsilon(1e-9));
  CHECK(popper_run_stopping_index(run) == 4);
  CHECK(popper_run_alpha(run) == 0.1);
  CHECK(popper_run_ledger_size(run) == 4);
  CHECK(popper_run_aborted(run) == 0);
  CHECK(std::string(popper_run_abort_reason(run)).empty());
  CHECK(std::string(popper_run_summary(run)).find("FINAL: PASS E=22.6823 tau=4") !=
        std::string::npos);

  // The embedded JSONL parses back to the same verdict.
  const popper::engine::Verdict parsed =
      popper::io::parse_ledger_jsonl(popper_run_ledger_jsonl(run));
  CHECK(parsed.validated);
  CHECK(parsed.ledger.size() == 4);
  popper_run_free(run);
}

TEST_CASE("aborted runs still hand back the partial ledger") {
  const char* config = R"({
    "hypothesis": "h",
    "source": "scripted",
    "script": [{"status": "ok", "p": 0.5}]
  })";
  popper_run* run = nullptr;
  REQUIRE(popper_run_validation_json(config, nullptr, &run) == POPPER_ABORTED);
  REQUIRE(run != nullptr);
  CHECK(popper_run_aborted(run) == 1);
  CHECK(std::string(popper_run_abort_reason(run)).find("script exhausted") !=
        std::string::npos);
  CHECK(popper_run_ledger_size(run) == 1);
  CHECK(popper_run_validated(run) == 0);
  CHECK(std::string(popper_last_error()).find("run aborted") != std::string::npos);
  popper_run_free(run);
}

TEST_CASE("config failures leave no run behind") {
  popper_run* run = reinterpret_cast<popper_run*>(0x1);
  CHECK(popper_run_validation_json("{nope", nullptr, &run) == POPPER_CONFIG);
  CHECK(run == nullptr);
  CHECK(std::string(popper_last_error()).find("invalid JSON") != std::string::npos);

  run = reinterpret_cast<popper_run*>(0x1);
  const char* unknown_key = R"({
    "hypothesis": "h",
    "source": "scripted",
    "script": [{"status": "ok", "p": 0.5}],
    "engine": {"alhpa": 0.1}
  })";
  CHECK(popper_run_validation_json(unknown_key, nullptr, &run) == POPPER_CONFIG);
  CHECK(run == nullptr);

  CHECK(popper_run_validation_json(nullptr, nullptr, &run) == POPPER_INVALID_ARGUMENT);
  CHECK(popper_run_validation_json(kScriptedConfig, nullptr, nullptr) ==
        POPPER_INVALID_ARGUMENT);
}

TEST_CASE("monte carlo plans through the C surface") {
  const char* plan = R"({
    "world": {"kind": "null_uniform"},
    "engine": {"alpha": 0.1},
    "replicates": 200,
    "base_seed": 7
  })";
  popper_mc* mc = nullptr;
  REQUIRE(popper_mc_run_json(plan, nullptr, &mc) == POPPER_OK);
  REQUIRE(mc != nullptr);

  const std::string csv = popper_mc_csv(mc);
  CHECK(csv.rfind("world,parameter,value,rate,ci_low,ci_high,replicates,mean_runtime_ms\n",
                  0) == 0);
  CHECK(csv.find("null_uniform") != std::string::npos);

  const json report = json::parse(std::string(popper_mc_report_json(mc)));
  CHECK(report.at("plan").at("replicates") == 200);
  CHECK(report.at("estimates").size() == 1);

  const std::string assertions = popper_mc_assertions(mc);
  CHECK(assertions.find("TYPE-I OK") != std::string::npos);
  CHECK(popper_mc_all_assertions_passed(mc) == 1);
  popper_mc_free(mc);

  popper_mc* bad = reinterpret_cast<popper_mc*>(0x1);
  CHECK(popper_mc_run_json(R"({"replicates": 0})", nullptr, &bad) == POPPER_CONFIG);
  CHECK(bad == nullptr);
}

TEST_CASE("fixture replay through the C surface") {
  char* report = nullptr;
  REQUIRE(popper_replay_path(POPPER_FIXTURE_DIR "/trajectories", &report) == POPPER_OK);
  REQUIRE(report != nullptr);
  CHECK(count_occurrences(report, "REPLAY OK") == 4);
  CHECK(count_occurrences(report, "REPLAY MISMATCH") == 0);
  popper_string_free(report);
}

TEST_CASE("tampered fixtures are reported as mismatches") {
  const fs::path dir = fs::temp_directory_path() / "popper_capi_tamper";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::ifstream in(fs::path(POPPER_FIXTURE_DIR) / "trajectories" / "grap2_o1.json");
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string original = "20.944182166241685";
  const auto pos = text.find(original);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, original.size(), "19.0");
  std::ofstream(dir / "tampered.json") << text;

  char* report = nullptr;
  CHECK(popper_replay_path(dir.string().c_str(), &report) == POPPER_FIXTURE_MISMATCH);
  REQUIRE(report != nullptr);
  CHECK(count_occurrences(report, "REPLAY MISMATCH") == 1);
  CHECK(std::string(popper_last_error()).find("mismatch") != std::string::npos);
  popper_string_free(report);
  fs::remove_all(dir);
}

TEST_CASE("replay path errors") {
  char* report = reinterpret_cast<char*>(0x1);
  CHECK(popper_replay_path("/no/such/fixture/path", &report) == POPPER_CONFIG);
  CHECK(report == nullptr);

  const fs::path empty_dir = fs::temp_directory_path() / "popper_capi_empty";
  fs::remove_all(empty_dir);
  fs::create_directories(empty_dir);
  report = reinterpret_cast<char*>(0x1);
  CHECK(popper_replay_path(empty_dir.string().c_str(), &report) == POPPER_CONFIG);
  CHECK(report == nullptr);
  fs::remove_all(empty_dir);

  CHECK(popper_replay_path(nullptr, &report) == POPPER_INVALID_ARGUMENT);
}

TEST_CASE("summary re-rendering from ledger text") {
  popper_run* run = nullptr;
  REQUIRE(popper_run_validation_json(kScriptedConfig, nullptr, &run) == POPPER_OK);

  char* summary = nullptr;
  REQUIRE(popper_render_summary_from_ledger(popper_run_ledger_jsonl(run), &summary) ==
          POPPER_OK);
  REQUIRE(summary != nullptr);
  CHECK(std::string(summary).find("HYPOTHESIS: X regulates Y") != std::string::npos);
  CHECK(std::string(summary).find("FINAL: PASS E=22.6823 tau=4") != std::string::npos);
  popper_string_free(summary);
  popper_run_free(run);

  char* bad = reinterpret_cast<char*>(0x1);
  CHECK(popper_render_summary_from_ledger("not jsonl", &bad) == POPPER_CONFIG);
  CHECK(bad == nullptr);
}

TEST_CASE("free functions tolerate NULL") {
  popper_run_free(nullptr);
  popper_mc_free(nullptr);
  popper_string_free(nullptr);
  CHECK(popper_run_validated(nullptr) == 0);
  CHECK(popper_run_final_e(nullptr) == 0.0);
  CHECK(std::string(popper_run_summary(nullptr)).empty());
  CHECK(std::string(popper_mc_csv(nullptr)).empty());
  CHECK(popper_mc_all_assertions_passed(nullptr) == 0);
}
