#include <doctest.h>

#include "ocov/errors.hpp"
#include "ocov/pipeline.hpp"
#include "support.hpp"

using namespace ocov;
namespace fs = std::filesystem;

namespace {

pipeline::Config micro_config(const fs::path& root) {
  auto c = pipeline::Config::load(root / "config.json");
  return c;
}

std::vector<bool> up_to_date(const std::vector<pipeline::StageRun>& runs) {
  std::vector<bool> out;
  for (auto& r : runs) out.push_back(r.up_to_date);
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config is strict") {
    const fs::path base = "/tmp";
    CHECK_THROWS_AS(pipeline::Config::from_json(R"({"iris_dump": "x", "typo_key": 1})", base), ConfigError);
    CHECK_THROWS_AS(pipeline::Config::from_json(R"({"cutoff_year": "2025"})", base), ConfigError);
    CHECK_THROWS_AS(pipeline::Config::from_json(R"({"workers": 0})", base), ConfigError);
    CHECK_THROWS_AS(pipeline::Config::from_json("{", base), ConfigError);
    CHECK_THROWS_AS(pipeline::Config::load("/nonexistent/config.json"), ConfigError);
    auto c = pipeline::Config::from_json(R"({"iris_dump": "d", "run_dir": "/abs/run", "cutoff_year": 2020})", "/base");
    CHECK(c.iris_dump == fs::path("/base/d"));
    CHECK(c.run_dir == fs::path("/abs/run"));
    CHECK(c.max_year() == 2021);
    pipeline::Overrides o;
    o.cutoff_year = 2010;
    o.workers = 3;
    pipeline::apply(c, o);
    CHECK(c.cutoff_year == 2010);
    CHECK(c.workers == 3);
    o.workers = 0;
    CHECK_THROWS_AS(pipeline::apply(c, o), ConfigError);
  }

  TEST_CASE("stage names and dependencies") {
    for (auto s : pipeline::kAllStages) CHECK(pipeline::parse_stage(pipeline::stage_name(s)) == s);
    CHECK_FALSE(pipeline::parse_stage("everything"));
    auto up = pipeline::upstream(pipeline::Stage::Match);
    CHECK(std::find(up.begin(), up.end(), pipeline::Stage::Dedup) != up.end());
  }

  TEST_CASE("micro corpus reproduces the hand-computed outputs") {
    testing::TempDir dir;
    auto root = testing::copy_micro(dir.path());
    auto cfg = micro_config(root);
    std::ostringstream log;
    auto runs = pipeline::run("all", cfg, log);
    CHECK(runs.size() == 6);
    pipeline::run("enrich", cfg, log);
    CHECK(testing::golden_mismatches(cfg.run_dir).empty());
    // enrich feeds the report, which is now stale until rendered again
    auto m = pipeline::Manifest::load_or_create(cfg.run_dir);
    CHECK(m.at(pipeline::Stage::Report).status == pipeline::Status::Pending);
    pipeline::run("report", cfg, log);
    m = pipeline::Manifest::load_or_create(cfg.run_dir);
    for (auto s : pipeline::kAllStages) CHECK(m.at(s).status == pipeline::Status::Complete);
    CHECK(testing::golden_mismatches(cfg.run_dir).empty());
  }

  TEST_CASE("rerun is a no-op; a changed input reruns only downstream stages") {
    testing::TempDir dir;
    auto root = testing::copy_micro(dir.path());
    auto cfg = micro_config(root);
    std::ostringstream log;
    pipeline::run("all", cfg, log);
    const auto before = testing::tree(cfg.run_dir);
    auto again = pipeline::run("all", cfg, log);
    CHECK(up_to_date(again) == std::vector<bool>(6, true));

    // A new Index edge touches only scan and what reads it.
    std::ofstream(root / "index/index_1.csv", std::ios::app) << "oci:0603-0602,omid:br/0603,omid:br/0602,2020,P1Y,no,no\n";
    auto third = pipeline::run("all", cfg, log);
    REQUIRE(third.size() == 6);
    CHECK(third[0].up_to_date);  // trim
    CHECK(third[3].up_to_date);  // match
    CHECK_FALSE(third[4].up_to_date);  // scan
    CHECK_FALSE(third[5].up_to_date);  // report
    CHECK(testing::read(cfg.run_dir / "scan/tally.csv") != testing::read(testing::fixtures() / "micro/expected/scan/tally.csv"));
    CHECK(testing::read(cfg.run_dir / "trim/iris_no_id.csv") == [&] {
      for (auto& [rel, bytes] : before)
        if (rel == "trim/iris_no_id.csv") return bytes;
      return std::string();
    }());
  }

  TEST_CASE("a damaged output forces a rerun") {
    testing::TempDir dir;
    auto root = testing::copy_micro(dir.path());
    auto cfg = micro_config(root);
    std::ostringstream log;
    pipeline::run("all", cfg, log);
    testing::write(cfg.run_dir / "dedup/unique_pids.csv", "garbage\n");
    auto runs = pipeline::run("dedup", cfg, log);
    REQUIRE(runs.size() == 1);
    CHECK_FALSE(runs[0].up_to_date);
    CHECK(testing::golden_mismatches(cfg.run_dir).size() <= 1);  // only enrich, never run here
  }

  TEST_CASE("out-of-order stage is a config error") {
    testing::TempDir dir;
    auto root = testing::copy_micro(dir.path());
    auto cfg = micro_config(root);
    std::ostringstream log;
    CHECK_THROWS_AS(pipeline::run("match", cfg, log), ConfigError);
    CHECK_THROWS_AS(pipeline::run("bogus", cfg, log), ConfigError);
  }

  TEST_CASE("exit codes") {
    CHECK(pipeline::exit_code_for(ConfigError("x")) == kExitConfig);
    CHECK(pipeline::exit_code_for(InputError("x")) == kExitInput);
    CHECK(pipeline::exit_code_for(RuntimeFailure("x")) == kExitRuntime);
    CHECK(pipeline::exit_code_for(std::runtime_error("x")) == kExitRuntime);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes of the command line") {
    testing::TempDir dir;
    auto root = testing::copy_micro(dir.path());
    const auto cfg = (root / "config.json").string();
    const auto log = dir / "log.txt";

    CHECK(testing::run_cli("", log) == 2);
    CHECK(testing::run_cli("run nonsense --config " + cfg, log) == 2);
    CHECK(testing::run_cli("run match --config " + cfg, log) == 2);
    CHECK(testing::read(log).find("needs") != std::string::npos);
    CHECK(testing::run_cli("run all --config /nonexistent.json", log) == 2);
    CHECK(testing::run_cli("run trim --config " + cfg + " --workers 0", log) == 2);

    testing::write(root / "bad.json", R"({"iris_dump": "missing_dir", "run_dir": "run2"})");
    CHECK(testing::run_cli("run trim --config " + (root / "bad.json").string(), log) == 3);

    CHECK(testing::run_cli("run all --config " + cfg, log) == 0);
    CHECK(testing::run_cli("run enrich --config " + cfg, log) == 0);
    CHECK(testing::golden_mismatches(root / "run").empty());
    CHECK(testing::run_cli("run all --config " + cfg, log) == 0);

    CHECK(testing::run_cli("run scan --config " + cfg + " --run-dir " + (dir / "elsewhere").string(), log) == 2);
    CHECK(testing::run_cli("verify --config " + cfg, log) == 0);
  }

  TEST_CASE("synth then verify through the command line") {
    testing::TempDir dir;
    testing::write(dir / "spec.json", R"({"seed": 3, "records": 60, "edges": 150})");
    const auto log = dir / "log.txt";
    CHECK(testing::run_cli("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "corpus").string(), log) == 0);
    CHECK(fs::exists(dir / "corpus/ledger.json"));
    CHECK(testing::run_cli("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "corpus").string(), log) == 2);
    CHECK(testing::run_cli("verify --config " + (dir / "corpus/config.json").string(), log) == 0);
    testing::write(dir / "badspec.json", R"({"seed": 3, "no_pid_rate": 1.5})");
    CHECK(testing::run_cli("synth --spec " + (dir / "badspec.json").string() + " --out " + (dir / "c2").string(), log) == 2);
  }
}
