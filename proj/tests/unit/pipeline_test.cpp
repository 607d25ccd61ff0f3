#include <doctest.h>

#include <unistd.h>

#include <filesystem>

#include "chemhop/error.hpp"
#include "chemhop/io.hpp"
#include "chemhop/pipeline.hpp"
#include "e2e.hpp"

using namespace chemhop;
using namespace chemhop::pipeline;
namespace fs = std::filesystem;

namespace {

json config() { return testing::read_json(testing::fixture_dir() / "config.json"); }

ErrorCode code_of(const json& j) {
  try {
    RunConfig::from_json(j, testing::fixture_dir());
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::vector<json> records(const fs::path& p, const std::string& schema) { return read_records(p, schema).records; }

const json* find_item(const std::vector<json>& items, const std::string& answer, std::size_t hops) {
  for (const auto& j : items) {
    if (j.at("answer") == answer && j.at("hop_count") == hops) return &j;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("config validation") {
  auto cfg = RunConfig::from_json(config(), testing::fixture_dir());
  CHECK(cfg.run_dir == testing::fixture_dir() / "run");
  CHECK(cfg.lexicon == testing::fixture_dir() / "lexicon.txt");
  CHECK(cfg.model_for("judge") == "gpt-4o-mini");
  CHECK(cfg.seed == 7u);
  CHECK(cfg.eval_models.size() == 2);
  CHECK_FALSE(cfg.config_hash.empty());

  json j = config();
  j["providers"][0]["api_key"] = "sk-inline";
  CHECK(code_of(j) == ErrorCode::ConfigInvalid);
  j = config();
  j["colour"] = "blue";
  CHECK(code_of(j) == ErrorCode::ConfigInvalid);
  j = config();
  j["models"]["summarizer"] = "gpt-4o";
  CHECK(code_of(j) == ErrorCode::ConfigInvalid);
  j = config();
  j["sampler"]["k_min"] = 3;
  j["sampler"]["k_max"] = 2;
  CHECK(code_of(j) == ErrorCode::ConfigInvalid);
  j = config();
  j["routes"]["gpt-4o"] = "nobody";
  CHECK(code_of(j) == ErrorCode::ConfigInvalid);
  j = config();
  j["providers"][0]["api_key_env"] = "not a name";
  CHECK(code_of(j) == ErrorCode::ConfigInvalid);
  CHECK_THROWS_AS(RunConfig::load(testing::fixture_dir() / "absent.json"), Error);
}

TEST_CASE("run lock excludes a second holder") {
  auto dir = testing::scratch_dir("lock");
  {
    RunLock lock(dir / ".lock");
    CHECK(fs::exists(dir / ".lock"));
    CHECK_THROWS_AS(RunLock(dir / ".lock"), Error);
  }
  CHECK_FALSE(fs::exists(dir / ".lock"));
  write_file_atomic(dir / ".lock", "999999999");
  { RunLock stale(dir / ".lock"); }
  CHECK_FALSE(fs::exists(dir / ".lock"));
  fs::remove_all(dir);
}

TEST_CASE("command line end to end") {
  testing::E2eRun e2e("pipeline");
  std::string out;
  for (const char* stage : {"ingest", "extract-entities", "extract-relations", "enrich", "build-graph"}) {
    INFO(stage);
    REQUIRE(e2e.run(stage) == 0);
  }
  REQUIRE(e2e.run("graph-stats", &out) == 0);
  CHECK(out.find("| Number of nodes | 15 |") != std::string::npos);
  REQUIRE(e2e.run("sample-paths", &out) == 0);
  REQUIRE(e2e.run("gen-qa") == 0);
  REQUIRE(e2e.run("verify-qa") == 0);

  Layout layout{e2e.run_dir()};
  CHECK(records(layout.documents(), "chemhop.documents").size() == 5);
  auto dataset = records(layout.dataset(), "chemhop.dataset");
  std::set<std::size_t> hops;
  for (const auto& j : dataset) hops.insert(j.at("hop_count").get<std::size_t>());
  for (std::size_t h = 1; h <= 3; ++h) CHECK(hops.contains(h));

  const json* methane = find_item(dataset, "Methane", 3);
  REQUIRE(methane);
  CHECK(methane->at("question") == "What is oxidized to produce a substance that is used in a process that results in Oxygen?");
  const json* formic = find_item(dataset, "carbonylation reactions", 2);
  REQUIRE(formic);
  CHECK(formic->at("sub_qas")[1].at("used_metadata") == true);
  for (const auto& j : dataset) {
    const auto& subs = j.at("sub_qas");
    CHECK(subs.size() == j.at("hop_count").get<std::size_t>());
    CHECK(j.at("answer") == subs[0].at("answer"));
  }

  SUBCASE("reruns reproduce artifacts") {
    auto paths = records(layout.paths(), "chemhop.paths");
    REQUIRE(e2e.run("sample-paths") == 0);
    REQUIRE(e2e.run("gen-qa") == 0);
    REQUIRE(e2e.run("verify-qa") == 0);
    CHECK(records(layout.paths(), "chemhop.paths") == paths);
    CHECK(records(layout.dataset(), "chemhop.dataset") == dataset);
    REQUIRE(e2e.run("sample-paths --seed 8") == 0);
  }

  SUBCASE("evaluation, consensus, report and annotations") {
    REQUIRE(e2e.run("evaluate --run-id r1", &out) == 0);
    CHECK(out.find("| gpt-4o | with |") != std::string::npos);
    auto recs = records(layout.runs() / "r1" / "records.jsonl", "chemhop.eval_records");
    CHECK(recs.size() == dataset.size() * 4);
    REQUIRE(e2e.run("verify-qa --consensus-run r1", &out) == 0);
    CHECK(records(layout.consensus_dataset(), "chemhop.dataset").empty());
    auto drops = records(layout.consensus_drops(), "chemhop.drops");
    REQUIRE(drops.size() == dataset.size());
    CHECK(drops[0].at("stage") == "final");

    json ann = {{"item_id", dataset[0].at("id")}, {"rating", "good"}, {"confidence", "high"}};
    write_file_atomic(e2e.dir() / "ann.jsonl", ann.dump() + "\n");
    REQUIRE(e2e.run("annotate-import -f \"" + (e2e.dir() / "ann.jsonl").string() + "\"", &out) == 0);
    CHECK(out.find("approved (good or ok): 100.0%") != std::string::npos);
    REQUIRE(e2e.run("report --run-id r1", &out) == 0);
    CHECK(out.find("## Dataset statistics") != std::string::npos);
    CHECK(out.find("## Expert annotations") != std::string::npos);
    CHECK(fs::exists(layout.runs() / "r1" / "report.md"));
    CHECK(fs::exists(layout.runs() / "r1" / "dataset_stats.csv"));
  }

  SUBCASE("exit codes") {
    json cfg = e2e.base_config();
    cfg["sampler"].erase("seed");
    e2e.write_config(cfg);
    CHECK(e2e.run("sample-paths") == 2);
    CHECK(e2e.run("no-such-stage") == 2);
    e2e.write_config(e2e.base_config());
    write_file_atomic(layout.lock(), std::to_string(::getpid()));
    CHECK(e2e.run("build-graph") == 1);
    fs::remove(layout.lock());
    CHECK(e2e.run("build-graph") == 0);
  }
}
