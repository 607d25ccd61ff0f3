#include <doctest.h>

#include <filesystem>

#include "chemhop/error.hpp"
#include "chemhop/io.hpp"
#include "chemhop/prompts.hpp"
#include "chemhop/verify.hpp"
#include "fixture_server.hpp"
#include "prompt_examples.hpp"

using namespace chemhop;
using namespace chemhop::verify;
namespace fs = std::filesystem;

namespace {

std::pair<std::unique_ptr<llm::Gateway>, std::shared_ptr<llm::ScriptedProvider>> scripted(const json& rules) {
  llm::Gateway::Options o;
  o.retry.base_delay = std::chrono::milliseconds(1);
  auto gw = std::make_unique<llm::Gateway>(o);
  auto p = llm::ScriptedProvider::from_json(json{{"rules", rules}});
  gw->add_provider("s", p);
  gw->route("*", "s");
  return {std::move(gw), p};
}

qa::OneHopQA onehop(std::string q, std::string a) {
  return {std::move(q), std::move(a), {relation::Triplet{"x", "r", "y", "d1#c0", "d1"}, false}, false};
}

qa::MultiHopQA item(std::string q, std::string a, std::vector<std::string> sub_answers = {}) {
  qa::MultiHopQA m;
  m.id = "q-1";
  m.question = std::move(q);
  m.answer = std::move(a);
  for (auto& s : sub_answers) m.sub_qas.push_back(onehop("sub?", s));
  m.hop_count = m.sub_qas.size();
  return m;
}

const JudgeOptions kJudge{"judge", {}};

}  // namespace

TEST_CASE("yes/no parsing reads the first word") {
  CHECK(parse_yes_no("yes") == true);
  CHECK(parse_yes_no("Yes.") == true);
  CHECK(parse_yes_no("  \"yes.\"") == true);
  CHECK(parse_yes_no("No, the question has two answers.") == false);
  CHECK(parse_yes_no("NO") == false);
  CHECK_FALSE(parse_yes_no("Maybe yes").has_value());
  CHECK_FALSE(parse_yes_no("").has_value());
  CHECK_FALSE(parse_yes_no("yesterday").has_value());
}

TEST_CASE("labels round-trip") {
  for (auto s : {Stage::OneHop, Stage::Path, Stage::Leak, Stage::Length, Stage::Final}) {
    CHECK(parse_stage(to_string(s)) == s);
  }
  for (auto r : {Reason::MultipleValidAnswers, Reason::AnswerInQuestion, Reason::NotChemistry, Reason::Unanswerable,
                 Reason::OverlongAnswer, Reason::Malformed}) {
    CHECK(parse_reason(to_string(r)) == r);
  }
  CHECK(to_string(Reason::MultipleValidAnswers) == "multiple_valid_answers");
  CHECK_THROWS_AS(parse_reason("bogus"), Error);
}

TEST_CASE("prompt examples replayed through a scripted judge") {
  json rules = json::array();
  for (const auto& ex : testing::kOneHopPromptExamples) {
    rules.push_back({{"contains", {"### Question:\n" + ex.question + "\n"}}, {"reply", ex.valid ? "yes" : "no"}});
  }
  for (const auto& ex : testing::kPathPromptExamples) {
    rules.push_back({{"contains", {"### Question:\n" + ex.question + "\n"}}, {"reply", ex.valid ? "Yes." : "No."}});
  }
  auto [gw, p] = scripted(rules);
  for (const auto& ex : testing::kOneHopPromptExamples) {
    CHECK(std::string(prompts::kOneHopVerification).find(ex.question) != std::string::npos);
    auto v = verify_onehop(onehop(ex.question, "A"), "context", *gw, kJudge);
    CHECK(v.passed == ex.valid);
    CHECK(v.stage == Stage::OneHop);
    if (!ex.valid) CHECK(v.reason == Reason::MultipleValidAnswers);
  }
  for (const auto& ex : testing::kPathPromptExamples) {
    CHECK(std::string(prompts::kPathVerification).find(ex.question) != std::string::npos);
    auto v = verify_path(item(ex.question, "A"), "1. (a, r, b)\n", *gw, kJudge);
    CHECK(v.passed == ex.valid);
    CHECK(v.stage == Stage::Path);
    if (!ex.valid) CHECK(v.reason == Reason::Unanswerable);
    CHECK_FALSE(v.cache_key.empty());
  }
}

TEST_CASE("judge output without yes/no is re-asked once, then malformed") {
  auto [gw, p] = scripted(json::parse(R"([
    {"contains": ["Answer with only"], "reply": "yes"},
    {"contains": ["### Question:\nFixable?"], "reply": "I think so"},
    {"contains": ["### Question:"], "reply": "Unclear."}])"));
  CHECK(verify_onehop(onehop("Fixable?", "a"), "c", *gw, kJudge).passed);
  auto [gw2, p2] = scripted(json::parse(R"([{"contains": ["### Question:"], "reply": "Unclear."}])"));
  auto v = verify_onehop(onehop("Hopeless?", "a"), "c", *gw2, kJudge);
  CHECK_FALSE(v.passed);
  CHECK(v.reason == Reason::Malformed);
  CHECK(p2->calls() == 2);
}

TEST_CASE("empty path text fails without a judge call") {
  auto [gw, p] = scripted(json::array());
  auto v = verify_path(item("Q?", "A"), "  \n", *gw, kJudge);
  CHECK_FALSE(v.passed);
  CHECK(v.reason == Reason::Unanswerable);
  CHECK(p->calls() == 0);
}

TEST_CASE("context rendering") {
  CHECK(onehop_context("text", std::nullopt) == "text");
  CHECK(onehop_context("text", std::string("CH2O2")) == "text\n\nInformation about the answer entity: CH2O2");
  qa::MultiHopQA m = item("Q?", "methane", {"methane", "carbon dioxide"});
  m.sub_qas[0].edge = {relation::Triplet{"methane", "is oxidized to form", "carbon dioxide", "d1#c0", "d1"}, false};
  m.sub_qas[1].edge = {relation::Triplet{"carbon dioxide", "uses", "photosynthesis", "d2#c0", "d2"}, true};
  m.context_chunk_ids = {"d1#c0", "d2#c0"};
  corpus::ChunkIndex chunks = {{"d1#c0", {"d1#c0", "d1", 0, "Methane burns.", 2, false}},
                               {"d2#c0", {"d2#c0", "d2", 0, "Plants use CO2.", 3, false}}};
  CHECK(render_path_text(m, chunks) ==
        "1. (methane, is oxidized to form, carbon dioxide)\n2. (photosynthesis, uses, carbon dioxide)\n"
        "\n[Source 1]: Methane burns.\n\n[Source 2]: Plants use CO2.\n");
  chunks.erase("d2#c0");
  CHECK_THROWS_AS(render_path_text(m, chunks), Error);
}

TEST_CASE("leak and length gate") {
  CHECK(leak_and_length_gate(item("What is oxidized to produce a substance used in photosynthesis?", "Methane",
                                  {"Methane", "Carbon Dioxide"}))
            .passed);
  auto leak = leak_and_length_gate(item("What is oxidized to form carbon dioxide?", "Methane", {"Methane", "Carbon Dioxide"}));
  CHECK_FALSE(leak.passed);
  CHECK(leak.stage == Stage::Leak);
  CHECK(leak.reason == Reason::AnswerInQuestion);
  CHECK(leak.raw_judge_text == "Carbon Dioxide");
  auto own = leak_and_length_gate(item("Is methane a gas?", "methane", {"methane"}));
  CHECK(own.reason == Reason::AnswerInQuestion);
  auto longer = leak_and_length_gate(item("Q?", "one two three four five six seven eight nine", {}));
  CHECK(longer.stage == Stage::Length);
  CHECK(longer.reason == Reason::OverlongAnswer);
  CHECK(leak_and_length_gate(item("Q?", "one two three four five six seven eight", {})).passed);
  // Substrings inside other words are not leaks.
  CHECK(leak_and_length_gate(item("What forms methanol?", "methane", {"methane"})).passed);
}

TEST_CASE("drop records") {
  Verdict v;
  v.stage = Stage::Path;
  v.reason = Reason::Unanswerable;
  v.cache_key = "k";
  v.raw_judge_text = "no";
  auto d = drop_from("q-1", v);
  CHECK(d.detail == "no");
  auto back = DropRecord::from_json(d.to_json());
  CHECK(back.item_id == "q-1");
  CHECK(back.stage == Stage::Path);
  CHECK(back.reason == Reason::Unanswerable);
  CHECK(back.judge_cache_key == "k");
  v.passed = true;
  v.reason.reset();
  CHECK_THROWS_AS(drop_from("q-1", v), Error);
}

TEST_CASE("consensus filter drops items nobody answered") {
  std::vector<qa::MultiHopQA> items = {item("A?", "a"), item("B?", "b")};
  items[0].id = "q-a";
  items[1].id = "q-b";
  auto rec = [](std::string id, std::string model, bool ok) {
    eval::EvalRecord r;
    r.item_id = std::move(id);
    r.model_id = std::move(model);
    r.correct = ok;
    return r;
  };
  std::vector<eval::EvalRecord> records = {rec("q-a", "m1", false), rec("q-a", "m2", true), rec("q-b", "m1", false),
                                           rec("q-b", "m2", false), rec("q-b", "m2", false)};
  auto r = consensus_filter(items, records);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0].id == "q-a");
  REQUIRE(r.dropped.size() == 1);
  CHECK(r.dropped[0].item_id == "q-b");
  CHECK(r.dropped[0].stage == Stage::Final);
  CHECK(r.dropped[0].model_tallies == std::map<std::string, bool>{{"m1", false}, {"m2", false}});

  try {
    consensus_filter(items, {rec("q-a", "m1", true), rec("q-b", "m1", true)});
    FAIL("expected IncompleteRecords");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompleteRecords);
  }
  CHECK_THROWS_AS(consensus_filter(items, {rec("q-a", "m1", true), rec("q-b", "m1", true), rec("q-a", "m2", true)}),
                  Error);
}

TEST_CASE("annotation import and summary") {
  auto dir = testing::scratch_dir("verify");
  write_file_atomic(dir / "a.jsonl",
                    "{\"schema\":\"chemhop.annotations\",\"version\":1}\n"
                    "{\"item_id\":\"q-a\",\"rating\":\"good\",\"confidence\":\"high\"}\n"
                    "{\"item_id\":\"q-b\",\"rating\":\"OK\",\"confidence\":\"high\"}\n\n"
                    "{\"item_id\":\"q-c\",\"rating\":\"poor\",\"confidence\":\"high\"}\n"
                    "{\"item_id\":\"q-a\",\"rating\":\"poor\",\"confidence\":\"low\"}\n"
                    "{\"item_id\":\"q-z\",\"rating\":\"good\",\"confidence\":\"high\"}\n");
  auto anns = read_annotations(dir / "a.jsonl");
  CHECK(anns.size() == 5);
  std::vector<qa::MultiHopQA> ds(3);
  ds[0].id = "q-a";
  ds[1].id = "q-b";
  ds[2].id = "q-c";
  auto s = summarize_annotations(anns, ds);
  CHECK(s.total == 5);
  CHECK(s.high_confidence == 4);
  CHECK(s.good == 2);
  CHECK(s.ok == 1);
  CHECK(s.poor == 1);
  CHECK(s.unknown_items == 1);
  CHECK(s.markdown().find("approved (good or ok): 75.0%") != std::string::npos);

  write_file_atomic(dir / "bad.jsonl", "{\"item_id\":\"q\",\"rating\":\"great\",\"confidence\":\"high\"}\n");
  CHECK_THROWS_AS(read_annotations(dir / "bad.jsonl"), Error);
  write_file_atomic(dir / "bad.jsonl", "{\"item_id\":\"q\"}\n");
  CHECK_THROWS_AS(read_annotations(dir / "bad.jsonl"), Error);
  fs::remove_all(dir);
}
