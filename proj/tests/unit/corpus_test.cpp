#include <doctest.h>

#include <filesystem>
#include <random>

#include "chemhop/corpus.hpp"
#include "chemhop/error.hpp"
#include "chemhop/io.hpp"
#include "chemhop/text.hpp"
#include "fixture_server.hpp"
#include "oracles.hpp"

using namespace chemhop;
using namespace chemhop::corpus;
namespace fs = std::filesystem;

namespace {

SourceConfig fixture_source(const std::string& url) {
  SourceConfig s;
  s.base_url = url;
  s.page_size = 2;
  s.timeout_s = 5;
  s.license_allow = {"CC-BY-4.0", "CC-BY-NC-ND-4.0"};
  return s;
}

Document doc(std::string body) { return Document{"d", "t", "CC-BY-4.0", std::move(body), ""}; }

std::string words(std::size_t n, const std::string& w = "word") {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + w;
  return s;
}

}  // namespace

TEST_CASE("paged fetch keeps allow-listed documents") {
  testing::FixtureServer server;
  auto items = testing::read_json(testing::fixture_dir() / "articles.json").at("items");
  server.set_articles(items);
  auto docs = fetch_articles(fixture_source(server.url()));
  REQUIRE(docs.size() == 5);
  CHECK(docs[0].doc_id == "chem-001");
  CHECK(docs[4].doc_id == "chem-005");
  for (const auto& d : docs) {
    CHECK(d.license != "All-Rights-Reserved");
    CHECK_FALSE(d.retrieved_at.empty());
  }
  CHECK(server.requests_to("/articles") == 4);  // three full pages and one empty

  auto capped = fixture_source(server.url());
  capped.max_pages = 1;
  CHECK(fetch_articles(capped).size() == 2);
}

TEST_CASE("fetch failures") {
  testing::FixtureServer server;
  server.set_articles(json::array({json{{"id", "x"}, {"license", "CC-BY-4.0"}}}));
  try {
    fetch_articles(fixture_source(server.url()));
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaMismatch);
  }
  server.fail_next(10, 503);
  try {
    fetch_articles(fixture_source(server.url()));
    FAIL("expected SourceUnreachable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceUnreachable);
  }
  try {
    fetch_articles(fixture_source("http://127.0.0.1:1"));
    FAIL("expected SourceUnreachable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceUnreachable);
  }
}

TEST_CASE("field mapping supports dotted paths") {
  SourceConfig s;
  s.id_field = "meta.doi";
  s.body_field = "content.text";
  s.license_field = "meta.license";
  s.license_allow = {"CC0"};
  json item = {{"meta", {{"doi", "10.1/x"}, {"license", "CC0"}}}, {"content", {{"text", "body"}}}};
  auto d = document_from_item(item, s);
  REQUIRE(d);
  CHECK(d->doc_id == "10.1/x");
  CHECK(d->body_text == "body");
  CHECK(d->title.empty());
  item["meta"]["license"] = "proprietary";
  CHECK_FALSE(document_from_item(item, s).has_value());
}

TEST_CASE("local article files: JSON array or JSON lines") {
  auto dir = testing::scratch_dir("corpus");
  SourceConfig s;
  s.license_allow = {"CC-BY-4.0"};
  write_file_atomic(dir / "a.json", R"([{"id":"1","license":"CC-BY-4.0","body":"x"},{"id":"2","license":"no","body":"y"}])");
  write_file_atomic(dir / "a.jsonl", "{\"id\":\"1\",\"license\":\"CC-BY-4.0\",\"body\":\"x\"}\n\n"
                                     "{\"id\":\"3\",\"license\":\"CC-BY-4.0\",\"body\":\"z\"}\n");
  CHECK(load_articles_file(dir / "a.json", s).size() == 1);
  CHECK(load_articles_file(dir / "a.jsonl", s).size() == 2);
  write_file_atomic(dir / "bad.jsonl", "{oops\n");
  CHECK_THROWS_AS(load_articles_file(dir / "bad.jsonl", s), Error);
  fs::remove_all(dir);
}

TEST_CASE("introduction window across header styles") {
  CHECK(extract_intro_window(doc("Abstract\nx y\n\n1. Introduction\nAlpha beta.\n\nGamma.\n\n2. Methods\nNo.")) ==
        "Alpha beta.\n\nGamma.");
  CHECK(extract_intro_window(doc("# Introduction\n\nOne.\n\n# Results\n\nTwo.")) == "One.");
  CHECK(extract_intro_window(doc("INTRODUCTION:\nOne.\nTwo.\n\nConclusions\nEnd.")) == "One.\nTwo.");
  CHECK(extract_intro_window(doc("I. Introduction\nOne.\n\nII. Background\nx")) == "One.");
  CHECK(extract_intro_window(doc("1 Introduction\nOne.\n\n2 Experimental section\nx")) == "One.");
  CHECK(extract_intro_window(doc("Introduction\nOne.\n\n1.2 Catalyst design\nx")) == "One.");
}

TEST_CASE("missing introduction") {
  try {
    extract_intro_window(doc("Abstract\nNothing here.\n\nMethods\nx"));
    FAIL("expected NoIntroductionFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoIntroductionFound);
  }
  IntroOptions o;
  o.fallback_to_body_start = true;
  CHECK(extract_intro_window(doc("Plain text start.\n\nMore."), o) == "Plain text start.\n\nMore.");
  CHECK_THROWS_AS(extract_intro_window(doc("Introduction\n\n\n2. Methods\nx")), Error);
}

TEST_CASE("introduction window stops at the last paragraph within the word cap") {
  IntroOptions o;
  o.max_words = 10;
  std::string body = "Introduction\n" + words(4) + "\n\n" + words(5) + "\n\n" + words(3) + "\n\nMethods\nx";
  CHECK(text::word_count(extract_intro_window(doc(body), o)) == 9);
  std::string huge = "Introduction\n" + words(25) + "\n\n" + words(2);
  CHECK(text::word_count(extract_intro_window(doc(huge), o)) == 25);
}

TEST_CASE("chunking packs whole paragraphs") {
  std::string t = words(60, "a") + "\n\n" + words(60, "b") + "\n\n" + words(20, "c") + "\n\n" + words(200, "d") +
                  "\n\n" + words(5, "e");
  auto chunks = chunk_text(t, "doc");
  REQUIRE(chunks.size() == 4);
  CHECK(chunks[0].word_count == 120);
  CHECK(chunks[1].word_count == 20);
  CHECK(chunks[2].oversize);
  CHECK(chunks[2].word_count == 200);
  CHECK(chunks[3].text == words(5, "e"));
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    CHECK(chunks[i].ordinal == i);
    CHECK(chunks[i].chunk_id == "doc#c" + std::to_string(i));
    CHECK(chunks[i].doc_id == "doc");
  }
  CHECK(chunk_text("", "doc").empty());
}

TEST_CASE("chunking property: order-preserving, no paragraph split") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 50; ++round) {
    auto paras = testing::random_paragraphs(rng, 1 + rng() % 12, 160);
    auto chunks = chunk_text(text::join(paras, "\n\n"), "d");
    std::vector<std::string> rebuilt;
    for (const auto& c : chunks) {
      if (!c.oversize) CHECK(c.word_count <= kMaxChunkWords);
      CHECK(c.word_count == text::word_count(c.text));
      for (auto& p : text::split_paragraphs(c.text)) rebuilt.push_back(p);
    }
    CHECK(rebuilt == paras);
  }
}

TEST_CASE("documents and chunks round-trip through JSON") {
  Document d{"x", "T", "CC0", "body", "2024-01-01T00:00:00Z"};
  CHECK(Document::from_json(d.to_json()) == d);
  auto c = chunk_text("one two", "x").front();
  CHECK(Chunk::from_json(c.to_json()) == c);
}
