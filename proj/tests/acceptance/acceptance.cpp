// Runs each acceptance criterion once and prints one PASS/FAIL line per criterion.
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "chemhop/corpus.hpp"
#include "chemhop/eval.hpp"
#include "chemhop/graph.hpp"
#include "chemhop/io.hpp"
#include "chemhop/sampler.hpp"
#include "chemhop/text.hpp"
#include "chemhop/verify.hpp"
#include "e2e.hpp"
#include "oracles.hpp"
#include "prompt_examples.hpp"

using namespace chemhop;
namespace fs = std::filesystem;

namespace {

// Collects failed expectations for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string detail() const {
    std::string s = std::to_string(total_ - failed_) + "/" + std::to_string(total_) + " checks";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }

 private:
  std::size_t total_ = 0, failed_ = 0;
  std::vector<std::string> failures_;
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string num(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

void graph_stats_oracle(Checks& c) {
  auto named = [](std::vector<std::string> names, std::vector<std::pair<std::string, std::string>> edges) {
    std::vector<entity::Entity> ents;
    for (auto& n : names) ents.push_back({n, {n}, "d0#c0", {"d0#c0"}});
    std::vector<relation::Triplet> trips;
    for (auto& [h, t] : edges) trips.push_back({h, "r", t, "d0#c0", "d0"});
    return graph::stats(graph::build(ents, {}, trips));
  };
  auto tri = named({"a", "b", "c"}, {{"a", "b"}, {"b", "c"}, {"c", "a"}});
  c.expect(tri.density == 1.0 && tri.degree_min == 2.0 && tri.degree_max == 2.0 && tri.degree_avg == 2.0 &&
               tri.component_count == 1 && tri.largest_component == 3 && tri.avg_clustering == 1.0 &&
               !tri.degree_assortativity,
           "triangle closed form");
  auto p4 = named({"a", "b", "c", "d"}, {{"a", "b"}, {"b", "c"}, {"c", "d"}});
  c.expect(p4.density == 0.5 && p4.degree_min == 1.0 && p4.degree_max == 2.0 && p4.degree_avg == 1.5 &&
               p4.component_count == 1 && p4.largest_component == 4 && p4.avg_clustering == 0.0 &&
               p4.degree_assortativity && *p4.degree_assortativity == -0.5,
           "path graph closed form");

  std::mt19937_64 rng(2024);
  for (std::uint64_t g = 0; g < 20; ++g) {
    std::size_t nodes = 5 + rng() % 96;
    std::size_t edges = nodes / 2 + rng() % (2 * nodes);
    auto spec = testing::random_graph(1000 + g, nodes, edges, 1 + nodes / 3);
    auto s = graph::stats(testing::build_graph(spec));
    std::vector<std::string> names;
    for (const auto& e : spec.entities) names.push_back(e.canonical_name);
    auto o = testing::brute_stats(names, spec.triplets);
    const std::string tag = "graph " + std::to_string(g) + ": ";
    c.expect(s.node_count == o.nodes && s.simple_edge_count == o.simple_edges, tag + "counts");
    c.expect(near(s.density, o.density, 1e-9), tag + "density " + num(s.density) + " vs " + num(o.density));
    c.expect(near(s.degree_min, o.degree_min, 1e-9) && near(s.degree_max, o.degree_max, 1e-9) &&
                 near(s.degree_avg, o.degree_avg, 1e-9),
             tag + "degrees");
    c.expect(s.component_count == o.components && s.largest_component == o.largest_component, tag + "components");
    c.expect(near(s.avg_clustering, o.avg_clustering, 1e-9), tag + "clustering");
    c.expect(s.degree_assortativity.has_value() == o.assortativity.has_value() &&
                 (!o.assortativity || near(*s.degree_assortativity, *o.assortativity, 1e-9)),
             tag + "assortativity");
  }
}

void sampler_soundness(Checks& c) {
  std::size_t sampled = 0;
  for (std::uint64_t seed = 1; sampled < 1000; ++seed) {
    auto spec = testing::random_graph(seed, 30, 60, 20);
    auto g = testing::build_graph(spec);
    for (std::size_t k = 1; k <= 4 && sampled < 1000; ++k) {
      auto all = testing::enumerate_paths(spec.triplets, k, sampler::SourceScope::Document);
      if (all.empty()) continue;
      auto paths = sampler::sample_paths(g, k, 25, seed);
      auto again = sampler::sample_paths(g, k, 25, seed);
      std::string a, b;
      for (const auto& p : paths) a += p.to_json().dump() + "\n";
      for (const auto& p : again) b += p.to_json().dump() + "\n";
      c.expect(a == b, "seed " + std::to_string(seed) + " k=" + std::to_string(k) + " not byte-exact");
      for (const auto& p : paths) {
        ++sampled;
        std::set<std::string> distinct(p.nodes.begin(), p.nodes.end());
        c.expect(p.nodes.size() == k + 1 && distinct.size() == k + 1 && p.edges.size() == k, "node count");
        std::set<std::string> sources;
        bool adjacent = true;
        for (std::size_t i = 0; i < p.edges.size() && i + 1 < p.nodes.size(); ++i) {
          const auto& e = p.edges[i];
          adjacent = adjacent && ((e.head == p.nodes[i] && e.tail == p.nodes[i + 1]) ||
                                  (e.tail == p.nodes[i] && e.head == p.nodes[i + 1]));
          sources.insert(e.source_doc_id);
        }
        c.expect(adjacent, "consecutive adjacency");
        c.expect(sources.size() == k, "distinct sources");
        c.expect(all.contains(testing::canonical_orientation(p.nodes)), "path missing from enumeration");
      }
    }
  }
  c.expect(sampled >= 1000, "sampled " + std::to_string(sampled));
}

void chunker_contract(Checks& c) {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 500; ++round) {
    auto paras = testing::random_paragraphs(rng, 1 + rng() % 15, 1 + rng() % 200);
    auto chunks = corpus::chunk_text(text::join(paras, "\n\n"), "d");
    std::vector<std::string> rebuilt;
    bool bounded = true;
    for (const auto& ch : chunks) {
      auto ps = text::split_paragraphs(ch.text);
      if (ch.oversize) bounded = bounded && ps.size() == 1 && ch.word_count > corpus::kMaxChunkWords;
      else bounded = bounded && ch.word_count <= corpus::kMaxChunkWords;
      rebuilt.insert(rebuilt.end(), ps.begin(), ps.end());
    }
    c.expect(bounded, "case " + std::to_string(round) + " chunk size");
    c.expect(rebuilt == paras, "case " + std::to_string(round) + " reconstruction");
  }
}

void golden_end_to_end(Checks& c) {
  testing::E2eRun e2e("acceptance");
  for (const char* stage : {"ingest", "extract-entities", "extract-relations", "enrich", "build-graph",
                            "sample-paths", "gen-qa", "verify-qa"}) {
    int rc = e2e.run(stage);
    c.expect(rc == 0, std::string(stage) + " exited " + std::to_string(rc));
    if (rc != 0) return;
  }
  auto dataset = read_records(e2e.run_dir() / "dataset.jsonl", "chemhop.dataset").records;
  bool methane = false, formic = false;
  for (const auto& j : dataset) {
    auto m = qa::MultiHopQA::from_json(j);
    if (m.answer == "Methane" && m.hop_count == 3 &&
        m.question == "What is oxidized to produce a substance that is used in a process that results in Oxygen?") {
      methane = true;
    }
    if (m.answer == "carbonylation reactions" && m.hop_count == 2 &&
        text::contains_phrase(m.question, "carbon dioxide")) {
      formic = true;
    }
    c.expect(!m.sub_qas.empty() && m.answer == m.sub_qas.front().answer, m.id + ": answer is not the first sub-answer");
    for (const auto& s : m.sub_qas) c.expect(!text::contains_phrase(m.question, s.answer), m.id + ": leaks " + s.answer);
  }
  c.expect(methane, "methane aggregation item missing");
  c.expect(formic, "formic acid / carbonylation item missing");
}

long whitespace_count(const std::string& s) {
  std::istringstream in(s);
  long n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

void grading_and_metrics(Checks& c) {
  auto d = testing::synthetic_dataset(40, 40);
  json echo = json::array(), half = json::array();
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    const auto& m = d.items[i];
    json when = {"Question: " + m.question};
    echo.push_back({{"contains", when}, {"reply", json{{"answer", m.answer}}}});
    half.push_back({{"contains", when}, {"reply", json{{"answer", i % 2 ? std::string("nothing like it") : m.answer}}}});
  }
  for (const auto& [rules, expected] : {std::pair{echo, 100.0}, std::pair{half, 50.0}}) {
    llm::Gateway gw;
    auto model = llm::ScriptedProvider::from_json(json{{"rules", rules}});
    auto judge = llm::ScriptedProvider::from_json(
        json{{"rules", json::array({{{"contains", {"CORRECT or INCORRECT"}}, {"reply", "INCORRECT"}}})}});
    gw.add_provider("model", model);
    gw.add_provider("judge", judge);
    gw.route("m", "model");
    gw.route("j", "judge");
    eval::EvalSetup setup;
    setup.model_id = "m";
    setup.judge_model = "j";
    setup.concurrency = 4;
    auto rep = eval::report(eval::run_eval(d.items, setup, d.chunks, gw));
    c.expect(rep.correctness_rate_pct == expected, "correctness " + num(rep.correctness_rate_pct));
    if (expected == 100.0) c.expect(judge->calls() == 0, "judge called on exact matches");
  }

  auto s = eval::dataset_stats(d.items, d.chunks);
  std::vector<double> qc, qt, ac, at, hops, cc, ct, hc, ht, sc;
  for (const auto& m : d.items) {
    qc.push_back(static_cast<double>(testing::utf8_code_points(m.question)));
    qt.push_back(static_cast<double>(whitespace_count(m.question)));
    ac.push_back(static_cast<double>(testing::utf8_code_points(m.answer)));
    at.push_back(static_cast<double>(whitespace_count(m.answer)));
    hops.push_back(static_cast<double>(m.hop_count));
    sc.push_back(static_cast<double>(m.shortcut_count));
    double tc = 0, tt = 0;
    for (const auto& id : m.context_chunk_ids) {
      const auto& t = d.chunks.at(id).text;
      hc.push_back(static_cast<double>(testing::utf8_code_points(t)));
      ht.push_back(static_cast<double>(whitespace_count(t)));
      tc += hc.back();
      tt += ht.back();
    }
    cc.push_back(tc);
    ct.push_back(tt);
  }
  auto same = [&](const char* what, const eval::MeanSd& got, const std::vector<double>& xs) {
    auto o = testing::mean_sd_direct(xs);
    c.expect(near(got.mean, o.mean, 1e-9) && near(got.sd, o.sd, 1e-9), std::string(what) + " mean/sd");
  };
  same("question chars", s.question_chars, qc);
  same("question tokens", s.question_tokens, qt);
  same("answer chars", s.answer_chars, ac);
  same("answer tokens", s.answer_tokens, at);
  same("hops", s.hops, hops);
  same("context chars", s.context_chars, cc);
  same("context tokens", s.context_tokens, ct);
  same("hop chars", s.hop_chars, hc);
  same("hop tokens", s.hop_tokens, ht);
  same("shortcuts", s.shortcuts, sc);
  c.expect(s.question_count == 40, "question count");
}

void verification_gates(Checks& c) {
  json rules = json::array();
  for (const auto* set : {&testing::kOneHopPromptExamples, &testing::kPathPromptExamples}) {
    for (const auto& ex : *set) {
      rules.push_back({{"contains", {"### Question:\n" + ex.question + "\n"}}, {"reply", ex.valid ? "yes" : "no"}});
    }
  }
  llm::Gateway gw;
  gw.add_provider("judge", llm::ScriptedProvider::from_json(json{{"rules", rules}}));
  verify::JudgeOptions jo{"judge", {}};
  for (const auto& ex : testing::kOneHopPromptExamples) {
    qa::OneHopQA q{ex.question, "A", {}, false};
    c.expect(verify::verify_onehop(q, "context", gw, jo).passed == ex.valid, "one-hop: " + ex.question);
  }
  for (const auto& ex : testing::kPathPromptExamples) {
    qa::MultiHopQA m;
    m.question = ex.question;
    m.answer = "A";
    c.expect(verify::verify_path(m, "1. (A, reacts with, B)\n", gw, jo).passed == ex.valid, "path: " + ex.question);
  }

  static const char* names[] = {"methane", "carbon dioxide", "formic acid", "palladium", "Cs2CO3",
                                "sodium hydroxide", "H2O", "photosynthesis", "ethanol", "α-Ni(OH)2"};
  std::mt19937_64 rng(50);
  std::size_t caught = 0;
  for (int i = 0; i < 50; ++i) {
    qa::MultiHopQA m;
    m.id = "leak-" + std::to_string(i);
    std::size_t hops = 1 + rng() % 4;
    std::vector<std::string> answers;
    for (std::size_t h = 0; h < hops; ++h) answers.push_back(names[rng() % std::size(names)]);
    m.answer = answers[0];
    for (const auto& a : answers) m.sub_qas.push_back({"sub?", a, {}, false});
    m.hop_count = hops;
    std::string leaked = answers[rng() % hops];
    if (rng() % 2) leaked = text::casefold(leaked);
    m.question = rng() % 2 ? "Which substance reacts with " + leaked + " under mild conditions?"
                           : leaked + " is formed by what process?";
    auto v = verify::leak_and_length_gate(m);
    if (!v.passed && v.reason == verify::Reason::AnswerInQuestion) ++caught;
  }
  c.expect(caught == 50, "leak gate caught " + std::to_string(caught) + "/50");
}

void shortcut_accounting(Checks& c) {
  std::vector<qa::MultiHopQA> items;
  corpus::ChunkIndex chunks;
  std::size_t manual = 0;
  for (std::uint64_t seed = 1; items.size() < 100; ++seed) {
    auto spec = testing::random_graph(500 + seed, 12, 40, 30);
    auto g = testing::build_graph(spec);
    for (std::size_t k = 2; k <= 4 && items.size() < 100; ++k) {
      std::vector<sampler::PathSample> paths;
      try {
        paths = sampler::sample_paths(g, k, 10, seed);
      } catch (const Error&) {
        continue;
      }
      for (const auto& p : paths) {
        if (items.size() == 100) break;
        std::size_t oracle = testing::pair_scan_shortcuts(p.nodes, spec.triplets);
        c.expect(p.shortcut_count == oracle && sampler::count_shortcuts(p, g) == oracle,
                 "path " + p.path_id() + ": " + std::to_string(p.shortcut_count) + " vs " + std::to_string(oracle));
        qa::MultiHopQA m;
        m.id = "q-" + std::to_string(items.size());
        m.question = "Q?";
        m.answer = "A";
        m.hop_count = k;
        m.shortcut_count = p.shortcut_count;
        items.push_back(std::move(m));
        manual += oracle > 0;
      }
    }
  }
  auto s = eval::dataset_stats(items, chunks);
  c.expect(s.questions_with_shortcut == manual, "questions with shortcut " + std::to_string(s.questions_with_shortcut) +
                                                    " vs " + std::to_string(manual));
  c.expect(s.questions_with_shortcut_pct == 100.0 * static_cast<double>(manual) / 100.0, "shortcut share");
  char line[96];
  std::snprintf(line, sizeof line, "| Questions w/ >= 1 shortcut | %zu (%.1f%%) |", manual,
                100.0 * static_cast<double>(manual) / 100.0);
  c.expect(eval::dataset_stats_markdown(s).find(line) != std::string::npos, "report line");
  c.expect(manual > 0 && manual < 100, "fixture has a mix of paths with and without shortcuts");
}

struct Criterion {
  const char* name;
  double limit_s;  // 0: no runtime limit
  std::function<void(Checks&)> run;
};

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> criteria = {
      {"graph statistics match the brute-force oracle", 5, graph_stats_oracle},
      {"path sampler soundness and determinism", 10, sampler_soundness},
      {"chunker contract", 2, chunker_contract},
      {"golden end-to-end with the scripted model", 30, golden_end_to_end},
      {"grading and dataset metrics", 10, grading_and_metrics},
      {"verification gates", 0, verification_gates},
      {"shortcut accounting", 0, shortcut_accounting},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks checks;
    auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("threw: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.limit_s > 0) checks.expect(secs < cr.limit_s, "runtime over " + num(cr.limit_s) + " s");
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << (checks.ok() ? "PASS " : "FAIL ") << cr.name << " (" << timing << ", " << checks.detail() << ")\n";
    failed += !checks.ok();
  }
  return failed ? 1 : 0;
}
