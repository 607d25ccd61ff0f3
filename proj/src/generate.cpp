#include "chemhop/generate.hpp"

#include <spdlog/spdlog.h>

#include "chemhop/enrich.hpp"
#include "chemhop/error.hpp"

namespace chemhop::generate {

std::vector<qa::OrientedTriplet> orient(const sampler::PathSample& path) {
  std::size_t forward = 0;
  for (std::size_t i = 0; i < path.edges.size(); ++i) {
    if (path.edges[i].head == path.nodes[i]) ++forward;
  }
  const bool reverse = forward * 2 < path.edges.size();
  std::vector<qa::OrientedTriplet> out;
  const std::size_t k = path.edges.size();
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t i = reverse ? k - 1 - j : j;
    const std::string& from = reverse ? path.nodes[i + 1] : path.nodes[i];
    qa::OrientedTriplet ot{path.edges[i], false};
    if (ot.triplet.head != from) {
      std::swap(ot.triplet.head, ot.triplet.tail);
      ot.inverted = true;
    }
    out.push_back(std::move(ot));
  }
  return out;
}

namespace {

verify::Reason reason_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::AnswerLeak: return verify::Reason::AnswerInQuestion;
    default: return verify::Reason::Malformed;
  }
}

}  // namespace

Outcome generate_for_path(const sampler::PathSample& path, const graph::KnowledgeGraph& g,
                          const corpus::ChunkIndex& chunks, llm::Gateway& gateway, const Options& opts) {
  const std::string item_id = "q-" + path.path_id();
  Outcome out;
  auto drop = [&](verify::Stage stage, verify::Reason reason, std::string detail, std::string key = {}) {
    verify::DropRecord d;
    d.item_id = item_id;
    d.stage = stage;
    d.reason = reason;
    d.detail = std::move(detail);
    d.judge_cache_key = std::move(key);
    out.drop = std::move(d);
    return out;
  };

  std::vector<qa::OneHopQA> subs;
  try {
    for (const auto& edge : orient(path)) {
      auto chunk = chunks.find(edge.triplet.source_chunk_id);
      if (chunk == chunks.end()) {
        throw Error(ErrorCode::MissingInput, "chunk '" + edge.triplet.source_chunk_id + "' not in corpus");
      }
      std::vector<std::string> surfaces;
      std::optional<std::string> meta;
      if (auto idx = g.index_of(edge.triplet.head)) {
        const auto& node = g.node(*idx);
        surfaces.assign(node.entity.surface_forms.begin(), node.entity.surface_forms.end());
        if (node.enrichment) {
          std::string m = enrich::render_metadata(*node.enrichment);
          if (!m.empty()) meta = m;
        }
      }
      const std::string& text = chunk->second.text;
      qa::OneHopQA sub = qa::gen_onehop(edge, text, std::nullopt, gateway, opts.generator, surfaces);
      if (opts.verify_hops) {
        auto v = verify::verify_onehop(sub, verify::onehop_context(text, std::nullopt), gateway, opts.verifier);
        if (!v.passed && v.reason == verify::Reason::MultipleValidAnswers && meta) {
          sub = qa::gen_onehop(edge, text, meta, gateway, opts.generator, surfaces);
          v = verify::verify_onehop(sub, verify::onehop_context(text, meta), gateway, opts.verifier);
        }
        if (!v.passed) return drop(v.stage, *v.reason, "hop " + std::to_string(subs.size() + 1) + ": " + sub.question,
                                   v.cache_key);
      }
      subs.push_back(std::move(sub));
    }
    qa::MultiHopQA m = qa::aggregate(subs, gateway, opts.generator);
    m.id = item_id;
    m.path_id = path.path_id();
    m.shortcut_count = path.shortcut_count;
    for (const auto& s : m.sub_qas) m.context_chunk_ids.push_back(s.edge.triplet.source_chunk_id);
    out.item = std::move(m);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::AnswerLeak:
      case ErrorCode::AnswerMismatch:
      case ErrorCode::MalformedOutput:
      case ErrorCode::ChainBroken:
        spdlog::info("path {} discarded: {}", path.path_id(), e.what());
        return drop(subs.size() < path.k ? verify::Stage::OneHop : verify::Stage::Final, reason_for(e.code()),
                    std::string(to_string(e.code())) + ": " + e.what());
      default:
        throw;
    }
  }
  return out;
}

}  // namespace chemhop::generate
