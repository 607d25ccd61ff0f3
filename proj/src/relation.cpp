#include "chemhop/relation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>

#include "chemhop/error.hpp"
#include "chemhop/prompts.hpp"
#include "chemhop/text.hpp"

namespace chemhop::relation {

json Triplet::to_json() const {
  return {{"head", head},
          {"relation", relation},
          {"tail", tail},
          {"source_chunk_id", source_chunk_id},
          {"source_doc_id", source_doc_id}};
}

Triplet Triplet::from_json(const json& j) {
  return Triplet{j.at("head"), j.at("relation"), j.at("tail"), j.at("source_chunk_id"),
                 j.value("source_doc_id", "")};
}

bool is_weak_relation(std::string_view relation) {
  static const std::array<std::string_view, 5> kWeak = {"is", "are", "has", "exists", "relates to"};
  const auto r = text::normalize(relation);
  return r.empty() || std::find(kWeak.begin(), kWeak.end(), r) != kWeak.end();
}

std::string clean_relation(std::string_view relation) { return text::collapse_ws(relation); }

std::vector<std::array<std::string, 3>> parse_tuple_list(std::string_view reply) {
  json v = llm::parse_literal(reply);
  if (!v.is_array()) throw Error(ErrorCode::MalformedOutput, "expected a list of tuples");
  std::vector<std::array<std::string, 3>> out;
  for (const auto& t : v) {
    if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_string() || !t[2].is_string()) {
      throw Error(ErrorCode::MalformedOutput, "tuple is not (str, str, str): " + t.dump());
    }
    out.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
  }
  return out;
}

std::string render_relation_prompt(const std::vector<entity::Entity>& entities, std::string_view chunk_text,
                                   std::size_t max_facts) {
  std::vector<std::string> names;
  for (const auto& e : entities) names.push_back(e.canonical_name);
  return text::fill_template(prompts::kRelationExtraction, {{"entities", text::py_list(names)},
                                                            {"text", std::string(chunk_text)},
                                                            {"max_facts", std::to_string(max_facts)}});
}

namespace {

const entity::Entity* resolve(const std::vector<entity::Entity>& entities, const std::string& name) {
  const auto key = entity::merge_key(name);
  const auto folded = text::normalize(name);
  for (const auto& e : entities) {
    if (entity::merge_key(e.canonical_name) == key) return &e;
    for (const auto& s : e.surface_forms) {
      if (text::normalize(s) == folded) return &e;
    }
  }
  return nullptr;
}

}  // namespace

std::vector<Triplet> extract_relations(const std::vector<entity::Entity>& entities, const corpus::Chunk& chunk,
                                       llm::Gateway& gateway, const ExtractOptions& opts) {
  if (entities.size() < 2 || opts.max_facts == 0) return {};

  llm::ChatRequest req;
  req.model_id = opts.model_id;
  req.user_text = render_relation_prompt(entities, chunk.text, opts.max_facts);
  req.decode = opts.decode;
  auto [tuples, resp] =
      llm::complete_parsed(gateway, req, parse_tuple_list, "\n\nReturn only the Python list of tuples.");

  std::vector<Triplet> out;
  for (const auto& [h, r, t] : tuples) {
    const auto* head = resolve(entities, h);
    const auto* tail = resolve(entities, t);
    std::string rel = clean_relation(r);
    if (!head || !tail) {
      spdlog::debug("triplet ({}, {}, {}) names an unknown entity in {}; dropped", h, r, t, chunk.chunk_id);
      continue;
    }
    if (head == tail || is_weak_relation(rel)) continue;
    Triplet trip{head->canonical_name, rel, tail->canonical_name, chunk.chunk_id, chunk.doc_id};
    if (std::find(out.begin(), out.end(), trip) != out.end()) continue;
    out.push_back(std::move(trip));
    if (out.size() == opts.max_facts) break;
  }
  return out;
}

}  // namespace chemhop::relation
