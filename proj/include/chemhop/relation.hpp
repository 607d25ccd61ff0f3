#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/corpus.hpp"
#include "chemhop/entity.hpp"
#include "chemhop/llm.hpp"

namespace chemhop::relation {

using json = nlohmann::json;

/// Directed fact (head, relation, tail) extracted from one chunk.
struct Triplet {
  std::string head;
  std::string relation;
  std::string tail;
  std::string source_chunk_id;
  std::string source_doc_id;

  json to_json() const;
  static Triplet from_json(const json& j);
  bool operator==(const Triplet&) const = default;
  auto operator<=>(const Triplet&) const = default;
};

inline constexpr std::size_t kDefaultMaxFacts = 10;

/// Relations too generic to keep, compared after trimming and casefolding.
bool is_weak_relation(std::string_view relation);
/// Trimmed, single-spaced; case preserved.
std::string clean_relation(std::string_view relation);

/// Accepts a Python list of 3-tuples or a JSON array of 3-element arrays.
/// Throws MalformedOutput otherwise.
std::vector<std::array<std::string, 3>> parse_tuple_list(std::string_view reply);

struct ExtractOptions {
  std::string model_id;
  llm::DecodeParams decode;
  std::size_t max_facts = kDefaultMaxFacts;
};

std::string render_relation_prompt(const std::vector<entity::Entity>& entities, std::string_view text,
                                   std::size_t max_facts);

/// Model-extracted triplets filtered to known entities and non-weak relations.
/// Returns [] without a model call when fewer than two entities are given.
std::vector<Triplet> extract_relations(const std::vector<entity::Entity>& entities, const corpus::Chunk& chunk,
                                       llm::Gateway& gateway, const ExtractOptions& opts);

}  // namespace chemhop::relation
