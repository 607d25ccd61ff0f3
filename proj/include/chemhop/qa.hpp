#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/llm.hpp"
#include "chemhop/relation.hpp"

namespace chemhop::qa {

using json = nlohmann::json;
using relation::Triplet;

/// A path edge as seen by question generation: `head` is the entity the
/// question asks for. When the stored edge points the other way, `inverted`
/// is set and head/tail are swapped relative to the stored triplet.
struct OrientedTriplet {
  Triplet triplet;
  bool inverted = false;

  /// Relation text shown to the generator.
  std::string relation_text() const;
  json to_json() const;
  static OrientedTriplet from_json(const json& j);
  bool operator==(const OrientedTriplet&) const = default;
};

struct OneHopQA {
  std::string question;
  std::string answer;
  OrientedTriplet edge;
  bool used_metadata = false;

  json to_json() const;
  static OneHopQA from_json(const json& j);
  bool operator==(const OneHopQA&) const = default;
};

struct MultiHopQA {
  std::string id;
  std::string question;
  std::string answer;
  std::size_t hop_count = 0;
  std::size_t shortcut_count = 0;
  std::string path_id;
  std::vector<std::string> context_chunk_ids;
  std::vector<OneHopQA> sub_qas;

  json to_json() const;
  static MultiHopQA from_json(const json& j);
  bool operator==(const MultiHopQA&) const = default;
};

inline constexpr std::size_t kMaxAnswerWords = 8;

struct GenOptions {
  std::string model_id;
  llm::DecodeParams decode;
};

/// True when `candidate` names the same entity as `expected` (case, whitespace
/// and known abbreviations ignored).
bool same_entity(std::string_view candidate, std::string_view expected);

/// Names of `edge.head` that must not appear in a question about it.
std::vector<std::string> answer_names(const OrientedTriplet& edge, const std::vector<std::string>& extra = {});

std::string render_onehop_prompt(const OrientedTriplet& edge, std::string_view text,
                                 const std::optional<std::string>& meta);

/// One question whose answer is edge.head. A wrong answer or a leaked answer
/// each get one corrective re-ask. Throws AnswerMismatch, AnswerLeak or MalformedOutput.
/// `surface_forms` lists other spellings of the head that count as leaks.
OneHopQA gen_onehop(const OrientedTriplet& edge, std::string_view chunk_text, const std::optional<std::string>& meta,
                    llm::Gateway& gateway, const GenOptions& opts, const std::vector<std::string>& surface_forms = {});

/// "Q1: ...\nA1: ...\nQ2: ..." in chain order.
std::string format_qas(const std::vector<OneHopQA>& sub_qas);

/// Each sub-answer after the first must be an entity of the previous sub-question's triplet.
/// Throws ChainBroken.
void check_chain(const std::vector<OneHopQA>& sub_qas);

/// Chain the one-hop questions into one question whose answer is sub_qas[0].answer.
/// A single sub-question passes through unchanged. Throws ChainBroken,
/// AnswerMismatch, AnswerLeak or MalformedOutput.
MultiHopQA aggregate(const std::vector<OneHopQA>& sub_qas, llm::Gateway& gateway, const GenOptions& opts);

}  // namespace chemhop::qa
