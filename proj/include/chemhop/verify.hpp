#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/corpus.hpp"
#include "chemhop/eval.hpp"
#include "chemhop/llm.hpp"
#include "chemhop/qa.hpp"

namespace chemhop::verify {

using json = nlohmann::json;

enum class Stage { OneHop, Path, Leak, Length, Final };
enum class Reason { MultipleValidAnswers, AnswerInQuestion, NotChemistry, Unanswerable, OverlongAnswer, Malformed };

std::string_view to_string(Stage s);
std::string_view to_string(Reason r);
Stage parse_stage(std::string_view s);
Reason parse_reason(std::string_view s);

struct Verdict {
  bool passed = false;
  Stage stage = Stage::Final;
  std::optional<Reason> reason;  // absent when passed
  std::string raw_judge_text;
  std::string cache_key;

  json to_json() const;
};

struct JudgeOptions {
  std::string model_id;
  llm::DecodeParams decode;
};

/// Case-insensitive first alphabetic token: "yes" or "no"; anything else is nullopt.
std::optional<bool> parse_yes_no(std::string_view reply);

/// Context shown to the one-hop judge: the chunk text, plus the entity
/// metadata when the question was generated with it.
std::string onehop_context(std::string_view chunk_text, const std::optional<std::string>& meta);

/// Factual, unambiguous and answerable from the context. "no" fails with
/// multiple_valid_answers; no yes/no after one re-ask fails with malformed.
Verdict verify_onehop(const qa::OneHopQA& qa, std::string_view context, llm::Gateway& gateway, const JudgeOptions& opts);

/// Numbered triplets followed by "[Source i]: text" blocks, in chain order.
std::string render_path_text(const qa::MultiHopQA& m, const corpus::ChunkIndex& chunks);

/// Answerable from the rendered path. Empty path text fails as unanswerable without a judge call.
Verdict verify_path(const qa::MultiHopQA& m, std::string_view path_text, llm::Gateway& gateway,
                    const JudgeOptions& opts);

/// Deterministic: any sub-answer (or the answer) in the question fails with
/// answer_in_question; an answer longer than qa::kMaxAnswerWords fails with overlong_answer.
Verdict leak_and_length_gate(const qa::MultiHopQA& m);

struct DropRecord {
  std::string item_id;
  Stage stage = Stage::Final;
  Reason reason = Reason::Malformed;
  std::string judge_cache_key;
  std::string detail;
  std::map<std::string, bool> model_tallies;  // consensus drops only

  json to_json() const;
  static DropRecord from_json(const json& j);
};

DropRecord drop_from(const std::string& item_id, const Verdict& v, std::string detail = {});

struct ConsensusResult {
  std::vector<qa::MultiHopQA> kept;
  std::vector<DropRecord> dropped;
};

/// Drop items that no model answered correctly. Records must cover every
/// (item, model) pair for at least two models. Throws IncompleteRecords.
ConsensusResult consensus_filter(const std::vector<qa::MultiHopQA>& items, const std::vector<eval::EvalRecord>& records);

enum class Rating { Good, Ok, Poor };
enum class Confidence { High, Low };

struct Annotation {
  std::string item_id;
  Rating rating = Rating::Good;
  Confidence confidence = Confidence::High;
};

/// JSONL records with item_id, rating (good|ok|poor) and confidence (high|low);
/// also accepts a schema header line. Throws CorruptFile on unknown values.
std::vector<Annotation> read_annotations(const std::filesystem::path& path);

struct AnnotationSummary {
  std::size_t total = 0;
  std::size_t high_confidence = 0;
  std::size_t good = 0, ok = 0, poor = 0;  // among high-confidence ratings
  std::size_t unknown_items = 0;           // ids not present in the dataset

  json to_json() const;
  std::string markdown() const;
};

AnnotationSummary summarize_annotations(const std::vector<Annotation>& annotations,
                                        const std::vector<qa::MultiHopQA>& dataset);

}  // namespace chemhop::verify
