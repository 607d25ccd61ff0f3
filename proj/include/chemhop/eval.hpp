#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/corpus.hpp"
#include "chemhop/llm.hpp"
#include "chemhop/qa.hpp"

namespace chemhop::eval {

using json = nlohmann::json;

struct EvalSetup {
  std::string model_id;
  bool with_context = false;
  llm::DecodeParams decode;
  std::string judge_model;
  llm::DecodeParams judge_decode;
  std::string run_id;
  std::size_t concurrency = 1;
};

struct EvalRecord {
  std::string item_id;
  std::string model_id;
  bool with_context = false;
  std::string prediction;
  bool exact_match = false;
  std::optional<bool> judged_correct;
  bool correct = false;
  // Judge reply was neither CORRECT nor INCORRECT; graded incorrect.
  bool judge_flagged = false;
  double latency_s = 0.0;
  long input_tokens = 0;
  long output_tokens = 0;
  std::size_t hop_count = 0;
  std::optional<std::string> error;

  json to_json() const;
  static EvalRecord from_json(const json& j);
  bool operator==(const EvalRecord&) const = default;
};

/// Lowercase, collapse whitespace, strip surrounding quotes and trailing punctuation.
std::string answer_key(std::string_view s);

struct Grade {
  bool exact_match = false;
  bool correct = false;
  std::optional<bool> judged;
  bool flagged = false;
};

/// Exact match on answer_key; otherwise ask the judge. The judge is never
/// called on an exact match. A null gateway means exact match only.
Grade grade(std::string_view prediction, std::string_view gold, std::string_view question, llm::Gateway* judge,
            const std::string& judge_model, const llm::DecodeParams& judge_decode = {});

/// "[Source i]: text" blocks for the item's context chunks, in order.
std::string render_context(const qa::MultiHopQA& item, const corpus::ChunkIndex& chunks);

/// The "answer" field of a structured reply. Throws MalformedOutput.
std::string extract_answer(std::string_view reply);

/// One record per item, in dataset order. Per-item failures are recorded, not thrown.
std::vector<EvalRecord> run_eval(const std::vector<qa::MultiHopQA>& dataset, const EvalSetup& setup,
                                 const corpus::ChunkIndex& chunks, llm::Gateway& gateway);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // population
};

MeanSd mean_sd(const std::vector<double>& xs);

struct Report {
  std::string model_id;
  bool with_context = false;
  std::size_t item_count = 0;
  std::size_t correct_count = 0;
  std::size_t error_count = 0;
  double correctness_rate_pct = 0.0;
  double avg_duration_s = 0.0;
  double avg_input_tokens = 0.0;
  double avg_output_tokens = 0.0;
  double total_input_tokens_k = 0.0;
  double total_output_tokens_k = 0.0;
  // Keyed by hop count.
  std::map<std::size_t, double> per_hop_correctness_pct;
  std::map<std::size_t, std::size_t> per_hop_items;
  std::map<std::size_t, double> per_hop_avg_output_tokens;

  json to_json() const;
};

/// Requires a non-empty record list from a single (model, context) setup.
Report report(const std::vector<EvalRecord>& records);

struct DatasetStats {
  std::size_t question_count = 0;
  MeanSd question_chars, question_tokens;
  MeanSd answer_chars, answer_tokens;
  MeanSd hops;
  MeanSd context_chars, context_tokens;    // all context chunks of a question together
  MeanSd hop_chars, hop_tokens;            // pooled over every (question, hop) chunk
  MeanSd shortcuts;
  std::map<std::string, std::size_t> hop_histogram;  // "1".."4", ">=5"
  std::size_t questions_with_shortcut = 0;
  double questions_with_shortcut_pct = 0.0;

  json to_json() const;
};

/// Characters are Unicode code points.
std::size_t char_count(std::string_view s);

DatasetStats dataset_stats(const std::vector<qa::MultiHopQA>& dataset, const corpus::ChunkIndex& chunks,
                           const llm::Tokenizer& tokenizer = llm::whitespace_tokens);

std::string reports_markdown(const std::vector<Report>& reports);
std::string reports_csv(const std::vector<Report>& reports);
std::string dataset_stats_markdown(const DatasetStats& s);
std::string dataset_stats_csv(const DatasetStats& s);

}  // namespace chemhop::eval
