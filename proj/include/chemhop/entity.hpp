#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/corpus.hpp"
#include "chemhop/llm.hpp"

namespace chemhop::entity {

using json = nlohmann::json;

/// Byte offsets into the chunk text; surface == text.substr(start, end - start).
struct EntitySpan {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 1.0;

  bool operator==(const EntitySpan&) const = default;
};

struct Entity {
  std::string canonical_name;
  std::set<std::string> surface_forms;
  std::string first_chunk_id;
  // Every chunk the entity was verified in, in first-seen order.
  std::vector<std::string> chunk_ids;

  json to_json() const;
  static Entity from_json(const json& j);
  bool operator==(const Entity&) const = default;
};

/// Verified entities of one chunk; the artifact written by the extract-entities stage.
struct ChunkEntities {
  std::string chunk_id;
  std::string doc_id;
  std::vector<Entity> entities;

  json to_json() const;
  static ChunkEntities from_json(const json& j);
};

class NerProvider {
 public:
  virtual ~NerProvider() = default;
  /// Raw candidates; may overlap. Throws ProviderUnavailable.
  virtual std::vector<EntitySpan> find(std::string_view text) = 0;
};

/// In-process gazetteer: case-insensitive, word-bounded matches of every term.
class LexiconProvider : public NerProvider {
 public:
  explicit LexiconProvider(std::vector<std::string> terms);
  /// One term per line, UTF-8; blank lines and lines starting with '#' ignored.
  static std::unique_ptr<LexiconProvider> from_file(const std::filesystem::path& path);
  std::vector<EntitySpan> find(std::string_view text) override;

 private:
  std::vector<std::string> terms_;  // casefolded
};

/// Client for the NER service wire contract: POST /ner {"text"} -> {"spans": [...]}
/// with character (code point) offsets; GET /health. A 413 reply raises InvalidArgument.
class HttpNerProvider : public NerProvider {
 public:
  explicit HttpNerProvider(std::string base_url, int timeout_s = 30);
  bool healthy();
  std::vector<EntitySpan> find(std::string_view text) override;

  /// Convert a code point offset into a byte offset of a UTF-8 string.
  static std::optional<std::size_t> byte_offset(std::string_view utf8, std::size_t codepoints);

 private:
  std::string base_url_;
  int timeout_s_;
};

/// Keep the longest of any overlapping spans; result sorted by start.
std::vector<EntitySpan> resolve_overlaps(std::vector<EntitySpan> spans);
std::vector<EntitySpan> detect(const corpus::Chunk& chunk, NerProvider& provider);

/// True when the token parses entirely as element symbols with counts, e.g. HCl, CO2, Pd.
bool is_formula_token(std::string_view token);
/// Expansion of a common laboratory abbreviation (MeOH -> methanol), if known.
std::optional<std::string> expand_abbreviation(std::string_view surface);
/// Trim, collapse whitespace, expand known abbreviations, lowercase non-formula tokens.
std::string canonical_name(std::string_view surface);
/// Equality key for entity names: casefolded canonical name.
std::string merge_key(std::string_view name);

struct VerifyOptions {
  std::string model_id;
  llm::DecodeParams decode;
};

std::string render_verify_prompt(const std::vector<std::string>& surfaces, std::string_view text);

/// Ask the verifier model to filter and standardize the detected surfaces.
/// Names the model returns that do not trace back to an input surface are dropped.
/// Throws MalformedOutput after one re-ask.
std::vector<Entity> verify(const std::vector<EntitySpan>& spans, const corpus::Chunk& chunk, llm::Gateway& gateway,
                           const VerifyOptions& opts);

/// Merge per-chunk entities by merge_key, preserving first-seen order.
std::vector<Entity> merge_entities(const std::vector<ChunkEntities>& per_chunk);

}  // namespace chemhop::entity
