#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace chemhop::corpus {

using json = nlohmann::json;

inline constexpr std::size_t kMaxChunkWords = 128;
inline constexpr std::size_t kMaxIntroWords = 500;

struct Document {
  std::string doc_id;
  std::string title;
  std::string license;
  std::string body_text;
  std::string retrieved_at;

  json to_json() const;
  static Document from_json(const json& j);
  bool operator==(const Document&) const = default;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  std::size_t word_count = 0;
  // A single paragraph longer than the word cap, kept whole.
  bool oversize = false;

  json to_json() const;
  static Chunk from_json(const json& j);
  bool operator==(const Chunk&) const = default;
};

using ChunkIndex = std::map<std::string, Chunk>;

/// A paged REST article listing. `path_template` may use {page}, {offset} and {limit}.
/// Field names are dot paths into each item object.
struct SourceConfig {
  std::string base_url;
  std::string path_template = "/articles?page={page}&limit={limit}";
  std::string items_field = "items";  // empty: the response itself is the array
  std::size_t page_size = 50;
  std::size_t max_pages = 0;  // 0 = until exhausted
  std::size_t first_page = 0;
  std::string id_field = "id";
  std::string title_field = "title";
  std::string license_field = "license";
  std::string body_field = "body";
  std::vector<std::string> license_allow;
  int timeout_s = 30;

  static SourceConfig from_json(const json& j);
};

/// Map one listing item to a Document; nullopt when its license is not allow-listed.
/// Throws SchemaMismatch when a required field is missing.
std::optional<Document> document_from_item(const json& item, const SourceConfig& source);

/// Items from a local JSON array or JSONL file, mapped as by fetch_articles.
std::vector<Document> load_articles_file(const std::filesystem::path& path, const SourceConfig& source);

/// Fetch every page (or up to max_pages) and keep allow-listed documents.
/// Throws SourceUnreachable or SchemaMismatch.
std::vector<Document> fetch_articles(const SourceConfig& source);

struct IntroOptions {
  // ECMAScript, matched case-insensitively against single lines.
  std::vector<std::string> header_patterns = {
      R"(^\s*#*\s*(?:(?:\d+|[ivx]+)\.?\s*)?introduction\s*:?\s*$)",
  };
  std::vector<std::string> end_patterns = {
      R"(^\s*#*\s*(?:(?:\d+|[ivx]+)\.?\s+)?(?:background|related work|results(?: and discussion)?|discussion|methods|materials and methods|methodology|experimental(?: section| details)?|conclusions?|references|acknowledge?ments)\s*:?\s*$)",
      R"(^\s*#*\s*(?:\d+|[ivx]+)\.(?:\d+\.?)*\s+[a-z][^.]{0,80}$)",
  };
  std::size_t max_words = kMaxIntroWords;
  // When no header matches, use the start of the body instead of failing.
  bool fallback_to_body_start = false;
};

/// Introduction section truncated at the last whole paragraph that keeps the
/// window within max_words; if even the first paragraph is longer, it is returned whole.
/// Throws NoIntroductionFound.
std::string extract_intro_window(const Document& doc, const IntroOptions& opts = {});

/// Greedy packing of whole paragraphs into chunks of at most max_words words.
std::vector<Chunk> chunk_text(std::string_view text, const std::string& doc_id,
                              std::size_t max_words = kMaxChunkWords);

}  // namespace chemhop::corpus
