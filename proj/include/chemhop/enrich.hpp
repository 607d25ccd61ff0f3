#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/throttle.hpp"

namespace chemhop::enrich {

using json = nlohmann::json;

struct CompoundProfile {
  std::string record_title;
  std::vector<std::string> synonyms;
  std::optional<std::string> description;
  std::vector<std::string> safety;
  std::optional<std::string> canonical_smiles;
  std::optional<std::string> molecular_formula;
  // property name -> "value unit"
  std::map<std::string, std::string> computed_properties;

  json to_json() const;
  static CompoundProfile from_json(const json& j);
  bool operator==(const CompoundProfile&) const = default;
};

struct EnrichmentRecord {
  std::string entity;
  std::optional<std::string> wiki_summary;
  std::optional<CompoundProfile> compound;
  std::string fetched_at;

  json to_json() const;
  static EnrichmentRecord from_json(const json& j);
  bool operator==(const EnrichmentRecord&) const = default;
};

/// Element symbols with optional counts, e.g. CH2O2, C6H12O6, NaCl.
bool is_molecular_formula(std::string_view formula);

/// Disk cache keyed by (source, name). Entries record hits and misses alike.
class FetchCache {
 public:
  explicit FetchCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {}
  /// nullopt: not cached. Otherwise the stored payload (null for a cached miss).
  std::optional<json> get(std::string_view source, std::string_view name) const;
  void put(std::string_view source, std::string_view name, const json& payload) const;
  /// When the entry was first written; nullopt when absent or caching is off.
  std::optional<std::string> stored_at(std::string_view source, std::string_view name) const;

 private:
  std::filesystem::path entry(std::string_view source, std::string_view name) const;
  std::optional<std::filesystem::path> dir_;
};

/// Shared HTTP plumbing: rate limiting, manual redirect following, call counting.
class HttpSource {
 public:
  struct Options {
    std::string base_url;
    double requests_per_second = 5.0;
    int timeout_s = 20;
    std::optional<std::filesystem::path> cache_dir;
  };
  explicit HttpSource(Options opts);

  long network_calls() const { return calls_.load(); }
  const FetchCache& cache() const { return cache_; }

 protected:
  struct Reply {
    int status = 0;
    std::string body;
  };
  /// GET with redirects followed (up to 5). Throws SourceUnreachable on transport errors and 5xx.
  Reply get(std::string path);

  Options opts_;
  FetchCache cache_;

 private:
  RateLimiter rate_;
  std::atomic<long> calls_{0};
};

/// Encyclopedia REST summary endpoint: GET {prefix}{title}?redirect=true -> {"type", "extract"}.
class WikiClient : public HttpSource {
 public:
  explicit WikiClient(Options opts, std::string path_prefix = "/api/rest_v1/page/summary/");
  std::optional<std::string> summary(const std::string& name);

 private:
  std::string prefix_;
};

/// Compound database REST client: name -> compound id -> record view.
class PubChemClient : public HttpSource {
 public:
  explicit PubChemClient(Options opts);
  std::optional<CompoundProfile> compound_profile(const std::string& name);

  /// Extract profile fields from a record-view document ({"Record": {...}}).
  static CompoundProfile parse_record_view(const json& view);

 private:
  std::optional<long> resolve_cid(const std::string& name);
};

/// Prompt-facing text: summary, description and formula lines.
std::string render_metadata(const EnrichmentRecord& record);

/// Query both sources. Transport failures become misses with a logged warning.
/// Returns nullopt when neither source has anything for the name.
std::optional<EnrichmentRecord> enrich_entity(const std::string& name, WikiClient* wiki, PubChemClient* pubchem);

}  // namespace chemhop::enrich
