#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/corpus.hpp"
#include "chemhop/llm.hpp"
#include "chemhop/sampler.hpp"

namespace chemhop::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline const std::vector<std::string> kRoles = {"entity_verifier", "relation_extractor", "generator", "verifier",
                                                "judge"};

struct ProviderConfig {
  std::string name;
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string api_key_env;  // name of the variable, never the key
  int timeout_s = 120;
  llm::ProviderLimits limits;
};

struct RunConfig {
  fs::path run_dir;

  // Article source: a paged REST endpoint, or a local JSON/JSONL file of items
  // using the same field mapping.
  std::optional<corpus::SourceConfig> source;
  std::optional<fs::path> documents_file;
  corpus::IntroOptions intro;
  std::size_t chunk_words = corpus::kMaxChunkWords;

  std::string ner_provider = "lexicon";  // lexicon | http
  fs::path lexicon;
  std::string ner_url;
  int ner_timeout_s = 30;

  std::vector<ProviderConfig> providers;
  std::map<std::string, std::string> routes;  // model id -> provider name
  std::map<std::string, std::string> models;  // role -> model id
  std::map<std::string, llm::DecodeParams> decode;  // role -> params
  std::vector<std::string> eval_models;
  std::vector<bool> eval_with_context = {true, false};
  llm::RetryPolicy retry;
  llm::Budget budget;

  bool enrich_enabled = true;
  std::string wiki_url;
  std::string pubchem_url;
  double enrich_rps = 5.0;
  int enrich_timeout_s = 20;

  std::size_t k_min = 1;
  std::size_t k_max = 4;
  std::size_t paths_per_k = 10;
  std::optional<std::uint64_t> seed;
  sampler::SamplerOptions sampler;

  std::size_t max_facts = 10;
  std::size_t concurrency = 4;

  std::string config_hash;  // sha256 of the canonical config JSON

  /// Relative paths resolve against `base_dir`. Throws ConfigInvalid.
  static RunConfig from_json(const json& j, const fs::path& base_dir);
  static RunConfig load(const fs::path& path);

  std::string model_for(const std::string& role) const;
  llm::DecodeParams decode_for(const std::string& role) const;
  void validate_models(const std::vector<std::string>& roles) const;
};

/// Artifact paths inside a run directory.
struct Layout {
  fs::path root;
  fs::path documents() const { return root / "documents.jsonl"; }
  fs::path chunks() const { return root / "chunks.jsonl"; }
  fs::path chunk_entities() const { return root / "chunk_entities.jsonl"; }
  fs::path entities() const { return root / "entities.jsonl"; }
  fs::path relations() const { return root / "relations.jsonl"; }
  fs::path enrichment() const { return root / "enrichment.jsonl"; }
  fs::path graph() const { return root / "graph.jsonl"; }
  fs::path graph_stats_md() const { return root / "graph_stats.md"; }
  fs::path graph_stats_csv() const { return root / "graph_stats.csv"; }
  fs::path paths() const { return root / "paths.jsonl"; }
  fs::path candidates() const { return root / "candidates.jsonl"; }
  fs::path gen_drops() const { return root / "gen_drops.jsonl"; }
  fs::path dataset() const { return root / "dataset.jsonl"; }
  fs::path verify_drops() const { return root / "verify_drops.jsonl"; }
  fs::path consensus_dataset() const { return root / "dataset_consensus.jsonl"; }
  fs::path consensus_drops() const { return root / "consensus_drops.jsonl"; }
  fs::path annotations() const { return root / "annotations.jsonl"; }
  fs::path runs() const { return root / "runs"; }
  fs::path manifests() const { return root / "manifests"; }
  fs::path llm_cache() const { return root / "cache" / "llm"; }
  fs::path http_cache() const { return root / "cache" / "http"; }
  fs::path lock() const { return root / ".lock"; }
};

/// Exclusive per-run-directory lock; a lock left by a dead process is taken over.
class RunLock {
 public:
  explicit RunLock(const fs::path& path);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

struct StageOptions {
  std::optional<fs::path> mock_llm;
  std::optional<std::uint64_t> seed;    // overrides config
  std::optional<std::string> run_id;    // evaluate / report
  std::optional<fs::path> input;        // annotate-import file
  std::optional<std::string> consensus_run;  // verify-qa
};

/// Human-readable summary for standard output.
struct StageResult {
  std::string summary;
};

class Pipeline {
 public:
  Pipeline(RunConfig cfg, StageOptions opts);
  ~Pipeline();

  StageResult ingest();
  StageResult extract_entities();
  StageResult extract_relations();
  StageResult enrich();
  StageResult build_graph();
  StageResult graph_stats();
  StageResult sample_paths();
  StageResult gen_qa();
  StageResult verify_qa();
  StageResult evaluate();
  StageResult report();
  StageResult annotate_import();

  /// Dispatch by subcommand name. Throws ConfigInvalid for unknown names.
  StageResult run(const std::string& stage);

  const Layout& layout() const { return layout_; }
  llm::Gateway& gateway();

 private:
  void write_manifest(const std::string& stage, const std::map<std::string, fs::path>& inputs,
                      const std::map<std::string, fs::path>& outputs, json extra = json::object());

  RunConfig cfg_;
  StageOptions opts_;
  Layout layout_;
  std::unique_ptr<llm::Gateway> gateway_;
  std::shared_ptr<llm::ScriptedProvider> mock_;
};

std::vector<std::string> stage_names();

}  // namespace chemhop::pipeline
