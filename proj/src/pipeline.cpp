#include "chemhop/pipeline.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "chemhop/enrich.hpp"
#include "chemhop/entity.hpp"
#include "chemhop/error.hpp"
#include "chemhop/eval.hpp"
#include "chemhop/generate.hpp"
#include "chemhop/graph.hpp"
#include "chemhop/io.hpp"
#include "chemhop/prompts.hpp"
#include "chemhop/relation.hpp"
#include "chemhop/verify.hpp"

namespace chemhop::pipeline {

namespace {

constexpr const char* kDocuments = "chemhop.documents";
constexpr const char* kChunks = "chemhop.chunks";
constexpr const char* kChunkEntities = "chemhop.chunk_entities";
constexpr const char* kEntities = "chemhop.entities";
constexpr const char* kRelations = "chemhop.relations";
constexpr const char* kEnrichment = "chemhop.enrichment";
constexpr const char* kPaths = "chemhop.paths";
constexpr const char* kCandidates = "chemhop.candidates";
constexpr const char* kDrops = "chemhop.drops";
constexpr const char* kDataset = "chemhop.dataset";
constexpr const char* kEvalRecords = "chemhop.eval_records";
constexpr const char* kAnnotations = "chemhop.annotations";
constexpr const char* kManifest = "chemhop.manifest";

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) invalid(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.contains(k)) invalid("unknown key '" + k + "' in " + where);
  }
}

llm::DecodeParams decode_from(const json& j) {
  check_keys(j, "decode entry", {"temperature", "max_output_tokens", "extra"});
  llm::DecodeParams d;
  d.temperature = j.value("temperature", d.temperature);
  d.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
  if (j.contains("extra")) d.passthrough = j["extra"];
  return d;
}

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!first) first = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

template <class T>
std::vector<T> load_all(const fs::path& path, std::string_view schema) {
  std::vector<T> out;
  for (const auto& r : read_records(path, schema).records) out.push_back(T::from_json(r));
  return out;
}

template <class T>
std::vector<json> to_records(const std::vector<T>& items) {
  std::vector<json> out;
  out.reserve(items.size());
  for (const auto& x : items) out.push_back(x.to_json());
  return out;
}

corpus::ChunkIndex load_chunks(const fs::path& path) {
  corpus::ChunkIndex idx;
  for (auto& c : load_all<corpus::Chunk>(path, kChunks)) idx.emplace(c.chunk_id, std::move(c));
  return idx;
}

std::string markdown_file(std::string_view schema, const std::string& body) {
  return "<!-- " + std::string(schema) + " v1 -->\n" + body;
}

std::string run_stamp() {
  std::string ts = utc_timestamp();
  ts.erase(std::remove_if(ts.begin(), ts.end(), [](char c) { return c == '-' || c == ':'; }), ts.end());
  return ts;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    check_keys(j, "config", {"run_dir", "source", "documents_file", "intro", "chunk_words", "ner", "providers",
                             "routes", "models", "decode", "eval", "retry", "budget", "enrich", "sampler",
                             "max_facts", "concurrency"});
    c.run_dir = resolve(base_dir, j.value("run_dir", "run"));
    if (j.contains("source")) c.source = corpus::SourceConfig::from_json(j["source"]);
    if (j.contains("documents_file")) c.documents_file = resolve(base_dir, j["documents_file"].get<std::string>());
    if (j.contains("intro")) {
      const auto& in = j["intro"];
      check_keys(in, "intro", {"max_words", "fallback_to_body_start", "header_patterns", "end_patterns"});
      c.intro.max_words = in.value("max_words", c.intro.max_words);
      c.intro.fallback_to_body_start = in.value("fallback_to_body_start", false);
      c.intro.header_patterns = in.value("header_patterns", c.intro.header_patterns);
      c.intro.end_patterns = in.value("end_patterns", c.intro.end_patterns);
      for (const auto& p : c.intro.header_patterns) std::regex test(p, std::regex::icase);
      for (const auto& p : c.intro.end_patterns) std::regex test(p, std::regex::icase);
    }
    c.chunk_words = j.value("chunk_words", c.chunk_words);
    if (c.chunk_words == 0) invalid("chunk_words must be positive");

    if (j.contains("ner")) {
      const auto& n = j["ner"];
      check_keys(n, "ner", {"provider", "lexicon", "url", "timeout_s"});
      c.ner_provider = n.value("provider", c.ner_provider);
      if (n.contains("lexicon")) c.lexicon = resolve(base_dir, n["lexicon"].get<std::string>());
      c.ner_url = n.value("url", "");
      c.ner_timeout_s = n.value("timeout_s", c.ner_timeout_s);
      if (c.ner_provider != "lexicon" && c.ner_provider != "http") invalid("ner.provider must be lexicon or http");
    }

    static const std::regex env_name("^[A-Za-z_][A-Za-z0-9_]*$");
    for (const auto& p : j.value("providers", json::array())) {
      if (p.contains("api_key")) invalid("provider credentials must be named by environment variable (api_key_env)");
      check_keys(p, "provider", {"name", "base_url", "path", "api_key_env", "timeout_s", "max_in_flight",
                                 "requests_per_second"});
      ProviderConfig pc;
      pc.name = p.at("name");
      pc.base_url = p.at("base_url");
      pc.path = p.value("path", pc.path);
      pc.api_key_env = p.value("api_key_env", "");
      if (!pc.api_key_env.empty() && !std::regex_match(pc.api_key_env, env_name)) {
        invalid("api_key_env '" + pc.api_key_env + "' is not an environment variable name");
      }
      pc.timeout_s = p.value("timeout_s", pc.timeout_s);
      pc.limits.max_in_flight = p.value("max_in_flight", pc.limits.max_in_flight);
      pc.limits.requests_per_second = p.value("requests_per_second", pc.limits.requests_per_second);
      c.providers.push_back(std::move(pc));
    }
    c.routes = j.value("routes", c.routes);
    for (const auto& [model, provider] : c.routes) {
      bool known = std::any_of(c.providers.begin(), c.providers.end(), [&](const auto& p) { return p.name == provider; });
      if (!known) invalid("route for '" + model + "' names unknown provider '" + provider + "'");
    }
    c.models = j.value("models", c.models);
    for (const auto& [role, _] : c.models) {
      if (std::find(kRoles.begin(), kRoles.end(), role) == kRoles.end()) invalid("unknown model role '" + role + "'");
    }
    if (j.contains("decode")) {
      for (const auto& [role, d] : j["decode"].items()) {
        if (std::find(kRoles.begin(), kRoles.end(), role) == kRoles.end()) invalid("unknown decode role '" + role + "'");
        c.decode[role] = decode_from(d);
      }
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      check_keys(e, "eval", {"models", "settings"});
      c.eval_models = e.value("models", c.eval_models);
      if (e.contains("settings")) {
        c.eval_with_context.clear();
        for (const auto& s : e["settings"]) {
          if (s == "with_context") c.eval_with_context.push_back(true);
          else if (s == "without_context") c.eval_with_context.push_back(false);
          else invalid("eval.settings entries must be with_context or without_context");
        }
      }
    }
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      check_keys(r, "retry", {"max_retries", "base_delay_ms", "multiplier"});
      c.retry.max_retries = r.value("max_retries", c.retry.max_retries);
      c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", c.retry.base_delay.count()));
      c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
    }
    if (j.contains("budget")) {
      const auto& b = j["budget"];
      check_keys(b, "budget", {"max_requests", "max_tokens"});
      if (b.contains("max_requests") && !b["max_requests"].is_null()) c.budget.max_requests = b["max_requests"].get<long>();
      if (b.contains("max_tokens") && !b["max_tokens"].is_null()) c.budget.max_tokens = b["max_tokens"].get<long>();
    }
    if (j.contains("enrich")) {
      const auto& e = j["enrich"];
      check_keys(e, "enrich", {"enabled", "wiki_url", "pubchem_url", "requests_per_second", "timeout_s"});
      c.enrich_enabled = e.value("enabled", c.enrich_enabled);
      c.wiki_url = e.value("wiki_url", "");
      c.pubchem_url = e.value("pubchem_url", "");
      c.enrich_rps = e.value("requests_per_second", c.enrich_rps);
      c.enrich_timeout_s = e.value("timeout_s", c.enrich_timeout_s);
    }
    if (j.contains("sampler")) {
      const auto& s = j["sampler"];
      check_keys(s, "sampler", {"k_min", "k_max", "paths_per_k", "seed", "max_hops", "distinct_source_scope",
                                "frontier_cap", "paths_per_start_cap"});
      c.k_min = s.value("k_min", c.k_min);
      c.k_max = s.value("k_max", c.k_max);
      c.paths_per_k = s.value("paths_per_k", c.paths_per_k);
      if (s.contains("seed") && !s["seed"].is_null()) c.seed = s["seed"].get<std::uint64_t>();
      c.sampler.max_hops = s.value("max_hops", c.sampler.max_hops);
      if (s.contains("distinct_source_scope")) c.sampler.scope = sampler::parse_scope(s["distinct_source_scope"].get<std::string>());
      c.sampler.frontier_cap = s.value("frontier_cap", c.sampler.frontier_cap);
      c.sampler.paths_per_start_cap = s.value("paths_per_start_cap", c.sampler.paths_per_start_cap);
    }
    if (c.k_min == 0 || c.k_min > c.k_max || c.k_max > c.sampler.max_hops) {
      invalid("sampler needs 1 <= k_min <= k_max <= max_hops");
    }
    c.max_facts = j.value("max_facts", c.max_facts);
    c.concurrency = j.value("concurrency", c.concurrency);
  } catch (const json::exception& e) {
    invalid(std::string("config: ") + e.what());
  } catch (const std::regex_error& e) {
    invalid(std::string("config: bad pattern: ") + e.what());
  }
  c.config_hash = sha256_hex(j.dump());
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    invalid("config file not found: " + path.string());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    invalid(path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

std::string RunConfig::model_for(const std::string& role) const {
  auto it = models.find(role);
  if (it == models.end() || it->second.empty()) invalid("no model configured for role '" + role + "'");
  return it->second;
}

llm::DecodeParams RunConfig::decode_for(const std::string& role) const {
  auto it = decode.find(role);
  return it == decode.end() ? llm::DecodeParams{} : it->second;
}

void RunConfig::validate_models(const std::vector<std::string>& roles) const {
  for (const auto& r : roles) model_for(r);
}

// ---------------------------------------------------------------------------

RunLock::RunLock(const fs::path& path) : path_(path) {
  fs::create_directories(path.parent_path());
  for (int attempt = 0; attempt < 2; ++attempt) {
    int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      std::string pid = std::to_string(::getpid());
      [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    std::ifstream in(path);
    long holder = 0;
    in >> holder;
    if (holder > 0 && (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM)) break;
    spdlog::warn("removing stale lock {} (pid {})", path.string(), holder);
    fs::remove(path);
  }
  path_.clear();
  throw Error(ErrorCode::InvalidArgument, "run directory is locked by another stage: " + path.string());
}

RunLock::~RunLock() {
  if (!path_.empty()) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> stage_names() {
  return {"ingest",       "extract-entities", "extract-relations", "enrich",   "build-graph", "graph-stats",
          "sample-paths", "gen-qa",           "verify-qa",         "evaluate", "report",      "annotate-import"};
}

Pipeline::Pipeline(RunConfig cfg, StageOptions opts)
    : cfg_(std::move(cfg)), opts_(std::move(opts)), layout_{cfg_.run_dir} {
  fs::create_directories(layout_.root);
}

Pipeline::~Pipeline() = default;

llm::Gateway& Pipeline::gateway() {
  if (gateway_) return *gateway_;
  llm::Gateway::Options go;
  go.retry = cfg_.retry;
  go.budget = cfg_.budget;
  go.cache_dir = layout_.llm_cache();
  gateway_ = std::make_unique<llm::Gateway>(go);
  if (opts_.mock_llm) {
    mock_ = llm::ScriptedProvider::from_file(*opts_.mock_llm);
    gateway_->add_provider("mock", mock_, llm::ProviderLimits{});
    return *gateway_;
  }
  if (cfg_.providers.empty()) invalid("no LLM providers configured (or pass --mock-llm)");
  for (const auto& p : cfg_.providers) {
    llm::OpenAICompatibleProvider::Options po{p.base_url, p.path, p.api_key_env, static_cast<double>(p.timeout_s)};
    gateway_->add_provider(p.name, std::make_shared<llm::OpenAICompatibleProvider>(po), p.limits);
  }
  for (const auto& [model, provider] : cfg_.routes) gateway_->route(model, provider);
  return *gateway_;
}

void Pipeline::write_manifest(const std::string& stage, const std::map<std::string, fs::path>& inputs,
                              const std::map<std::string, fs::path>& outputs, json extra) {
  auto digest = [](const std::map<std::string, fs::path>& files) {
    json j = json::object();
    for (const auto& [name, path] : files) {
      j[name] = {{"path", path.filename().string()},
                 {"sha256", fs::exists(path) ? sha256_hex(read_file(path)) : std::string()}};
    }
    return j;
  };
  json m{{"stage", stage},
         {"config_hash", cfg_.config_hash},
         {"prompt_version", prompts::kVersion},
         {"written_at", utc_timestamp()},
         {"inputs", digest(inputs)},
         {"outputs", digest(outputs)}};
  if (opts_.mock_llm) m["mock_llm"] = opts_.mock_llm->string();
  if (gateway_) {
    auto s = gateway_->stats();
    m["llm"] = {{"provider_calls", s.provider_calls}, {"completed", s.completed}, {"cache_hits", s.cache_hits},
                {"retries", s.retries},               {"input_tokens", s.input_tokens},
                {"output_tokens", s.output_tokens}};
  }
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_records(layout_.manifests() / (stage + ".jsonl"), kManifest, {m});
}

StageResult Pipeline::run(const std::string& stage) {
  RunLock lock(layout_.lock());
  if (stage == "ingest") return ingest();
  if (stage == "extract-entities") return extract_entities();
  if (stage == "extract-relations") return extract_relations();
  if (stage == "enrich") return enrich();
  if (stage == "build-graph") return build_graph();
  if (stage == "graph-stats") return graph_stats();
  if (stage == "sample-paths") return sample_paths();
  if (stage == "gen-qa") return gen_qa();
  if (stage == "verify-qa") return verify_qa();
  if (stage == "evaluate") return evaluate();
  if (stage == "report") return report();
  if (stage == "annotate-import") return annotate_import();
  invalid("unknown stage '" + stage + "'");
}

// ---------------------------------------------------------------------------

StageResult Pipeline::ingest() {
  std::vector<corpus::Document> docs;
  if (cfg_.documents_file) {
    docs = corpus::load_articles_file(*cfg_.documents_file, cfg_.source.value_or(corpus::SourceConfig{}));
  } else if (cfg_.source && !cfg_.source->base_url.empty()) {
    docs = corpus::fetch_articles(*cfg_.source);
  } else {
    invalid("ingest needs source.base_url or documents_file");
  }

  // Keep the original retrieval time of unchanged documents.
  if (fs::exists(layout_.documents())) {
    std::map<std::string, corpus::Document> previous;
    for (auto& d : load_all<corpus::Document>(layout_.documents(), kDocuments)) previous.emplace(d.doc_id, d);
    for (auto& d : docs) {
      auto it = previous.find(d.doc_id);
      if (it != previous.end() && it->second.body_text == d.body_text && it->second.title == d.title) {
        d.retrieved_at = it->second.retrieved_at;
      }
    }
  }

  std::vector<corpus::Chunk> chunks;
  std::size_t no_intro = 0;
  for (const auto& d : docs) {
    try {
      auto window = corpus::extract_intro_window(d, cfg_.intro);
      auto cs = corpus::chunk_text(window, d.doc_id, cfg_.chunk_words);
      chunks.insert(chunks.end(), cs.begin(), cs.end());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoIntroductionFound) throw;
      ++no_intro;
      spdlog::warn("{}: {}", d.doc_id, e.what());
    }
  }
  write_records(layout_.documents(), kDocuments, to_records(docs));
  write_records(layout_.chunks(), kChunks, to_records(chunks));
  write_manifest("ingest", {}, {{"documents", layout_.documents()}, {"chunks", layout_.chunks()}},
                 {{"documents", docs.size()}, {"without_introduction", no_intro}, {"chunks", chunks.size()}});
  return {"ingested " + std::to_string(docs.size()) + " documents (" + std::to_string(no_intro) +
          " without an introduction), " + std::to_string(chunks.size()) + " chunks\n"};
}

StageResult Pipeline::extract_entities() {
  cfg_.validate_models({"entity_verifier"});
  auto chunks = load_all<corpus::Chunk>(layout_.chunks(), kChunks);
  std::unique_ptr<entity::NerProvider> ner;
  if (cfg_.ner_provider == "http") {
    if (cfg_.ner_url.empty()) invalid("ner.url is required for the http provider");
    auto http = std::make_unique<entity::HttpNerProvider>(cfg_.ner_url, cfg_.ner_timeout_s);
    if (!http->healthy()) throw Error(ErrorCode::ProviderUnavailable, "NER service at " + cfg_.ner_url + " is not ready");
    ner = std::move(http);
  } else {
    if (cfg_.lexicon.empty()) invalid("ner.lexicon is required for the lexicon provider");
    ner = entity::LexiconProvider::from_file(cfg_.lexicon);
  }

  std::vector<std::vector<entity::EntitySpan>> spans;
  for (const auto& c : chunks) spans.push_back(entity::detect(c, *ner));

  entity::VerifyOptions vo{cfg_.model_for("entity_verifier"), cfg_.decode_for("entity_verifier")};
  auto& gw = gateway();
  std::vector<entity::ChunkEntities> per_chunk(chunks.size());
  parallel_for(chunks.size(), cfg_.concurrency, [&](std::size_t i) {
    per_chunk[i] = {chunks[i].chunk_id, chunks[i].doc_id, entity::verify(spans[i], chunks[i], gw, vo)};
  });
  auto merged = entity::merge_entities(per_chunk);
  write_records(layout_.chunk_entities(), kChunkEntities, to_records(per_chunk));
  write_records(layout_.entities(), kEntities, to_records(merged));
  write_manifest("extract-entities", {{"chunks", layout_.chunks()}},
                 {{"chunk_entities", layout_.chunk_entities()}, {"entities", layout_.entities()}},
                 {{"entities", merged.size()}});
  return {"kept " + std::to_string(merged.size()) + " entities across " + std::to_string(chunks.size()) +
          " chunks\n"};
}

StageResult Pipeline::extract_relations() {
  cfg_.validate_models({"relation_extractor"});
  auto chunks = load_chunks(layout_.chunks());
  auto per_chunk = load_all<entity::ChunkEntities>(layout_.chunk_entities(), kChunkEntities);
  relation::ExtractOptions eo{cfg_.model_for("relation_extractor"), cfg_.decode_for("relation_extractor"),
                              cfg_.max_facts};
  auto& gw = gateway();
  std::vector<std::vector<relation::Triplet>> found(per_chunk.size());
  parallel_for(per_chunk.size(), cfg_.concurrency, [&](std::size_t i) {
    auto it = chunks.find(per_chunk[i].chunk_id);
    if (it == chunks.end()) throw Error(ErrorCode::MissingInput, "chunk '" + per_chunk[i].chunk_id + "' not in corpus");
    found[i] = relation::extract_relations(per_chunk[i].entities, it->second, gw, eo);
  });
  std::vector<relation::Triplet> all;
  for (auto& f : found) all.insert(all.end(), f.begin(), f.end());
  write_records(layout_.relations(), kRelations, to_records(all));
  write_manifest("extract-relations", {{"chunks", layout_.chunks()}, {"chunk_entities", layout_.chunk_entities()}},
                 {{"relations", layout_.relations()}}, {{"triplets", all.size()}});
  return {"extracted " + std::to_string(all.size()) + " triplets\n"};
}

StageResult Pipeline::enrich() {
  auto entities = load_all<entity::Entity>(layout_.entities(), kEntities);
  std::vector<enrich::EnrichmentRecord> records;
  long calls = 0;
  if (cfg_.enrich_enabled) {
    std::unique_ptr<enrich::WikiClient> wiki;
    std::unique_ptr<enrich::PubChemClient> pubchem;
    auto opts = [&](const std::string& url) {
      return enrich::HttpSource::Options{url, cfg_.enrich_rps, cfg_.enrich_timeout_s, layout_.http_cache()};
    };
    if (!cfg_.wiki_url.empty()) wiki = std::make_unique<enrich::WikiClient>(opts(cfg_.wiki_url));
    if (!cfg_.pubchem_url.empty()) pubchem = std::make_unique<enrich::PubChemClient>(opts(cfg_.pubchem_url));
    if (!wiki && !pubchem) invalid("enrich.enabled needs wiki_url or pubchem_url");
    for (const auto& e : entities) {
      if (auto r = enrich::enrich_entity(e.canonical_name, wiki.get(), pubchem.get())) records.push_back(std::move(*r));
    }
    calls = (wiki ? wiki->network_calls() : 0) + (pubchem ? pubchem->network_calls() : 0);
  }
  write_records(layout_.enrichment(), kEnrichment, to_records(records), {{"enabled", cfg_.enrich_enabled}});
  write_manifest("enrich", {{"entities", layout_.entities()}}, {{"enrichment", layout_.enrichment()}},
                 {{"enriched", records.size()}, {"network_calls", calls}});
  return {"enriched " + std::to_string(records.size()) + " of " + std::to_string(entities.size()) + " entities\n"};
}

StageResult Pipeline::build_graph() {
  auto entities = load_all<entity::Entity>(layout_.entities(), kEntities);
  auto enrichments = load_all<enrich::EnrichmentRecord>(layout_.enrichment(), kEnrichment);
  auto triplets = load_all<relation::Triplet>(layout_.relations(), kRelations);
  auto g = graph::build(entities, enrichments, triplets);
  auto chunks = load_chunks(layout_.chunks());
  std::set<std::string> ids;
  for (const auto& [id, _] : chunks) ids.insert(id);
  auto dangling = graph::dangling_sources(g, ids);
  if (!dangling.empty()) {
    throw Error(ErrorCode::CorruptFile, "graph references " + std::to_string(dangling.size()) +
                                            " chunks missing from the corpus, first: " + dangling.front());
  }
  graph::save(g, layout_.graph());
  write_manifest("build-graph",
                 {{"entities", layout_.entities()}, {"enrichment", layout_.enrichment()},
                  {"relations", layout_.relations()}},
                 {{"graph", layout_.graph()}}, {{"nodes", g.node_count()}, {"edges", g.edge_count()}});
  return {"graph: " + std::to_string(g.node_count()) + " nodes, " + std::to_string(g.edge_count()) + " edges\n"};
}

StageResult Pipeline::graph_stats() {
  auto g = graph::load(layout_.graph());
  auto s = graph::stats(g);
  std::string md = graph::stats_markdown(s);
  write_file_atomic(layout_.graph_stats_md(), markdown_file("chemhop.graph_stats", md));
  write_file_atomic(layout_.graph_stats_csv(), graph::stats_csv(s));
  write_manifest("graph-stats", {{"graph", layout_.graph()}},
                 {{"graph_stats_md", layout_.graph_stats_md()}, {"graph_stats_csv", layout_.graph_stats_csv()}});
  return {md};
}

StageResult Pipeline::sample_paths() {
  auto seed = opts_.seed ? opts_.seed : cfg_.seed;
  if (!seed) invalid("sample-paths needs a seed (sampler.seed in the config or --seed)");
  auto g = graph::load(layout_.graph());
  std::vector<json> records;
  std::map<std::size_t, std::size_t> per_k;
  for (std::size_t k = cfg_.k_min; k <= cfg_.k_max; ++k) {
    try {
      for (const auto& p : sampler::sample_paths(g, k, cfg_.paths_per_k, *seed, cfg_.sampler)) {
        records.push_back(p.to_json());
        ++per_k[k];
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPathsAvailable) throw;
      spdlog::warn("k={}: {}", k, e.what());
    }
  }
  if (records.empty()) throw Error(ErrorCode::NoPathsAvailable, "no paths for any k in the configured range");
  write_records(layout_.paths(), kPaths, records, {{"seed", *seed}});
  json counts = json::object();
  std::string summary = "sampled " + std::to_string(records.size()) + " paths (seed " + std::to_string(*seed) + "):";
  for (const auto& [k, n] : per_k) {
    counts[std::to_string(k)] = n;
    summary += " k=" + std::to_string(k) + ":" + std::to_string(n);
  }
  write_manifest("sample-paths", {{"graph", layout_.graph()}}, {{"paths", layout_.paths()}},
                 {{"seed", *seed}, {"paths_per_k", counts}});
  return {summary + "\n"};
}

StageResult Pipeline::gen_qa() {
  cfg_.validate_models({"generator", "verifier"});
  auto paths = load_all<sampler::PathSample>(layout_.paths(), kPaths);
  auto g = graph::load(layout_.graph());
  auto chunks = load_chunks(layout_.chunks());
  generate::Options go{{cfg_.model_for("generator"), cfg_.decode_for("generator")},
                       {cfg_.model_for("verifier"), cfg_.decode_for("verifier")},
                       true};
  auto& gw = gateway();
  std::vector<generate::Outcome> outcomes(paths.size());
  parallel_for(paths.size(), cfg_.concurrency,
               [&](std::size_t i) { outcomes[i] = generate::generate_for_path(paths[i], g, chunks, gw, go); });
  std::vector<json> items, drops;
  std::set<std::string> seen;
  for (const auto& o : outcomes) {
    if (o.item && seen.insert(o.item->id).second) items.push_back(o.item->to_json());
    if (o.drop) drops.push_back(o.drop->to_json());
  }
  write_records(layout_.candidates(), kCandidates, items);
  write_records(layout_.gen_drops(), kDrops, drops);
  write_manifest("gen-qa", {{"paths", layout_.paths()}, {"graph", layout_.graph()}, {"chunks", layout_.chunks()}},
                 {{"candidates", layout_.candidates()}, {"drops", layout_.gen_drops()}},
                 {{"candidates", items.size()}, {"dropped", drops.size()}});
  return {"generated " + std::to_string(items.size()) + " candidate questions from " + std::to_string(paths.size()) +
          " paths (" + std::to_string(drops.size()) + " discarded)\n"};
}

StageResult Pipeline::verify_qa() {
  if (opts_.consensus_run) {
    auto dataset = load_all<qa::MultiHopQA>(layout_.dataset(), kDataset);
    auto run_dir = layout_.runs() / *opts_.consensus_run;
    auto records = load_all<eval::EvalRecord>(run_dir / "records.jsonl", kEvalRecords);
    auto result = verify::consensus_filter(dataset, records);
    write_records(layout_.consensus_dataset(), kDataset, to_records(result.kept));
    write_records(layout_.consensus_drops(), kDrops, to_records(result.dropped));
    write_manifest("verify-qa-consensus", {{"dataset", layout_.dataset()}, {"records", run_dir / "records.jsonl"}},
                   {{"dataset", layout_.consensus_dataset()}, {"drops", layout_.consensus_drops()}},
                   {{"run_id", *opts_.consensus_run}, {"kept", result.kept.size()}, {"dropped", result.dropped.size()}});
    return {"consensus filter kept " + std::to_string(result.kept.size()) + " of " + std::to_string(dataset.size()) +
            " items\n"};
  }

  cfg_.validate_models({"verifier"});
  auto candidates = load_all<qa::MultiHopQA>(layout_.candidates(), kCandidates);
  auto chunks = load_chunks(layout_.chunks());
  verify::JudgeOptions jo{cfg_.model_for("verifier"), cfg_.decode_for("verifier")};
  auto& gw = gateway();
  std::vector<std::optional<verify::DropRecord>> drops(candidates.size());
  parallel_for(candidates.size(), cfg_.concurrency, [&](std::size_t i) {
    const auto& m = candidates[i];
    auto gate = verify::leak_and_length_gate(m);
    if (!gate.passed) {
      drops[i] = verify::drop_from(m.id, gate);
      return;
    }
    auto v = verify::verify_path(m, verify::render_path_text(m, chunks), gw, jo);
    if (!v.passed) drops[i] = verify::drop_from(m.id, v);
  });
  std::vector<json> kept, dropped;
  std::map<std::string, std::size_t> by_reason;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (drops[i]) {
      dropped.push_back(drops[i]->to_json());
      ++by_reason[std::string(verify::to_string(drops[i]->reason))];
    } else {
      kept.push_back(candidates[i].to_json());
    }
  }
  write_records(layout_.dataset(), kDataset, kept);
  write_records(layout_.verify_drops(), kDrops, dropped);
  write_manifest("verify-qa", {{"candidates", layout_.candidates()}, {"chunks", layout_.chunks()}},
                 {{"dataset", layout_.dataset()}, {"drops", layout_.verify_drops()}},
                 {{"kept", kept.size()}, {"dropped_by_reason", by_reason}});
  std::string summary = "verified " + std::to_string(candidates.size()) + " candidates: kept " +
                        std::to_string(kept.size());
  for (const auto& [reason, n] : by_reason) summary += ", " + reason + " " + std::to_string(n);
  return {summary + "\n"};
}

StageResult Pipeline::evaluate() {
  if (cfg_.eval_models.empty()) invalid("eval.models is empty");
  auto dataset = load_all<qa::MultiHopQA>(layout_.dataset(), kDataset);
  auto chunks = load_chunks(layout_.chunks());
  std::string run_id = opts_.run_id.value_or(run_stamp());
  fs::path dir = layout_.runs() / run_id;
  if (!opts_.run_id) {
    for (int n = 2; fs::exists(dir); ++n) dir = layout_.runs() / (run_id + "-" + std::to_string(n));
    run_id = dir.filename().string();
  }
  std::string judge_model;
  if (auto it = cfg_.models.find("judge"); it != cfg_.models.end()) judge_model = it->second;
  if (judge_model.empty()) spdlog::warn("no judge model configured; grading by exact match only");

  auto& gw = gateway();
  std::vector<eval::EvalRecord> all;
  std::vector<eval::Report> reports;
  for (const auto& model : cfg_.eval_models) {
    for (bool ctx : cfg_.eval_with_context) {
      eval::EvalSetup setup;
      setup.model_id = model;
      setup.with_context = ctx;
      setup.judge_model = judge_model;
      setup.judge_decode = cfg_.decode_for("judge");
      setup.run_id = run_id;
      setup.concurrency = cfg_.concurrency;
      auto recs = eval::run_eval(dataset, setup, chunks, gw);
      if (!recs.empty()) reports.push_back(eval::report(recs));
      all.insert(all.end(), recs.begin(), recs.end());
    }
  }
  fs::create_directories(dir);
  write_records(dir / "records.jsonl", kEvalRecords, to_records(all), {{"run_id", run_id}});
  std::string md = eval::reports_markdown(reports);
  write_file_atomic(dir / "report.md", markdown_file("chemhop.eval_report", md));
  write_file_atomic(dir / "report.csv", eval::reports_csv(reports));
  write_manifest("evaluate", {{"dataset", layout_.dataset()}, {"chunks", layout_.chunks()}},
                 {{"records", dir / "records.jsonl"}, {"report_md", dir / "report.md"}},
                 {{"run_id", run_id}, {"judge_model", judge_model}});
  return {"run " + run_id + "\n\n" + md};
}

StageResult Pipeline::report() {
  auto dataset = load_all<qa::MultiHopQA>(layout_.dataset(), kDataset);
  auto chunks = load_chunks(layout_.chunks());
  std::string run_id;
  if (opts_.run_id) {
    run_id = *opts_.run_id;
  } else if (fs::exists(layout_.runs())) {
    for (const auto& e : fs::directory_iterator(layout_.runs())) {
      if (e.is_directory() && fs::exists(e.path() / "records.jsonl")) run_id = std::max(run_id, e.path().filename().string());
    }
  }
  std::string md;
  fs::path out_dir = layout_.root;
  std::map<std::string, fs::path> inputs{{"dataset", layout_.dataset()}, {"chunks", layout_.chunks()}};
  if (!run_id.empty()) {
    out_dir = layout_.runs() / run_id;
    inputs["records"] = out_dir / "records.jsonl";
    auto records = load_all<eval::EvalRecord>(out_dir / "records.jsonl", kEvalRecords);
    std::map<std::pair<std::string, bool>, std::vector<eval::EvalRecord>> groups;
    std::vector<std::pair<std::string, bool>> order;
    for (auto& r : records) {
      auto key = std::make_pair(r.model_id, r.with_context);
      if (!groups.contains(key)) order.push_back(key);
      groups[key].push_back(std::move(r));
    }
    std::vector<eval::Report> reports;
    for (const auto& key : order) reports.push_back(eval::report(groups[key]));
    md += "## Model results (run " + run_id + ")\n\n" + eval::reports_markdown(reports) + "\n";
    write_file_atomic(out_dir / "report.csv", eval::reports_csv(reports));
  }
  auto stats = eval::dataset_stats(dataset, chunks);
  md += "## Dataset statistics\n\n" + eval::dataset_stats_markdown(stats);
  if (fs::exists(layout_.annotations())) {
    std::vector<verify::Annotation> ann = verify::read_annotations(layout_.annotations());
    md += "\n## Expert annotations\n\n" + verify::summarize_annotations(ann, dataset).markdown();
  }
  write_file_atomic(out_dir / "report.md", markdown_file("chemhop.report", md));
  write_file_atomic(out_dir / "dataset_stats.csv", eval::dataset_stats_csv(stats));
  write_manifest("report", inputs, {{"report_md", out_dir / "report.md"}, {"dataset_stats_csv", out_dir / "dataset_stats.csv"}},
                 {{"run_id", run_id}, {"tokenizer", "whitespace"}});
  return {md};
}

StageResult Pipeline::annotate_import() {
  if (!opts_.input) invalid("annotate-import needs --file");
  auto ann = verify::read_annotations(*opts_.input);
  std::vector<qa::MultiHopQA> dataset;
  if (fs::exists(layout_.dataset())) dataset = load_all<qa::MultiHopQA>(layout_.dataset(), kDataset);
  auto summary = verify::summarize_annotations(ann, dataset);
  if (summary.unknown_items) spdlog::warn("{} annotations name items not in the dataset", summary.unknown_items);
  std::vector<json> records;
  for (const auto& a : ann) {
    static const char* ratings[] = {"good", "ok", "poor"};
    static const char* confs[] = {"high", "low"};
    records.push_back({{"item_id", a.item_id},
                       {"rating", ratings[static_cast<int>(a.rating)]},
                       {"confidence", confs[static_cast<int>(a.confidence)]}});
  }
  write_records(layout_.annotations(), kAnnotations, records);
  write_manifest("annotate-import", {{"annotations_in", *opts_.input}}, {{"annotations", layout_.annotations()}},
                 {{"summary", summary.to_json()}});
  return {summary.markdown()};
}

}  // namespace chemhop::pipeline
