#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chemhop/enrich.hpp"
#include "chemhop/entity.hpp"
#include "chemhop/relation.hpp"

namespace chemhop::graph {

using relation::Triplet;

struct Node {
  entity::Entity entity;
  std::optional<enrich::EnrichmentRecord> enrichment;
  std::vector<std::string> source_chunk_ids;

  bool operator==(const Node&) const = default;
};

/// Entities keyed by canonical name plus provenance-carrying directed edges.
/// Parallel edges are kept; the undirected simple view collapses them.
/// Immutable once built, so safe to share across threads.
class KnowledgeGraph {
 public:
  struct Incidence {
    std::size_t neighbor;
    std::size_t edge;
  };

  KnowledgeGraph() = default;
  KnowledgeGraph(std::map<std::string, Node> nodes, std::vector<Triplet> edges);

  const std::map<std::string, Node>& nodes() const { return nodes_; }
  const std::vector<Triplet>& edges() const { return edges_; }
  std::size_t node_count() const { return names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return names_.empty(); }

  std::optional<std::size_t> index_of(std::string_view canonical_name) const;
  /// Lookup through entity::merge_key, tolerant of case and abbreviations.
  std::optional<std::size_t> find(std::string_view name) const;
  const std::string& name_of(std::size_t i) const { return names_[i]; }
  const Node& node(std::size_t i) const { return nodes_.at(names_[i]); }

  /// Every edge touching node i (both directions, parallel edges included, no self-loops).
  const std::vector<Incidence>& incident(std::size_t i) const { return incidence_[i]; }
  /// Sorted, de-duplicated neighbours on the undirected simple view.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return simple_[i]; }
  bool adjacent(std::size_t a, std::size_t b) const;

  bool operator==(const KnowledgeGraph& other) const { return nodes_ == other.nodes_ && edges_ == other.edges_; }

 private:
  void index();

  std::map<std::string, Node> nodes_;
  std::vector<Triplet> edges_;
  std::vector<std::string> names_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
  std::map<std::string, std::size_t, std::less<>> by_key_;
  std::vector<std::vector<Incidence>> incidence_;
  std::vector<std::vector<std::size_t>> simple_;
};

/// Merge entities by name, attach enrichment, insert triplets whose endpoints
/// resolve. Unresolvable and self-loop triplets are dropped and logged.
KnowledgeGraph build(const std::vector<entity::Entity>& entities,
                     const std::vector<enrich::EnrichmentRecord>& enrichments, const std::vector<Triplet>& triplets);

/// Provenance references not present in `chunk_ids`.
std::vector<std::string> dangling_sources(const KnowledgeGraph& g, const std::set<std::string>& chunk_ids);

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;         // stored edges, parallel included
  std::size_t simple_edge_count = 0;  // undirected simple view
  double density = 0.0;
  double degree_min = 0.0;
  double degree_max = 0.0;
  double degree_avg = 0.0;
  std::size_t component_count = 0;
  std::size_t largest_component = 0;
  double avg_clustering = 0.0;
  // Undefined when degree variance over edge ends is zero.
  std::optional<double> degree_assortativity;
  std::vector<std::pair<std::string, std::size_t>> top_degree_nodes;
  // Same nodes' degree counting parallel edges.
  std::vector<std::pair<std::string, std::size_t>> top_multi_degree_nodes;
};

/// Network metrics on the undirected simple view (parallel edges collapsed, self-loops excluded).
GraphStats stats(const KnowledgeGraph& g, std::size_t top_k = 5);

std::string stats_markdown(const GraphStats& s);
std::string stats_csv(const GraphStats& s);

/// Line-oriented file: header (schema, version, counts, checksum), node records, edge records.
void save(const KnowledgeGraph& g, const std::filesystem::path& path);
/// Throws CorruptFile on checksum, count or schema mismatch.
KnowledgeGraph load(const std::filesystem::path& path);

}  // namespace chemhop::graph
