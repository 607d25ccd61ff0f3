#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/graph.hpp"

namespace chemhop::sampler {

using json = nlohmann::json;
using relation::Triplet;

/// What counts as "the same source" for the distinct-source constraint.
enum class SourceScope { Chunk, Document };

struct SamplerOptions {
  std::size_t max_hops = 4;
  SourceScope scope = SourceScope::Document;
  // Bounds on BFS work per start node; the shuffled frontier is truncated past these.
  std::size_t frontier_cap = 50000;
  std::size_t paths_per_start_cap = 256;
};

struct PathSample {
  std::vector<std::string> nodes;  // k + 1 canonical names in traversal order
  std::vector<Triplet> edges;      // edge i joins nodes[i] and nodes[i+1], stored direction kept
  std::size_t k = 0;
  std::size_t shortcut_count = 0;
  std::uint64_t seed = 0;
  std::string seed_trace;

  std::string path_id() const;
  json to_json() const;
  static PathSample from_json(const json& j);
  bool operator==(const PathSample&) const = default;
};

std::string source_key(const Triplet& t, SourceScope scope);

/// Randomized BFS sampling of k-edge simple paths whose edges come from pairwise
/// distinct sources. Start nodes are visited in shuffled order and each start's
/// BFS expands neighbours in shuffled order; paths are taken round-robin across
/// starts, skipping node sequences (or their reverses) already returned.
/// Deterministic for fixed (g, k, n, seed, options). Throws NoPathsAvailable.
std::vector<PathSample> sample_paths(const graph::KnowledgeGraph& g, std::size_t k, std::size_t n,
                                     std::uint64_t seed, const SamplerOptions& opts = {});

/// Edges of the undirected simple view joining path nodes that are not consecutive.
std::size_t count_shortcuts(const PathSample& p, const graph::KnowledgeGraph& g);

SourceScope parse_scope(const std::string& s);

}  // namespace chemhop::sampler
