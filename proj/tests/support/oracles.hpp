#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "chemhop/corpus.hpp"
#include "chemhop/graph.hpp"
#include "chemhop/qa.hpp"
#include "chemhop/sampler.hpp"

namespace chemhop::testing {

/// Entities and triplets for graph::build, generated from a seed. Names are
/// "n000".., sources are spread over `docs` documents with two chunks each.
/// May contain parallel edges and self-loops.
struct RandomGraphSpec {
  std::vector<entity::Entity> entities;
  std::vector<relation::Triplet> triplets;
};
RandomGraphSpec random_graph(std::uint64_t seed, std::size_t nodes, std::size_t edges, std::size_t docs);
graph::KnowledgeGraph build_graph(const RandomGraphSpec& spec);

/// Network metrics computed from the raw triplet list with an adjacency
/// matrix, union-find and explicit triangle enumeration.
struct BruteStats {
  std::size_t nodes = 0;
  std::size_t simple_edges = 0;
  double density = 0;
  double degree_min = 0, degree_max = 0, degree_avg = 0;
  std::size_t components = 0;
  std::size_t largest_component = 0;
  double avg_clustering = 0;
  std::optional<double> assortativity;
};
BruteStats brute_stats(const std::vector<std::string>& names, const std::vector<relation::Triplet>& triplets);

/// Every k-edge simple path with pairwise distinct edge sources, as node
/// sequences in canonical orientation (lexicographically smaller of the two).
std::set<std::vector<std::string>> enumerate_paths(const std::vector<relation::Triplet>& triplets, std::size_t k,
                                                   sampler::SourceScope scope);
std::vector<std::string> canonical_orientation(std::vector<std::string> nodes);

/// Pairs of path nodes at distance >= 2 along the path that share an edge.
std::size_t pair_scan_shortcuts(const std::vector<std::string>& nodes, const std::vector<relation::Triplet>& triplets);

/// Direct-formula dataset statistics used to cross-check eval::dataset_stats.
struct MeanSdOracle {
  double mean = 0, sd = 0;
};
MeanSdOracle mean_sd_direct(const std::vector<double>& xs);

/// Code points by decoding UTF-8 lead bytes.
std::size_t utf8_code_points(const std::string& s);

/// Dataset of `n` items with 1..5 hops, random shortcut counts and non-ASCII text.
struct SyntheticDataset {
  std::vector<qa::MultiHopQA> items;
  corpus::ChunkIndex chunks;
};
SyntheticDataset synthetic_dataset(std::uint64_t seed, std::size_t n);

/// Paragraph corpus of `paragraphs` paragraphs with 1..max_words words each.
std::vector<std::string> random_paragraphs(std::mt19937_64& rng, std::size_t paragraphs, std::size_t max_words);

}  // namespace chemhop::testing
