#include "chemhop/sampler.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "chemhop/error.hpp"
#include "chemhop/io.hpp"

namespace chemhop::sampler {

std::string PathSample::path_id() const {
  // Orientation-free: a path and its reverse share an id.
  auto key_of = [this](bool reversed) {
    std::string key = std::to_string(k);
    for (std::size_t i = 0; i < nodes.size(); ++i) key += "\x1f" + nodes[reversed ? nodes.size() - 1 - i : i];
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[reversed ? edges.size() - 1 - i : i];
      key += "\x1e" + e.source_chunk_id + "\x1f" + e.relation;
    }
    return key;
  };
  const bool reversed = std::vector<std::string>(nodes.rbegin(), nodes.rend()) < nodes;
  return "p" + sha256_hex(key_of(reversed)).substr(0, 16);
}

json PathSample::to_json() const {
  json edges_j = json::array();
  for (const auto& e : edges) edges_j.push_back(e.to_json());
  return {{"path_id", path_id()}, {"k", k},        {"nodes", nodes},          {"edges", edges_j},
          {"shortcut_count", shortcut_count},       {"seed", seed}, {"seed_trace", seed_trace}};
}

PathSample PathSample::from_json(const json& j) {
  PathSample p;
  p.k = j.at("k");
  p.nodes = j.at("nodes").get<std::vector<std::string>>();
  for (const auto& e : j.at("edges")) p.edges.push_back(Triplet::from_json(e));
  p.shortcut_count = j.value("shortcut_count", 0UL);
  p.seed = j.value("seed", std::uint64_t{0});
  p.seed_trace = j.value("seed_trace", "");
  return p;
}

std::string source_key(const Triplet& t, SourceScope scope) {
  if (scope == SourceScope::Document && !t.source_doc_id.empty()) return "doc:" + t.source_doc_id;
  return "chunk:" + t.source_chunk_id;
}

SourceScope parse_scope(const std::string& s) {
  if (s == "chunk") return SourceScope::Chunk;
  if (s == "document") return SourceScope::Document;
  throw Error(ErrorCode::ConfigInvalid, "distinct_source_scope must be chunk or document, got '" + s + "'");
}

namespace {

// Fisher-Yates with rejection sampling, so results do not depend on the
// standard library's distribution implementation.
template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(v[i - 1], v[r % bound]);
  }
}

struct Partial {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> edges;
};

std::vector<Partial> bfs_paths(const graph::KnowledgeGraph& g, std::size_t start, std::size_t k,
                               const std::vector<std::string>& edge_source, std::mt19937_64& rng,
                               const SamplerOptions& opts) {
  std::vector<Partial> frontier{Partial{{start}, {}}};
  for (std::size_t level = 0; level < k && !frontier.empty(); ++level) {
    std::vector<Partial> next;
    for (const auto& p : frontier) {
      auto inc = g.incident(p.nodes.back());
      shuffle(inc, rng);
      for (const auto& [nb, e] : inc) {
        if (std::find(p.nodes.begin(), p.nodes.end(), nb) != p.nodes.end()) continue;
        const auto& src = edge_source[e];
        bool reused = std::any_of(p.edges.begin(), p.edges.end(), [&](std::size_t pe) { return edge_source[pe] == src; });
        if (reused) continue;
        Partial q = p;
        q.nodes.push_back(nb);
        q.edges.push_back(e);
        next.push_back(std::move(q));
      }
      if (next.size() >= opts.frontier_cap) break;
    }
    if (next.size() > opts.frontier_cap) next.resize(opts.frontier_cap);
    frontier = std::move(next);
  }
  if (frontier.size() > opts.paths_per_start_cap) frontier.resize(opts.paths_per_start_cap);
  return frontier;
}

std::vector<std::size_t> undirected_key(const std::vector<std::size_t>& nodes) {
  std::vector<std::size_t> rev(nodes.rbegin(), nodes.rend());
  return std::min(nodes, rev);
}

}  // namespace

std::vector<PathSample> sample_paths(const graph::KnowledgeGraph& g, std::size_t k, std::size_t n,
                                     std::uint64_t seed, const SamplerOptions& opts) {
  if (k == 0 || k > opts.max_hops) {
    throw Error(ErrorCode::InvalidArgument, "k must be in [1, " + std::to_string(opts.max_hops) + "]");
  }
  if (n == 0) return {};
  if (g.empty()) throw Error(ErrorCode::NoPathsAvailable, "graph is empty");

  std::vector<std::string> edge_source;
  edge_source.reserve(g.edge_count());
  for (const auto& e : g.edges()) edge_source.push_back(source_key(e, opts.scope));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> starts(g.node_count());
  std::iota(starts.begin(), starts.end(), 0);
  shuffle(starts, rng);

  std::vector<std::vector<Partial>> per_start(starts.size());
  std::vector<std::size_t> cursor(starts.size(), 0);
  std::vector<bool> expanded(starts.size(), false);
  std::set<std::vector<std::size_t>> taken;
  std::vector<PathSample> out;

  auto take_next = [&](std::size_t si, std::size_t round) -> bool {
    auto& list = per_start[si];
    while (cursor[si] < list.size()) {
      const Partial& p = list[cursor[si]++];
      if (!taken.insert(undirected_key(p.nodes)).second) continue;
      PathSample s;
      s.k = k;
      s.seed = seed;
      for (auto v : p.nodes) s.nodes.push_back(g.name_of(v));
      for (auto e : p.edges) s.edges.push_back(g.edges()[e]);
      s.seed_trace = "seed=" + std::to_string(seed) + ";start=" + g.name_of(starts[si]) + ";round=" +
                     std::to_string(round);
      s.shortcut_count = count_shortcuts(s, g);
      out.push_back(std::move(s));
      return true;
    }
    return false;
  };

  for (std::size_t round = 0; out.size() < n; ++round) {
    bool progressed = false;
    for (std::size_t si = 0; si < starts.size() && out.size() < n; ++si) {
      if (!expanded[si]) {
        per_start[si] = bfs_paths(g, starts[si], k, edge_source, rng, opts);
        expanded[si] = true;
      }
      progressed = take_next(si, round) || progressed;
    }
    if (!progressed) break;
  }

  if (out.empty()) {
    throw Error(ErrorCode::NoPathsAvailable, "no " + std::to_string(k) + "-hop path with distinct edge sources");
  }
  return out;
}

std::size_t count_shortcuts(const PathSample& p, const graph::KnowledgeGraph& g) {
  std::vector<std::size_t> idx;
  for (const auto& name : p.nodes) {
    auto i = g.index_of(name);
    if (!i) throw Error(ErrorCode::InvalidArgument, "path node '" + name + "' not in graph");
    idx.push_back(*i);
  }
  std::size_t chords = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 2; b < idx.size(); ++b) {
      if (g.adjacent(idx[a], idx[b])) ++chords;
    }
  }
  return chords;
}

}  // namespace chemhop::sampler
