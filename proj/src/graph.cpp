#include "chemhop/graph.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "chemhop/error.hpp"
#include "chemhop/io.hpp"

namespace chemhop::graph {

namespace fs = std::filesystem;

KnowledgeGraph::KnowledgeGraph(std::map<std::string, Node> nodes, std::vector<Triplet> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  index();
}

void KnowledgeGraph::index() {
  names_.clear();
  by_name_.clear();
  by_key_.clear();
  for (const auto& [name, node] : nodes_) {
    by_name_.emplace(name, names_.size());
    by_key_.emplace(entity::merge_key(name), names_.size());
    names_.push_back(name);
  }
  incidence_.assign(names_.size(), {});
  simple_.assign(names_.size(), {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    auto h = index_of(edges_[e].head);
    auto t = index_of(edges_[e].tail);
    if (!h || !t) throw Error(ErrorCode::CorruptFile, "edge endpoint missing from nodes: " + edges_[e].head + " / " + edges_[e].tail);
    if (*h == *t) continue;
    incidence_[*h].push_back({*t, e});
    incidence_[*t].push_back({*h, e});
    simple_[*h].push_back(*t);
    simple_[*t].push_back(*h);
  }
  for (auto& adj : simple_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
}

std::optional<std::size_t> KnowledgeGraph::index_of(std::string_view canonical_name) const {
  auto it = by_name_.find(canonical_name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> KnowledgeGraph::find(std::string_view name) const {
  if (auto exact = index_of(name)) return exact;
  auto it = by_key_.find(entity::merge_key(name));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

bool KnowledgeGraph::adjacent(std::size_t a, std::size_t b) const {
  const auto& adj = simple_[a];
  return std::binary_search(adj.begin(), adj.end(), b);
}

KnowledgeGraph build(const std::vector<entity::Entity>& entities,
                     const std::vector<enrich::EnrichmentRecord>& enrichments, const std::vector<Triplet>& triplets) {
  std::map<std::string, Node> nodes;
  std::map<std::string, std::string> key_to_name;

  for (const auto& e : entities) {
    auto key = entity::merge_key(e.canonical_name);
    auto it = key_to_name.find(key);
    if (it == key_to_name.end()) {
      Node n;
      n.entity = e;
      n.source_chunk_ids = e.chunk_ids.empty() ? std::vector<std::string>{e.first_chunk_id} : e.chunk_ids;
      key_to_name.emplace(key, e.canonical_name);
      nodes.emplace(e.canonical_name, std::move(n));
      continue;
    }
    Node& n = nodes.at(it->second);
    n.entity.surface_forms.insert(e.surface_forms.begin(), e.surface_forms.end());
    for (const auto& c : e.chunk_ids) {
      if (std::find(n.source_chunk_ids.begin(), n.source_chunk_ids.end(), c) == n.source_chunk_ids.end()) {
        n.source_chunk_ids.push_back(c);
        n.entity.chunk_ids.push_back(c);
      }
    }
  }

  for (const auto& r : enrichments) {
    auto it = key_to_name.find(entity::merge_key(r.entity));
    if (it == key_to_name.end()) {
      spdlog::debug("enrichment for unknown entity '{}' ignored", r.entity);
      continue;
    }
    nodes.at(it->second).enrichment = r;
  }

  std::vector<Triplet> edges;
  std::set<Triplet> seen;
  std::size_t dropped = 0;
  for (const auto& t : triplets) {
    auto h = key_to_name.find(entity::merge_key(t.head));
    auto tl = key_to_name.find(entity::merge_key(t.tail));
    if (h == key_to_name.end() || tl == key_to_name.end() || h->second == tl->second) {
      ++dropped;
      spdlog::debug("triplet ({}, {}, {}) from {} dropped", t.head, t.relation, t.tail, t.source_chunk_id);
      continue;
    }
    Triplet e = t;
    e.head = h->second;
    e.tail = tl->second;
    if (!seen.insert(e).second) continue;
    // An edge's source chunk is also provenance for both endpoints.
    for (const auto* name : {&e.head, &e.tail}) {
      auto& srcs = nodes.at(*name).source_chunk_ids;
      if (std::find(srcs.begin(), srcs.end(), e.source_chunk_id) == srcs.end()) srcs.push_back(e.source_chunk_id);
    }
    edges.push_back(std::move(e));
  }
  if (dropped) spdlog::info("graph build dropped {} unresolvable triplets", dropped);
  return KnowledgeGraph(std::move(nodes), std::move(edges));
}

std::vector<std::string> dangling_sources(const KnowledgeGraph& g, const std::set<std::string>& chunk_ids) {
  std::set<std::string> out;
  for (const auto& [name, node] : g.nodes()) {
    for (const auto& c : node.source_chunk_ids) {
      if (!chunk_ids.count(c)) out.insert(c);
    }
  }
  for (const auto& e : g.edges()) {
    if (!chunk_ids.count(e.source_chunk_id)) out.insert(e.source_chunk_id);
  }
  return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Statistics

GraphStats stats(const KnowledgeGraph& g, std::size_t top_k) {
  GraphStats s;
  const std::size_t n = g.node_count();
  s.node_count = n;
  s.edge_count = g.edge_count();
  if (n == 0) return s;

  std::vector<std::size_t> deg(n), multi(n);
  std::size_t degree_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    deg[i] = g.neighbors(i).size();
    multi[i] = g.incident(i).size();
    degree_sum += deg[i];
  }
  s.simple_edge_count = degree_sum / 2;
  const double nd = static_cast<double>(n);
  s.density = n > 1 ? static_cast<double>(s.simple_edge_count) / (nd * (nd - 1.0) / 2.0) : 0.0;
  s.degree_min = static_cast<double>(*std::min_element(deg.begin(), deg.end()));
  s.degree_max = static_cast<double>(*std::max_element(deg.begin(), deg.end()));
  s.degree_avg = static_cast<double>(degree_sum) / nd;

  // Connected components by iterative DFS.
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    ++s.component_count;
    std::size_t size = 0;
    stack.push_back(i);
    seen[i] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      ++size;
      for (auto w : g.neighbors(v)) {
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    s.largest_component = std::max(s.largest_component, size);
  }

  // Local clustering averaged over all nodes; nodes of degree < 2 contribute 0.
  double clustering_sum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& adj = g.neighbors(v);
    if (adj.size() < 2) continue;
    std::size_t links = 0;
    for (std::size_t a = 0; a < adj.size(); ++a) {
      for (std::size_t b = a + 1; b < adj.size(); ++b) {
        if (g.adjacent(adj[a], adj[b])) ++links;
      }
    }
    double k = static_cast<double>(adj.size());
    clustering_sum += 2.0 * static_cast<double>(links) / (k * (k - 1.0));
  }
  s.avg_clustering = clustering_sum / nd;

  // Pearson correlation of degrees across both ends of every edge. The sums are
  // integers, so the ratio is formed from exact terms with a single division.
  unsigned __int128 sx = 0, sxx = 0, sxy = 0, ends = 0;
  for (std::size_t v = 0; v < n; ++v) {
    for (auto w : g.neighbors(v)) {
      sx += deg[v];
      sxx += static_cast<unsigned __int128>(deg[v]) * deg[v];
      sxy += static_cast<unsigned __int128>(deg[v]) * deg[w];
      ends += 1;
    }
  }
  if (ends > 0) {
    const auto num = static_cast<__int128>(ends * sxy) - static_cast<__int128>(sx * sx);
    const auto den = static_cast<__int128>(ends * sxx) - static_cast<__int128>(sx * sx);
    if (den > 0) s.degree_assortativity = static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return deg[a] > deg[b]; });
  for (std::size_t i = 0; i < std::min(top_k, n); ++i) {
    s.top_degree_nodes.emplace_back(g.name_of(order[i]), deg[order[i]]);
    s.top_multi_degree_nodes.emplace_back(g.name_of(order[i]), multi[order[i]]);
  }
  return s;
}

namespace {

std::string fmt_num(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string fmt_sig(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string top_nodes_text(const std::vector<std::pair<std::string, std::size_t>>& top) {
  std::string out;
  for (const auto& [name, d] : top) {
    if (!out.empty()) out += ", ";
    out += name + " (" + std::to_string(d) + ")";
  }
  return out;
}

}  // namespace

std::string stats_markdown(const GraphStats& s) {
  std::ostringstream md;
  md << "| Graph Metric | Value |\n|---|---|\n";
  md << "| Number of nodes | " << s.node_count << " |\n";
  md << "| Number of edges | " << s.edge_count << " |\n";
  md << "| Number of edges (simple view) | " << s.simple_edge_count << " |\n";
  md << "| Density | " << fmt_sig(s.density) << " |\n";
  md << "| Degree (min / max / avg) | " << fmt_num(s.degree_min, 0) << " / " << fmt_num(s.degree_max, 0) << " / "
     << fmt_num(s.degree_avg, 2) << " |\n";
  md << "| Connected components | " << s.component_count << " |\n";
  md << "| Largest component size | " << s.largest_component << " |\n";
  md << "| Avg. clustering coefficient | " << fmt_num(s.avg_clustering, 4) << " |\n";
  md << "| Degree assortativity coefficient | "
     << (s.degree_assortativity ? fmt_num(*s.degree_assortativity, 4) : std::string("undefined")) << " |\n";
  md << "| Top " << s.top_degree_nodes.size() << " nodes by degree | " << top_nodes_text(s.top_degree_nodes)
     << " |\n";
  md << "| Top nodes, degree with parallel edges | " << top_nodes_text(s.top_multi_degree_nodes) << " |\n";
  return md.str();
}

std::string stats_csv(const GraphStats& s) {
  std::ostringstream csv;
  csv << "metric,value\n";
  csv << "nodes," << s.node_count << "\n";
  csv << "edges," << s.edge_count << "\n";
  csv << "simple_edges," << s.simple_edge_count << "\n";
  csv << "density," << fmt_sig(s.density) << "\n";
  csv << "degree_min," << fmt_num(s.degree_min, 0) << "\n";
  csv << "degree_max," << fmt_num(s.degree_max, 0) << "\n";
  csv << "degree_avg," << fmt_num(s.degree_avg, 6) << "\n";
  csv << "connected_components," << s.component_count << "\n";
  csv << "largest_component," << s.largest_component << "\n";
  csv << "avg_clustering," << fmt_num(s.avg_clustering, 6) << "\n";
  csv << "degree_assortativity,"
      << (s.degree_assortativity ? fmt_num(*s.degree_assortativity, 6) : std::string("undefined")) << "\n";
  for (std::size_t i = 0; i < s.top_degree_nodes.size(); ++i) {
    csv << "top_degree_" << i + 1 << ",\"" << s.top_degree_nodes[i].first << " (" << s.top_degree_nodes[i].second
        << "; multi " << s.top_multi_degree_nodes[i].second << ")\"\n";
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// Persistence

namespace {
constexpr std::string_view kGraphSchema = "chemhop.graph";

json node_to_json(const Node& n) {
  return {{"type", "node"},
          {"entity", n.entity.to_json()},
          {"enrichment", n.enrichment ? n.enrichment->to_json() : json(nullptr)},
          {"source_chunk_ids", n.source_chunk_ids}};
}
}  // namespace

void save(const KnowledgeGraph& g, const fs::path& path) {
  std::string body;
  for (const auto& [name, node] : g.nodes()) body += node_to_json(node).dump() + "\n";
  for (const auto& e : g.edges()) {
    json j = e.to_json();
    j["type"] = "edge";
    body += j.dump() + "\n";
  }
  json header = {{"schema", kGraphSchema},
                 {"version", 1},
                 {"nodes", g.node_count()},
                 {"edges", g.edge_count()},
                 {"checksum", sha256_hex(body)}};
  write_file_atomic(path, header.dump() + "\n" + body);
}

KnowledgeGraph load(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingInput, path.string() + " does not exist");
  const std::string data = read_file(path);
  auto nl = data.find('\n');
  if (nl == std::string::npos) throw Error(ErrorCode::CorruptFile, path.string() + ": missing header");
  json header;
  try {
    header = json::parse(data.substr(0, nl));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": bad header");
  }
  if (header.value("schema", "") != kGraphSchema || header.value("version", 0) != 1) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": unsupported schema");
  }
  const std::string body = data.substr(nl + 1);
  if (sha256_hex(body) != header.value("checksum", "")) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": checksum mismatch");
  }

  std::map<std::string, Node> nodes;
  std::vector<Triplet> edges;
  std::istringstream in(body);
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      if (j.at("type") == "node") {
        Node n;
        n.entity = entity::Entity::from_json(j.at("entity"));
        if (!j.at("enrichment").is_null()) n.enrichment = enrich::EnrichmentRecord::from_json(j["enrichment"]);
        n.source_chunk_ids = j.at("source_chunk_ids").get<std::vector<std::string>>();
        auto name = n.entity.canonical_name;
        nodes.emplace(std::move(name), std::move(n));
      } else {
        edges.push_back(Triplet::from_json(j));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": bad record: " + e.what());
  }
  if (nodes.size() != header.value("nodes", 0UL) || edges.size() != header.value("edges", 0UL)) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": record count mismatch");
  }
  return KnowledgeGraph(std::move(nodes), std::move(edges));
}

}  // namespace chemhop::graph
