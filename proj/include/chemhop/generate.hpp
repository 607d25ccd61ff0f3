#pragma once

#include <optional>
#include <vector>

#include "chemhop/corpus.hpp"
#include "chemhop/graph.hpp"
#include "chemhop/llm.hpp"
#include "chemhop/qa.hpp"
#include "chemhop/sampler.hpp"
#include "chemhop/verify.hpp"

namespace chemhop::generate {

/// Chain order for a path: the traversal order or its reverse, whichever has
/// more edges stored in the forward direction (ties keep traversal order).
/// Element i asks for the chain's i-th entity given the (i+1)-th.
std::vector<qa::OrientedTriplet> orient(const sampler::PathSample& path);

struct Options {
  qa::GenOptions generator;
  verify::JudgeOptions verifier;
  bool verify_hops = true;
};

struct Outcome {
  std::optional<qa::MultiHopQA> item;
  std::optional<verify::DropRecord> drop;
};

/// One-hop questions for every edge, each checked by the one-hop judge; a "no"
/// triggers one regeneration with the answer entity's metadata when the graph
/// has any. Surviving chains are aggregated. Failures become a drop record.
Outcome generate_for_path(const sampler::PathSample& path, const graph::KnowledgeGraph& g,
                          const corpus::ChunkIndex& chunks, llm::Gateway& gateway, const Options& opts);

}  // namespace chemhop::generate
