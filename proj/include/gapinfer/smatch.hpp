#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gapinfer/graph.hpp"

namespace gapinfer {

struct MatchScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int matched = 0;
  int total_a = 0;  // triples on the A (prediction) side
  int total_b = 0;  // triples on the B (reference) side
};

MatchScore make_score(int matched, int total_a, int total_b);

struct AlignOptions {
  int restarts = 4;
  int iterations = 5;
  std::uint64_t seed = 0;
};

// Injective partial map from A's nodes to B's; mapping[a] is a B node or -1.
struct Alignment {
  std::vector<int> mapping;
  int matched = 0;
  MatchScore score;
};

// Alignment target where each node and each (src,tgt) slot may accept a set
// of labels. Plain graphs are the singleton case; the meta-graph merger
// aligns against candidate sets.
struct AlignView {
  int node_count = 0;
  int root = 0;
  std::vector<std::vector<std::string>> node_labels;            // sorted per node
  std::map<std::pair<int, int>, std::vector<std::string>> edge_labels;  // sorted

  static AlignView of(const SemanticGraph& graph);
  bool node_matches(int b, const std::string& label) const;
  bool edge_matches(int bs, int bt, const std::string& label) const;
};

// Hill-climbing alignment: restart 0 is a greedy label-match seed, further
// restarts are random injective seeds; each restart runs at most
// `iterations` first-improvement sweeps over remap and swap moves. Best
// restart wins; equal scores break toward the lexicographically smallest
// mapping vector.
Alignment align(const SemanticGraph& a, const SemanticGraph& b, const AlignOptions& opt = {});
Alignment align_to_view(const SemanticGraph& a, const AlignView& view, const AlignOptions& opt = {});

// Exact optimum by enumerating all injective mappings. Refuses graphs with
// more than 8 nodes on either side.
Alignment exhaustive_align(const SemanticGraph& a, const SemanticGraph& b);

// Smatch P/R/F1 of `pred` against `gold` under hill-climbing alignment.
MatchScore smatch_score(const SemanticGraph& pred, const SemanticGraph& gold,
                        const AlignOptions& opt = {});

// Node-only and edge-only F1 under one fixed alignment (top triple excluded
// from both).
std::pair<MatchScore, MatchScore> node_edge_f1(const SemanticGraph& pred,
                                               const SemanticGraph& gold,
                                               const Alignment& alignment);

// True when the graphs are label-isomorphic (Smatch f1 == 1 with equal triple
// counts); exact up to 8 nodes, hill-climbing above.
bool graphs_match(const SemanticGraph& a, const SemanticGraph& b,
                  const AlignOptions& opt = {});

}  // namespace gapinfer
