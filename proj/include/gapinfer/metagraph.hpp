#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gapinfer/beam.hpp"
#include "gapinfer/graph.hpp"
#include "gapinfer/smatch.hpp"

namespace gapinfer {

using VarId = int;

enum class VarKind { Node, Edge };

// One beam's realization of a variable: the concrete element in that beam's
// graph, where it sits in the linearization, and its element logprob.
struct Realization {
  std::string value;
  int element = -1;   // node id or edge index in the beam graph
  int position = -1;  // first symbol span denoting the element
  double logprob = 0.0;
};

struct SymbolicRealization {
  std::string value;
  int element = -1;  // node id or edge index in the symbolic graph
};

struct CandidateInfo {
  std::vector<int> beams;  // beams realizing this value, ascending
  bool symbolic = false;   // value also appears here in the symbolic graph
};

// A random variable of the merged graph: the label of one node slot or the
// role of one edge slot. parents/children are the DAG links; for GAP
// conditioning an edge variable's parent is its source node variable and a
// node variable's parents are its incoming edge variables (bare links, used
// only to keep unmapped roots attached, do not condition anything).
struct MetaVariable {
  VarId id = 0;
  VarKind kind = VarKind::Node;
  std::map<std::string, CandidateInfo> candidates;
  std::vector<VarId> parents;
  std::vector<VarId> children;
  VarId source = -1;  // edge variables only
  VarId target = -1;
};

struct MetaGraph {
  std::vector<MetaVariable> variables;
  VarId root_var = 0;
  int beam_count = 0;
  // realizations[k][v] is beam k's realization of variable v, if any
  std::vector<std::map<VarId, Realization>> realizations;
  std::map<VarId, SymbolicRealization> symbolic;
  bool has_symbolic = false;

  const Realization* realization(int beam, VarId v) const;
  // parent variables that actually condition v (see MetaVariable)
  std::vector<VarId> gap_parents(VarId v) const;
};

// Merges all hypotheses of a beam set into one meta graph. The best
// hypothesis anchors the variables; every further hypothesis is aligned
// against the current candidate sets and its nodes/edges either realize
// existing variables or open new ones. Alignments that would bend the
// variable DAG into a cycle are repaired by un-mapping the offending target
// node. Requires at least one candidate.
MetaGraph build_meta_graph(const BeamSet& beams, const AlignOptions& opt = {});

// Aligns the symbolic graph onto the meta graph, flags matching candidates,
// and opens symbolic-only variables for whatever it cannot map.
void attach_symbolic(MetaGraph& meta, const SemanticGraph& symbolic,
                     const AlignOptions& opt = {});

AlignView meta_view(const MetaGraph& meta);

nlohmann::json meta_to_json(const MetaGraph& meta);

}  // namespace gapinfer
