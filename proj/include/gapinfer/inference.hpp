#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gapinfer/gap.hpp"

namespace gapinfer {

class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Neural-vs-symbolic gate: logistic(-surprisal / alpha_temperature +
// alpha_bias). High surprisal pushes the decision toward the symbolic prior.
double alpha_gate(double surprisal, const PipelineConfig& config);

// Surprisal of a variable: negative best conditional log-likelihood over its
// hypothesis-realized candidates; symbolic-only variables sit at the floor's
// magnitude.
double variable_surprisal(const MetaGraph& meta, const GapTables& gap, VarId v,
                          const PipelineConfig& config);

// Decision score R(v = value): alpha-weighted conditional log-likelihood plus
// (1 - alpha) times the indicator prior (1 when the symbolic graph puts
// `value` here, else 0; identically 0 without a symbolic graph).
double criterion(const MetaGraph& meta, const GapTables& gap, VarId v,
                 const std::string& value, const PipelineConfig& config);

struct VariableDecision {
  VarId var = 0;
  VarKind kind = VarKind::Node;
  std::string chosen;
  double alpha = 0.0;
  double score = 0.0;     // criterion at the chosen value
  double marginal = 0.0;  // marginal at the chosen value
};

struct InferenceResult {
  SemanticGraph graph;
  std::map<VarId, std::string> assignment;  // every variable's winning value
  std::vector<VariableDecision> decisions;  // in variable id order
  std::map<VarId, NodeId> node_of;          // assembled node variables
  std::map<VarId, int> edge_of;             // assembled edge variables
  double graph_loglik = 0.0;                // assignment_loglik over assembled variables
};

// Argmax of the criterion per variable (ties: larger marginal, then smaller
// value), then assembly along edge-variable chains from the root. Variables
// only attached by bare links cannot be expressed as graph elements and stay
// out of the assembled graph.
InferenceResult infer(const MetaGraph& meta, const GapTables& gap,
                      const PipelineConfig& config);

// Builds the output graph for an explicit assignment; used by inference and
// by calibration's representative graph.
void assemble(const MetaGraph& meta, const std::map<VarId, std::string>& assignment,
              InferenceResult& out);

// Removes variables whose best candidate marginal falls below the threshold,
// together with any below-threshold variables their removal would orphan
// (dangling edge variables, unreachable subgraphs). A removal that would have
// to take an at-or-above-threshold variable or the root with it is skipped
// entirely. threshold <= 0 returns the input unchanged.
MetaGraph prune(const MetaGraph& meta,
                const std::map<std::pair<VarId, std::string>, double>& marginals,
                double threshold);

struct MixtureComponent {
  std::vector<int> beams;   // ascending member hypothesis indices
  double weight = 0.0;      // member fraction
  double surprisal = 0.0;   // mean negative sequence logprob
  int top_beam = 0;         // best-scoring member
};

struct MixtureModel {
  std::vector<MixtureComponent> components;
  std::vector<std::vector<double>> distance;  // pairwise hypothesis distances
};

// 1 - |LCS| / max(length) over symbol sequences.
double lcs_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

std::vector<std::string> symbol_texts(const BeamCandidate& candidate);

// Average-linkage agglomeration over LCS distances, merging while the
// closest pair sits below mixture_cut. Components come out ordered by their
// smallest member.
MixtureModel cluster_beams(const BeamSet& beams, const PipelineConfig& config);

// Index of the component maximizing alpha * log weight + (1 - alpha) *
// sign * Smatch-f1 against the symbolic graph (0 without one); ties prefer
// the heavier component, then the smaller index. `scores` receives each
// component's value when given.
int mixture_select(const MixtureModel& mixture, const BeamSet& beams,
                   const SemanticGraph* symbolic, const PipelineConfig& config,
                   std::vector<double>* scores = nullptr);

struct PipelineResult {
  SemanticGraph graph;
  MetaGraph meta;
  GapTables gap;
  InferenceResult inference;
  int component = 0;
  int component_count = 1;
  bool novel = false;
  bool symbolic_fallback = false;  // emitted the symbolic graph verbatim
};

// Full decoding path: optional mixture selection, meta-graph construction,
// symbolic attachment, optional pruning, estimation, inference, novelty
// check against every original hypothesis and the symbolic graph. An empty
// beam set falls back to the symbolic graph or throws without one.
PipelineResult run_pipeline(const BeamSet& beams, const SemanticGraph* symbolic,
                            const PipelineConfig& config);

}  // namespace gapinfer
