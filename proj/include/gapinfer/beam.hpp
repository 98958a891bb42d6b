#pragma once

#include <string>
#include <vector>

#include "gapinfer/graph.hpp"

namespace gapinfer {

struct Token {
  std::string text;
  double logprob = 0.0;
};

class BeamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One decoded hypothesis: the parsed graph plus per-symbol log-probabilities
// aligned with linearized.symbols. Element-level quantities are cached so the
// estimators can look them up by node id / edge index:
//   node logprob = sum over every span denoting the node (label + re-entries),
//   node position = its first span, edge logprob/position = the role span.
struct BeamCandidate {
  std::vector<Token> tokens;  // empty for precomputed inputs
  double sequence_logprob = 0.0;
  SemanticGraph graph;
  LinearizedGraph linearized;
  std::vector<double> symbol_logprobs;  // one per symbol span

  std::vector<double> node_logprob;
  std::vector<int> node_position;
  std::vector<double> edge_logprob;
  std::vector<int> edge_position;

  void finish();  // parses/validates nothing; fills the element caches
};

struct BeamSet {
  std::string id;
  std::string input;
  std::vector<BeamCandidate> candidates;  // sorted by sequence_logprob, best first
  int invalid_count = 0;                  // hypotheses dropped at load time
};

// Splits a token stream into graph symbols: the concatenation is parsed, each
// token is charged to the symbol span containing its first character, and
// tokens starting on structural characters are dropped from the symbol
// accounting (their mass stays in sequence_logprob). Throws BeamError when
// the concatenation does not parse or a logprob is positive.
BeamCandidate segment_symbols(const std::vector<Token>& tokens);

// Builds a candidate from an already-linearized graph plus per-symbol
// logprobs (must match the symbol count) and a total sequence logprob.
BeamCandidate make_candidate(const std::string& graph_text,
                             const std::vector<double>& symbol_logprobs,
                             double sequence_logprob);

// Reads one JSON record per line:
//   {"id": ..., "input": ..., "beams": [
//      {"tokens": [[text, logprob], ...]} |
//      {"graph": "(...)", "symbol_logprobs": [...], "sequence_logprob": ...}]}
// Unusable hypotheses are dropped and counted in invalid_count; `warnings`
// collects one message per dropped hypothesis or skipped record. A record
// that is not valid JSON or lacks the required fields is skipped entirely
// unless `strict`, in which case it throws.
std::vector<BeamSet> load_beams_jsonl(const std::string& path,
                                      std::vector<std::string>* warnings,
                                      bool strict = false);

}  // namespace gapinfer
