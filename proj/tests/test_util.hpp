#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gapinfer/beam.hpp"
#include "gapinfer/graph.hpp"
#include "gapinfer/metagraph.hpp"

namespace testutil {

gapinfer::SemanticGraph parse_graph(const std::string& text);

// Candidate from plain probabilities (converted to logs here).
gapinfer::BeamCandidate cand(const std::string& text, const std::vector<double>& symbol_probs,
                             double sequence_prob);

// Canonical two-beam fixture: (_a_n :ARG1 (_b_n)) with symbol probs
// (1, 1, .9) and sequence prob .9 against (_a_n :ARG1 (_c_n)) with
// (1, .5, .8) and .4. Designed to be combined at temperature 1.
gapinfer::BeamSet f1_beams();
gapinfer::SemanticGraph f1_symbolic();  // (_a_n :ARG1 (_c_n))

// Five hypotheses in two structurally disjoint groups: beams 0/2/4 share one
// symbol sequence, beams 1/3 another with no symbol in common.
gapinfer::BeamSet two_group_beams();

struct NoveltyFixture {
  gapinfer::BeamSet beams;
  gapinfer::SemanticGraph symbolic;
  gapinfer::SemanticGraph gold;
};

// Both hypotheses and the symbolic graph are wrong in one place each; the
// per-variable decision recombines them into the gold graph, which matches
// none of the inputs.
NoveltyFixture novelty_fixture();

// Random rooted DAG: spanning tree plus extra edges at the given reentrancy
// rate, node ids shuffled so they do not follow discovery order.
gapinfer::SemanticGraph random_dag(std::mt19937_64& rng, int max_nodes, double reentrancy);

// Relabels a few nodes/edges of a copy; keeps the structure.
gapinfer::SemanticGraph mutate_graph(const gapinfer::SemanticGraph& g, std::mt19937_64& rng);

// Small beam set for estimator checks: K in 1..4, hypotheses of at most 6
// symbols, correlated labels so values recur across hypotheses.
gapinfer::BeamSet random_beam_set(std::mt19937_64& rng);

// Larger beam set (up to 8 nodes per hypothesis) for pruning checks.
gapinfer::BeamSet random_beam_set_large(std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Brute-force estimator oracle. Works on the event table extracted from a
// meta graph (same event definitions, independent arithmetic in long double:
// weights are plain exp(lp/t)/Z, probabilities direct sums over hypotheses).

enum class OracleStatus { Ok, NoSupport, ZeroGiven };

struct OracleResult {
  OracleStatus status = OracleStatus::Ok;
  long double value = 0.0L;
};

struct OracleEvent {
  std::string value;
  int position = -1;
  long double logprob = 0.0L;
};

struct OracleBeam {
  std::map<int, OracleEvent> events;  // variable id -> realization
  long double seq_logprob = 0.0L;
};

using OracleGiven = std::vector<std::pair<int, std::string>>;

struct Oracle {
  std::vector<OracleBeam> beams;
  long double temperature = 1.0L;

  std::vector<long double> weights() const;
  bool supports(const OracleBeam& b, const OracleGiven& events) const;
  long double joint(const OracleGiven& events) const;
  long double marginal(int var, const std::string& value) const;
  OracleResult conditional(int var, const std::string& value, const OracleGiven& given) const;
  OracleResult reverse(int var, const std::string& value, const OracleGiven& given) const;

  struct Graphical {
    long double value = 0.0L;
    bool fallback = false;
  };
  Graphical graphical(int var, const std::string& value, const std::vector<int>& parents,
                      long double floor_logprob) const;

 private:
  OracleResult forward_joint(const OracleGiven& targets, const OracleGiven& given) const;
};

Oracle oracle_of(const gapinfer::MetaGraph& meta, const gapinfer::BeamSet& beams,
                 double temperature);

// ---------------------------------------------------------------------------
// Scratch files.

std::string temp_dir();
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace testutil
