#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gapinfer/inference.hpp"

namespace gapinfer {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorpusScore {
  MatchScore smatch;  // micro-aggregated over sentences
  MatchScore nodes;
  MatchScore edges;
  int sentences = 0;
};

CorpusScore corpus_smatch(const std::vector<SemanticGraph>& pred,
                          const std::vector<SemanticGraph>& gold,
                          const AlignOptions& opt = {});

// One scored meta-graph variable: its best conditional log-likelihood and
// whether the chosen candidate (and, where present, the symbolic value)
// agrees with the gold graph.
struct CalibrationElement {
  double logprob = 0.0;
  bool neural_correct = false;
  std::optional<bool> symbolic_correct;
};

struct CalibrationBucket {
  double low = 0.0;   // logprob range covered
  double high = 0.0;
  int count = 0;
  double neural_accuracy = 0.0;
  int symbolic_count = 0;
  double symbolic_accuracy = 0.0;  // meaningless when symbolic_count == 0
};

struct CalibrationReport {
  std::vector<CalibrationBucket> buckets;  // ascending probability
  int total = 0;     // elements kept
  int excluded = 0;  // near-certain elements dropped before binning
  double overall_neural_accuracy = 0.0;
};

// Bookkeeping half of calibration: drops elements with logprob above
// -1e-5 (near-certainty), sorts by logprob, splits into n_bins equal-count
// buckets (sizes differing by at most one), and averages correctness per
// bucket. Errors when n_bins is not positive or exceeds the element count.
CalibrationReport bin_elements(std::vector<CalibrationElement> elements, int n_bins);

// Scores every hypothesis-realized variable of one sentence against gold:
// builds the meta graph, takes each variable's best-likelihood candidate,
// assembles that representative graph, aligns it (and the symbolic graph)
// to gold, and emits per-variable correctness. Variables the assembly
// cannot express count as incorrect.
std::vector<CalibrationElement> collect_calibration(const BeamSet& beams,
                                                    const SemanticGraph* symbolic,
                                                    const SemanticGraph& gold,
                                                    const PipelineConfig& config);

struct NoveltyReport {
  int total = 0;
  int novel = 0;
  double fraction = 0.0;
  std::optional<MatchScore> novel_smatch;  // micro over the novel subset
  std::optional<MatchScore> other_smatch;
};

// A prediction is novel when it is label-isomorphic to none of its
// hypotheses and not to the symbolic graph either.
bool is_novel(const SemanticGraph& pred, const BeamSet& beams,
              const SemanticGraph* symbolic, const AlignOptions& opt = {});

NoveltyReport novelty_report(const std::vector<SemanticGraph>& pred,
                             const std::vector<BeamSet>& beams,
                             const std::vector<const SemanticGraph*>& symbolic,
                             const std::vector<SemanticGraph>& gold,
                             const AlignOptions& opt = {});

nlohmann::json score_to_json(const MatchScore& s);
nlohmann::json calibration_to_json(const CalibrationReport& r);
std::string calibration_to_csv(const CalibrationReport& r);

}  // namespace gapinfer
