#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "gapinfer/config.hpp"
#include "gapinfer/metagraph.hpp"

namespace gapinfer {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Softmax over hypothesis sequence scores at a given temperature. Raw
// logprobs are kept so conditionals can renormalize over support subsets
// without running into underflow.
struct BeamPosterior {
  std::vector<double> weights;
  std::vector<double> seq_logprobs;
  double temperature = 0.1;
};

BeamPosterior beam_posterior(const BeamSet& beams, double temperature);

// A variable taking a concrete value.
struct GapEvent {
  VarId var = 0;
  std::string value;
};

// Posterior-weighted probability that the element occurs (absent hypotheses
// contribute zero).
double marginal(const MetaGraph& meta, const BeamPosterior& post, const GapEvent& event);

// Joint occurrence probability of several elements under one hypothesis
// distribution.
double marginal_joint(const MetaGraph& meta, const BeamPosterior& post,
                      const std::vector<GapEvent>& events);

// p(target | given): hypothesis weights renormalize over the subset realizing
// every conditioning event, and a hypothesis only contributes when the target
// sits strictly after all conditioning symbols in its linearization. Throws
// EstimationError when no hypothesis realizes the conditioning events.
double conditional(const MetaGraph& meta, const BeamPosterior& post, const GapEvent& target,
                   const std::vector<GapEvent>& given);

// Bayes reversal for targets that precede their conditioners in the
// linearizations: p(given|target) * p(target) / p(given), clamped to [0,1].
double reverse_conditional(const MetaGraph& meta, const BeamPosterior& post,
                           const GapEvent& target, const std::vector<GapEvent>& given);

// Average over the hypotheses realizing all of v's graph parents of
// log p(v = value | parents as that hypothesis assigns them); picks the
// reversed estimator per hypothesis when the variable's slot precedes a
// parent in that linearization. Probabilities are floored before the log.
// With no hypothesis realizing the parents the marginal substitutes and
// `fallback` (when given) is set.
double graphical_loglik(const MetaGraph& meta, const BeamPosterior& post, VarId v,
                        const std::string& value, double logprob_floor,
                        bool* fallback = nullptr);

struct GapTables {
  std::map<std::pair<VarId, std::string>, double> marginal;
  std::map<std::pair<VarId, std::string>, double> cond_loglik;
  // same quantity before averaging, keyed by the parent assignment signature
  std::map<std::tuple<VarId, std::string, std::string>, double> cond_by_parents;
  std::set<VarId> marginal_fallback;

  double assignment_loglik(const std::map<VarId, std::string>& chosen) const;
};

// Fills every table for every candidate of every variable. Symbolic-only
// candidates carry zero marginal and floored conditional log-likelihood.
GapTables compute_gap(const MetaGraph& meta, const BeamSet& beams,
                      const PipelineConfig& config);

// Marginal table only (enough for pruning decisions).
std::map<std::pair<VarId, std::string>, double> compute_marginals(
    const MetaGraph& meta, const BeamSet& beams, const PipelineConfig& config);

}  // namespace gapinfer
