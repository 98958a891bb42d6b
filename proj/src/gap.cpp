#include "gapinfer/gap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gapinfer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> stable_softmax(const std::vector<double>& scores) {
  double m = kNegInf;
  for (double s : scores) m = std::max(m, s);
  std::vector<double> w(scores.size());
  if (m == kNegInf) {  // every hypothesis has probability zero: flat
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(scores.size()));
    return w;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += (w[i] = std::exp(scores[i] - m));
  for (double& x : w) x /= z;
  return w;
}

}  // namespace

BeamPosterior beam_posterior(const BeamSet& beams, double temperature) {
  if (beams.candidates.empty()) throw EstimationError("posterior over zero hypotheses");
  if (temperature <= 0.0) throw EstimationError("temperature must be positive");
  BeamPosterior post;
  post.temperature = temperature;
  for (const BeamCandidate& c : beams.candidates) post.seq_logprobs.push_back(c.sequence_logprob);
  std::vector<double> scaled;
  for (double lp : post.seq_logprobs) scaled.push_back(lp / temperature);
  post.weights = stable_softmax(scaled);
  return post;
}

namespace {

bool supports(const MetaGraph& meta, int beam, const std::vector<GapEvent>& events) {
  for (const GapEvent& e : events) {
    const Realization* r = meta.realization(beam, e.var);
    if (!r || r->value != e.value) return false;
  }
  return true;
}

int max_position(const MetaGraph& meta, int beam, const std::vector<GapEvent>& events) {
  int pos = -1;
  for (const GapEvent& e : events)
    pos = std::max(pos, meta.realization(beam, e.var)->position);
  return pos;
}

// weights renormalized over the hypotheses supporting `given`; empty when
// nothing does
std::vector<std::pair<int, double>> support_weights(const MetaGraph& meta,
                                                    const BeamPosterior& post,
                                                    const std::vector<GapEvent>& given) {
  std::vector<int> beams;
  std::vector<double> scores;
  for (int k = 0; k < meta.beam_count; ++k) {
    if (!supports(meta, k, given)) continue;
    beams.push_back(k);
    scores.push_back(post.seq_logprobs[k] / post.temperature);
  }
  std::vector<std::pair<int, double>> out;
  if (beams.empty()) return out;
  std::vector<double> w = stable_softmax(scores);
  for (std::size_t i = 0; i < beams.size(); ++i) out.emplace_back(beams[i], w[i]);
  return out;
}

bool contains(const std::vector<GapEvent>& events, const GapEvent& e) {
  for (const GapEvent& g : events)
    if (g.var == e.var && g.value == e.value) return true;
  return false;
}

// p(targets jointly | given), targets required strictly after the
// conditioning symbols within each contributing hypothesis
double forward_joint(const MetaGraph& meta, const BeamPosterior& post,
                     const std::vector<GapEvent>& targets, const std::vector<GapEvent>& given) {
  auto sw = support_weights(meta, post, given);
  if (sw.empty()) throw EstimationError("conditioning events unobserved in every hypothesis");
  double p = 0.0;
  for (const auto& [k, w] : sw) {
    if (!supports(meta, k, targets)) continue;
    int after = max_position(meta, k, given);
    double lp = 0.0;
    bool ordered = true;
    for (const GapEvent& t : targets) {
      const Realization* r = meta.realization(k, t.var);
      if (r->position <= after) {
        ordered = false;
        break;
      }
      lp += r->logprob;
    }
    if (ordered) p += w * std::exp(lp);
  }
  return p;
}

}  // namespace

double marginal(const MetaGraph& meta, const BeamPosterior& post, const GapEvent& event) {
  return marginal_joint(meta, post, {event});
}

double marginal_joint(const MetaGraph& meta, const BeamPosterior& post,
                      const std::vector<GapEvent>& events) {
  double p = 0.0;
  for (int k = 0; k < meta.beam_count; ++k) {
    if (post.weights[k] == 0.0 || !supports(meta, k, events)) continue;
    double lp = 0.0;
    for (const GapEvent& e : events) lp += meta.realization(k, e.var)->logprob;
    p += post.weights[k] * std::exp(lp);
  }
  return p;
}

double conditional(const MetaGraph& meta, const BeamPosterior& post, const GapEvent& target,
                   const std::vector<GapEvent>& given) {
  if (contains(given, target)) {
    if (support_weights(meta, post, given).empty())
      throw EstimationError("conditioning events unobserved in every hypothesis");
    return 1.0;
  }
  return forward_joint(meta, post, {target}, given);
}

double reverse_conditional(const MetaGraph& meta, const BeamPosterior& post,
                           const GapEvent& target, const std::vector<GapEvent>& given) {
  if (given.empty() || contains(given, target)) return conditional(meta, post, target, given);
  double p_given = marginal_joint(meta, post, given);
  if (p_given <= 0.0) throw EstimationError("conditioning probability is zero");
  double p_target = marginal(meta, post, target);
  if (p_target == 0.0) return 0.0;
  double p_given_after = forward_joint(meta, post, given, {target});
  return std::clamp(p_given_after * p_target / p_given, 0.0, 1.0);
}

namespace {

std::string assignment_key(const std::vector<GapEvent>& given) {
  if (given.empty()) return "-";
  std::ostringstream os;
  for (std::size_t i = 0; i < given.size(); ++i) {
    if (i) os << '|';
    os << given[i].var << '=' << given[i].value;
  }
  return os.str();
}

struct LoglikTerm {
  int beam = 0;
  std::vector<GapEvent> parents;
  double loglik = 0.0;
};

// One floored log-conditional per hypothesis that realizes all of v's graph
// parents, reversing the estimator when v's slot precedes a parent in that
// hypothesis. Empty result means no hypothesis pins the parents down.
std::vector<LoglikTerm> loglik_terms(const MetaGraph& meta, const BeamPosterior& post, VarId v,
                                     const std::string& value, double logprob_floor) {
  std::vector<VarId> parents = meta.gap_parents(v);
  std::vector<LoglikTerm> terms;
  for (int k = 0; k < meta.beam_count; ++k) {
    std::vector<GapEvent> given;
    bool all = true;
    for (VarId p : parents) {
      const Realization* r = meta.realization(k, p);
      if (!r) {
        all = false;
        break;
      }
      given.push_back({p, r->value});
    }
    if (!all) continue;
    const Realization* rv = meta.realization(k, v);
    bool reversed = rv && !given.empty() && rv->position < max_position(meta, k, given);
    double p = reversed ? reverse_conditional(meta, post, {v, value}, given)
                        : conditional(meta, post, {v, value}, given);
    double lp = std::max(p > 0.0 ? std::log(p) : kNegInf, logprob_floor);
    terms.push_back({k, std::move(given), lp});
  }
  return terms;
}

double floored_log_marginal(const MetaGraph& meta, const BeamPosterior& post, VarId v,
                            const std::string& value, double logprob_floor) {
  double m = marginal(meta, post, {v, value});
  return std::max(m > 0.0 ? std::log(m) : kNegInf, logprob_floor);
}

}  // namespace

double graphical_loglik(const MetaGraph& meta, const BeamPosterior& post, VarId v,
                        const std::string& value, double logprob_floor, bool* fallback) {
  std::vector<LoglikTerm> terms = loglik_terms(meta, post, v, value, logprob_floor);
  if (fallback) *fallback = terms.empty();
  if (terms.empty()) return floored_log_marginal(meta, post, v, value, logprob_floor);
  double total = 0.0;
  for (const LoglikTerm& t : terms) total += t.loglik;
  return total / static_cast<double>(terms.size());
}

double GapTables::assignment_loglik(const std::map<VarId, std::string>& chosen) const {
  double total = 0.0;
  for (const auto& [v, value] : chosen) total += cond_loglik.at({v, value});
  return total;
}

GapTables compute_gap(const MetaGraph& meta, const BeamSet& beams,
                      const PipelineConfig& config) {
  BeamPosterior post = beam_posterior(beams, config.aggregation_temperature);
  GapTables tables;
  for (const MetaVariable& var : meta.variables) {
    for (const auto& [value, info] : var.candidates) {
      tables.marginal[{var.id, value}] = marginal(meta, post, {var.id, value});
      if (info.beams.empty()) {  // symbolic-only candidate
        tables.cond_loglik[{var.id, value}] = config.logprob_floor;
        continue;
      }
      std::vector<LoglikTerm> terms =
          loglik_terms(meta, post, var.id, value, config.logprob_floor);
      if (terms.empty()) {
        tables.marginal_fallback.insert(var.id);
        tables.cond_loglik[{var.id, value}] =
            floored_log_marginal(meta, post, var.id, value, config.logprob_floor);
        continue;
      }
      double total = 0.0;
      for (const LoglikTerm& t : terms) {
        tables.cond_by_parents[{var.id, value, assignment_key(t.parents)}] = t.loglik;
        total += t.loglik;
      }
      tables.cond_loglik[{var.id, value}] = total / static_cast<double>(terms.size());
    }
  }
  return tables;
}

std::map<std::pair<VarId, std::string>, double> compute_marginals(
    const MetaGraph& meta, const BeamSet& beams, const PipelineConfig& config) {
  BeamPosterior post = beam_posterior(beams, config.aggregation_temperature);
  std::map<std::pair<VarId, std::string>, double> out;
  for (const MetaVariable& var : meta.variables)
    for (const auto& [value, info] : var.candidates)
      out[{var.id, value}] = marginal(meta, post, {var.id, value});
  return out;
}

}  // namespace gapinfer
