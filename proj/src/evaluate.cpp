#include "gapinfer/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace gapinfer {

namespace {

constexpr double kCertaintyCutoff = -1e-5;

}  // namespace

CorpusScore corpus_smatch(const std::vector<SemanticGraph>& pred,
                          const std::vector<SemanticGraph>& gold, const AlignOptions& opt) {
  if (pred.empty()) throw EvalError("empty corpus");
  if (pred.size() != gold.size())
    throw EvalError("corpus size mismatch: " + std::to_string(pred.size()) +
                    " predictions, " + std::to_string(gold.size()) + " references");
  int m = 0, ta = 0, tb = 0;
  int nm = 0, nta = 0, ntb = 0;
  int em = 0, eta = 0, etb = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Alignment al = align(pred[i], gold[i], opt);
    m += al.matched;
    ta += static_cast<int>(pred[i].nodes.size() + pred[i].edges.size()) + 1;
    tb += static_cast<int>(gold[i].nodes.size() + gold[i].edges.size()) + 1;
    auto [nodes, edges] = node_edge_f1(pred[i], gold[i], al);
    nm += nodes.matched;
    nta += nodes.total_a;
    ntb += nodes.total_b;
    em += edges.matched;
    eta += edges.total_a;
    etb += edges.total_b;
  }
  CorpusScore out;
  out.smatch = make_score(m, ta, tb);
  out.nodes = make_score(nm, nta, ntb);
  out.edges = make_score(em, eta, etb);
  out.sentences = static_cast<int>(pred.size());
  return out;
}

CalibrationReport bin_elements(std::vector<CalibrationElement> elements, int n_bins) {
  if (n_bins <= 0) throw EvalError("bucket count must be positive");
  CalibrationReport report;
  std::vector<CalibrationElement> kept;
  for (const CalibrationElement& e : elements) {
    if (e.logprob > kCertaintyCutoff) {
      ++report.excluded;
    } else {
      kept.push_back(e);
    }
  }
  report.total = static_cast<int>(kept.size());
  if (n_bins > report.total)
    throw EvalError("asked for " + std::to_string(n_bins) + " buckets but only " +
                    std::to_string(report.total) + " elements survive the cutoff");
  std::stable_sort(kept.begin(), kept.end(),
                   [](const CalibrationElement& a, const CalibrationElement& b) {
                     return a.logprob < b.logprob;
                   });
  int base = report.total / n_bins;
  int extra = report.total % n_bins;
  std::size_t at = 0;
  int correct_total = 0;
  for (int b = 0; b < n_bins; ++b) {
    int size = base + (b < extra ? 1 : 0);
    CalibrationBucket bucket;
    bucket.count = size;
    bucket.low = kept[at].logprob;
    bucket.high = kept[at + size - 1].logprob;
    int correct = 0, sym_correct = 0;
    for (int i = 0; i < size; ++i) {
      const CalibrationElement& e = kept[at + i];
      if (e.neural_correct) ++correct;
      if (e.symbolic_correct) {
        ++bucket.symbolic_count;
        if (*e.symbolic_correct) ++sym_correct;
      }
    }
    bucket.neural_accuracy = static_cast<double>(correct) / size;
    if (bucket.symbolic_count > 0)
      bucket.symbolic_accuracy = static_cast<double>(sym_correct) / bucket.symbolic_count;
    correct_total += correct;
    at += size;
    report.buckets.push_back(bucket);
  }
  report.overall_neural_accuracy = static_cast<double>(correct_total) / report.total;
  return report;
}

namespace {

bool gold_has_edge(const SemanticGraph& gold, int src, int tgt, const std::string& label) {
  for (const Edge& e : gold.edges)
    if (e.source == src && e.target == tgt && e.label == label) return true;
  return false;
}

}  // namespace

std::vector<CalibrationElement> collect_calibration(const BeamSet& beams,
                                                    const SemanticGraph* symbolic,
                                                    const SemanticGraph& gold,
                                                    const PipelineConfig& config) {
  if (beams.candidates.empty()) return {};
  MetaGraph meta = build_meta_graph(beams, config.align);
  if (symbolic) attach_symbolic(meta, *symbolic, config.align);
  GapTables gap = compute_gap(meta, beams, config);

  // representative assignment: best-likelihood hypothesis-backed candidate
  // per variable (symbolic-only variables keep their only value but are not
  // scored neurally)
  std::map<VarId, std::string> assignment;
  std::map<VarId, bool> scored;
  for (const MetaVariable& var : meta.variables) {
    const std::string* best = nullptr;
    double best_ll = 0.0, best_m = 0.0;
    bool backed = false;
    for (const auto& [value, info] : var.candidates) {
      if (info.beams.empty()) continue;
      double ll = gap.cond_loglik.at({var.id, value});
      double m = gap.marginal.at({var.id, value});
      if (!best || ll > best_ll || (ll == best_ll && m > best_m)) {
        best = &value;
        best_ll = ll;
        best_m = m;
      }
      backed = true;
    }
    if (!backed) {  // symbolic-only variable
      assignment[var.id] = var.candidates.begin()->first;
      scored[var.id] = false;
      continue;
    }
    assignment[var.id] = *best;
    scored[var.id] = true;
  }
  InferenceResult rep;
  rep.assignment = assignment;
  assemble(meta, assignment, rep);
  Alignment to_gold = align(rep.graph, gold, config.align);
  Alignment symbolic_to_gold;
  if (symbolic) symbolic_to_gold = align(*symbolic, gold, config.align);

  std::vector<CalibrationElement> out;
  for (const MetaVariable& var : meta.variables) {
    if (!scored[var.id]) continue;
    CalibrationElement e;
    const std::string& value = assignment[var.id];
    e.logprob = gap.cond_loglik.at({var.id, value});
    if (var.kind == VarKind::Node) {
      auto it = rep.node_of.find(var.id);
      if (it != rep.node_of.end()) {
        int g = to_gold.mapping[it->second];
        e.neural_correct = g >= 0 && gold.nodes[g].label == value;
      }
    } else {
      auto it = rep.edge_of.find(var.id);
      if (it != rep.edge_of.end()) {
        const Edge& edge = rep.graph.edges[it->second];
        int gs = to_gold.mapping[edge.source], gt = to_gold.mapping[edge.target];
        e.neural_correct = gs >= 0 && gt >= 0 && gold_has_edge(gold, gs, gt, value);
      }
    }
    auto sym = meta.symbolic.find(var.id);
    if (symbolic && sym != meta.symbolic.end()) {
      const SymbolicRealization& r = sym->second;
      if (var.kind == VarKind::Node) {
        int g = symbolic_to_gold.mapping[r.element];
        e.symbolic_correct = g >= 0 && gold.nodes[g].label == r.value;
      } else {
        const Edge& edge = symbolic->edges[r.element];
        int gs = symbolic_to_gold.mapping[edge.source];
        int gt = symbolic_to_gold.mapping[edge.target];
        e.symbolic_correct = gs >= 0 && gt >= 0 && gold_has_edge(gold, gs, gt, r.value);
      }
    }
    out.push_back(e);
  }
  return out;
}

bool is_novel(const SemanticGraph& pred, const BeamSet& beams, const SemanticGraph* symbolic,
              const AlignOptions& opt) {
  for (const BeamCandidate& c : beams.candidates)
    if (graphs_match(pred, c.graph, opt)) return false;
  if (symbolic && graphs_match(pred, *symbolic, opt)) return false;
  return true;
}

NoveltyReport novelty_report(const std::vector<SemanticGraph>& pred,
                             const std::vector<BeamSet>& beams,
                             const std::vector<const SemanticGraph*>& symbolic,
                             const std::vector<SemanticGraph>& gold, const AlignOptions& opt) {
  if (pred.size() != beams.size() || pred.size() != gold.size() ||
      (!symbolic.empty() && symbolic.size() != pred.size()))
    throw EvalError("novelty report inputs disagree in length");
  NoveltyReport report;
  report.total = static_cast<int>(pred.size());
  std::vector<SemanticGraph> novel_pred, novel_gold, other_pred, other_gold;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const SemanticGraph* sym = symbolic.empty() ? nullptr : symbolic[i];
    if (is_novel(pred[i], beams[i], sym, opt)) {
      ++report.novel;
      novel_pred.push_back(pred[i]);
      novel_gold.push_back(gold[i]);
    } else {
      other_pred.push_back(pred[i]);
      other_gold.push_back(gold[i]);
    }
  }
  report.fraction = report.total ? static_cast<double>(report.novel) / report.total : 0.0;
  if (!novel_pred.empty()) report.novel_smatch = corpus_smatch(novel_pred, novel_gold, opt).smatch;
  if (!other_pred.empty()) report.other_smatch = corpus_smatch(other_pred, other_gold, opt).smatch;
  return report;
}

nlohmann::json score_to_json(const MatchScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall},     {"f1", s.f1},
          {"matched", s.matched},     {"total_pred", s.total_a}, {"total_gold", s.total_b}};
}

nlohmann::json calibration_to_json(const CalibrationReport& r) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const CalibrationBucket& b : r.buckets) {
    nlohmann::json jb = {{"low", b.low},
                         {"high", b.high},
                         {"count", b.count},
                         {"neural_accuracy", b.neural_accuracy},
                         {"symbolic_count", b.symbolic_count}};
    jb["symbolic_accuracy"] =
        b.symbolic_count > 0 ? nlohmann::json(b.symbolic_accuracy) : nlohmann::json();
    buckets.push_back(std::move(jb));
  }
  return {{"buckets", buckets},
          {"total", r.total},
          {"excluded", r.excluded},
          {"overall_neural_accuracy", r.overall_neural_accuracy}};
}

std::string calibration_to_csv(const CalibrationReport& r) {
  std::ostringstream os;
  os << "bucket_low,bucket_high,count,neural_accuracy,symbolic_count,symbolic_accuracy\n";
  for (const CalibrationBucket& b : r.buckets) {
    os << b.low << ',' << b.high << ',' << b.count << ',' << b.neural_accuracy << ','
       << b.symbolic_count << ',';
    if (b.symbolic_count > 0) os << b.symbolic_accuracy;
    os << '\n';
  }
  return os.str();
}

}  // namespace gapinfer
