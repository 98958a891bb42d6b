#include "gapinfer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace gapinfer {

double alpha_gate(double surprisal, const PipelineConfig& config) {
  return 1.0 / (1.0 + std::exp(surprisal / config.alpha_temperature - config.alpha_bias));
}

double variable_surprisal(const MetaGraph& meta, const GapTables& gap, VarId v,
                          const PipelineConfig& config) {
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& [value, info] : meta.variables[v].candidates) {
    if (info.beams.empty()) continue;
    best = std::max(best, gap.cond_loglik.at({v, value}));
    any = true;
  }
  return any ? -best : -config.logprob_floor;
}

double criterion(const MetaGraph& meta, const GapTables& gap, VarId v,
                 const std::string& value, const PipelineConfig& config) {
  double loglik = gap.cond_loglik.at({v, value});
  double surprisal = config.alpha_per_candidate
                         ? -loglik
                         : variable_surprisal(meta, gap, v, config);
  double a = alpha_gate(surprisal, config);
  double prior = 0.0;
  if (meta.has_symbolic) {
    auto it = meta.variables[v].candidates.find(value);
    if (it != meta.variables[v].candidates.end() && it->second.symbolic) prior = 1.0;
  }
  return a * loglik + (1.0 - a) * prior;
}

void assemble(const MetaGraph& meta, const std::map<VarId, std::string>& assignment,
              InferenceResult& out) {
  out.graph = SemanticGraph{};
  out.node_of.clear();
  out.edge_of.clear();
  // first-visit order assigns output node ids; only edge-variable chains can
  // be expressed as graph structure
  std::vector<VarId> stack{meta.root_var};
  out.node_of[meta.root_var] = 0;
  out.graph.nodes.push_back({0, assignment.at(meta.root_var)});
  out.graph.root = 0;
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    std::vector<VarId> pending;  // keep children order despite LIFO traversal
    for (VarId c : meta.variables[v].children) {
      if (meta.variables[c].kind != VarKind::Edge) continue;
      VarId tv = meta.variables[c].target;
      if (!out.node_of.count(tv)) {
        NodeId id = static_cast<NodeId>(out.graph.nodes.size());
        out.node_of[tv] = id;
        out.graph.nodes.push_back({id, assignment.at(tv)});
        pending.push_back(tv);
      }
      const std::string& label = assignment.at(c);
      NodeId s = out.node_of[v], t = out.node_of[tv];
      for (const Edge& e : out.graph.edges)
        if (e.source == s && e.target == t && e.label == label)
          throw InferenceError("assembly produced a duplicate edge :" + label);
      out.edge_of[c] = static_cast<int>(out.graph.edges.size());
      out.graph.edges.push_back({s, t, label});
    }
    for (auto it = pending.rbegin(); it != pending.rend(); ++it) stack.push_back(*it);
  }
  validate(out.graph);
}

InferenceResult infer(const MetaGraph& meta, const GapTables& gap,
                      const PipelineConfig& config) {
  InferenceResult out;
  for (const MetaVariable& var : meta.variables) {
    const std::string* best = nullptr;
    double best_score = 0.0, best_marginal = 0.0;
    for (const auto& [value, info] : var.candidates) {
      double score = criterion(meta, gap, var.id, value, config);
      double m = gap.marginal.at({var.id, value});
      // candidates iterate in value order, so strict comparisons keep the
      // lexicographically smallest winner on full ties
      if (!best || score > best_score || (score == best_score && m > best_marginal)) {
        best = &value;
        best_score = score;
        best_marginal = m;
      }
    }
    if (!best) throw InferenceError("variable without candidates");
    out.assignment[var.id] = *best;
    out.decisions.push_back({var.id, var.kind, *best,
                             alpha_gate(variable_surprisal(meta, gap, var.id, config), config),
                             best_score, best_marginal});
  }
  assemble(meta, out.assignment, out);
  out.graph_loglik = 0.0;
  for (const auto& [v, id] : out.node_of) out.graph_loglik += gap.cond_loglik.at({v, out.assignment.at(v)});
  for (const auto& [v, id] : out.edge_of) out.graph_loglik += gap.cond_loglik.at({v, out.assignment.at(v)});
  return out;
}

namespace {

// variables reachable from the root through parent/child links, ignoring a
// removal set
std::vector<char> reachable_without(const MetaGraph& meta, const std::set<VarId>& removed) {
  std::vector<char> seen(meta.variables.size(), 0);
  if (removed.count(meta.root_var)) return seen;
  std::vector<VarId> stack{meta.root_var};
  seen[meta.root_var] = 1;
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    for (VarId c : meta.variables[v].children) {
      if (seen[c] || removed.count(c)) continue;
      seen[c] = 1;
      stack.push_back(c);
    }
  }
  return seen;
}

}  // namespace

MetaGraph prune(const MetaGraph& meta,
                const std::map<std::pair<VarId, std::string>, double>& marginals,
                double threshold) {
  if (threshold <= 0.0) return meta;
  std::vector<double> strength(meta.variables.size(), 0.0);
  for (const MetaVariable& var : meta.variables) {
    double best = 0.0;
    for (const auto& [value, info] : var.candidates)
      best = std::max(best, marginals.at({var.id, value}));
    strength[var.id] = best;
  }
  std::vector<VarId> order(meta.variables.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<VarId>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](VarId a, VarId b) { return strength[a] < strength[b]; });

  std::set<VarId> removed;
  for (VarId v : order) {
    if (v == meta.root_var || removed.count(v) || strength[v] >= threshold) continue;
    std::set<VarId> batch{v};
    bool ok = true;
    while (ok) {
      std::set<VarId> gone = removed;
      gone.insert(batch.begin(), batch.end());
      std::vector<char> alive = reachable_without(meta, gone);
      std::vector<VarId> invalid;
      for (const MetaVariable& var : meta.variables) {
        if (gone.count(var.id)) continue;
        bool dangling = var.kind == VarKind::Edge &&
                        (gone.count(var.source) || gone.count(var.target));
        if (dangling || !alive[var.id]) invalid.push_back(var.id);
      }
      if (invalid.empty()) break;
      for (VarId x : invalid) {
        if (strength[x] >= threshold || x == meta.root_var) {
          ok = false;
          break;
        }
      }
      if (ok) batch.insert(invalid.begin(), invalid.end());
    }
    if (ok) removed.insert(batch.begin(), batch.end());
  }
  if (removed.empty()) return meta;

  // rebuild with compact ids
  std::vector<VarId> remap(meta.variables.size(), -1);
  MetaGraph out;
  out.beam_count = meta.beam_count;
  out.has_symbolic = meta.has_symbolic;
  for (const MetaVariable& var : meta.variables) {
    if (removed.count(var.id)) continue;
    remap[var.id] = static_cast<VarId>(out.variables.size());
    out.variables.push_back(var);
  }
  for (MetaVariable& var : out.variables) {
    var.id = remap[var.id];
    std::vector<VarId> links;
    for (VarId p : var.parents)
      if (remap[p] >= 0) links.push_back(remap[p]);
    var.parents = links;
    links.clear();
    for (VarId c : var.children)
      if (remap[c] >= 0) links.push_back(remap[c]);
    var.children = links;
    if (var.kind == VarKind::Edge) {
      var.source = remap[var.source];
      var.target = remap[var.target];
    }
  }
  out.root_var = remap[meta.root_var];
  out.realizations.resize(meta.beam_count);
  for (int k = 0; k < meta.beam_count; ++k)
    for (const auto& [v, r] : meta.realizations[k])
      if (remap[v] >= 0) out.realizations[k][remap[v]] = r;
  for (const auto& [v, r] : meta.symbolic)
    if (remap[v] >= 0) out.symbolic[remap[v]] = r;
  return out;
}

std::vector<std::string> symbol_texts(const BeamCandidate& candidate) {
  std::vector<std::string> out;
  for (const SymbolSpan& s : candidate.linearized.symbols)
    out.push_back(candidate.linearized.text.substr(s.start, s.end - s.start));
  return out;
}

double lcs_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t la = a.size(), lb = b.size();
  if (la == 0 && lb == 0) return 0.0;
  if (la == 0 || lb == 0) return 1.0;
  std::vector<std::size_t> prev(lb + 1, 0), cur(lb + 1, 0);
  for (std::size_t i = 1; i <= la; ++i) {
    for (std::size_t j = 1; j <= lb; ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[lb]) / static_cast<double>(std::max(la, lb));
}

MixtureModel cluster_beams(const BeamSet& beams, const PipelineConfig& config) {
  int k = static_cast<int>(beams.candidates.size());
  if (k == 0) throw InferenceError("clustering needs at least one hypothesis");
  MixtureModel model;
  std::vector<std::vector<std::string>> seqs;
  for (const BeamCandidate& c : beams.candidates) seqs.push_back(symbol_texts(c));
  model.distance.assign(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      model.distance[i][j] = model.distance[j][i] = lcs_distance(seqs[i], seqs[j]);

  std::vector<std::vector<int>> clusters(k);
  for (int i = 0; i < k; ++i) clusters[i] = {i};
  std::vector<char> active(k, 1);
  while (true) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < k; ++j) {
        if (!active[j]) continue;
        double sum = 0.0;
        for (int a : clusters[i])
          for (int b : clusters[j]) sum += model.distance[a][b];
        double d = sum / static_cast<double>(clusters[i].size() * clusters[j].size());
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0 || best >= config.mixture_cut) break;
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(clusters[bi].begin(), clusters[bi].end());
    active[bj] = 0;
  }

  for (int i = 0; i < k; ++i) {
    if (!active[i]) continue;
    MixtureComponent comp;
    comp.beams = clusters[i];
    comp.weight = static_cast<double>(clusters[i].size()) / static_cast<double>(k);
    double total = 0.0;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (int b : clusters[i]) {
      total -= beams.candidates[b].sequence_logprob;
      if (beams.candidates[b].sequence_logprob > best_lp) {
        best_lp = beams.candidates[b].sequence_logprob;
        comp.top_beam = b;
      }
    }
    comp.surprisal = total / static_cast<double>(clusters[i].size());
    model.components.push_back(std::move(comp));
  }
  return model;
}

int mixture_select(const MixtureModel& mixture, const BeamSet& beams,
                   const SemanticGraph* symbolic, const PipelineConfig& config,
                   std::vector<double>* scores) {
  if (mixture.components.empty()) throw InferenceError("empty mixture");
  int best = 0;
  double best_score = 0.0;
  if (scores) scores->clear();
  for (std::size_t m = 0; m < mixture.components.size(); ++m) {
    const MixtureComponent& comp = mixture.components[m];
    double a = alpha_gate(comp.surprisal, config);
    double log_weight = std::log(comp.weight);
    double log_prior = 0.0;
    if (symbolic) {
      double f1 = smatch_score(beams.candidates[comp.top_beam].graph, *symbolic, config.align).f1;
      log_prior = config.mixture_prior_sign * f1;
    }
    double score = a * log_weight + (1.0 - a) * log_prior;
    if (scores) scores->push_back(score);
    if (m == 0 || score > best_score ||
        (score == best_score && comp.weight > mixture.components[best].weight)) {
      best = static_cast<int>(m);
      best_score = score;
    }
  }
  return best;
}

PipelineResult run_pipeline(const BeamSet& beams, const SemanticGraph* symbolic,
                            const PipelineConfig& config) {
  PipelineResult res;
  if (beams.candidates.empty()) {
    if (!symbolic)
      throw InferenceError("record " + beams.id +
                           ": no usable hypothesis and no symbolic graph");
    validate(*symbolic);
    res.graph = *symbolic;
    res.symbolic_fallback = true;
    res.component_count = 0;
    return res;
  }
  BeamSet working = beams;
  if (config.mixture && beams.candidates.size() > 1) {
    MixtureModel mix = cluster_beams(beams, config);
    res.component_count = static_cast<int>(mix.components.size());
    res.component = mixture_select(mix, beams, symbolic, config);
    working.candidates.clear();
    for (int b : mix.components[res.component].beams)
      working.candidates.push_back(beams.candidates[b]);
  }
  res.meta = build_meta_graph(working, config.align);
  if (symbolic) attach_symbolic(res.meta, *symbolic, config.align);
  if (config.prune_threshold > 0.0) {
    auto marg = compute_marginals(res.meta, working, config);
    res.meta = prune(res.meta, marg, config.prune_threshold);
  }
  res.gap = compute_gap(res.meta, working, config);
  res.inference = infer(res.meta, res.gap, config);
  res.graph = res.inference.graph;
  res.novel = true;
  for (const BeamCandidate& c : beams.candidates)
    if (graphs_match(res.graph, c.graph, config.align)) {
      res.novel = false;
      break;
    }
  if (res.novel && symbolic && graphs_match(res.graph, *symbolic, config.align))
    res.novel = false;
  return res;
}

}  // namespace gapinfer
