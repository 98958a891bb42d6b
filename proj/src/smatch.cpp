#include "gapinfer/smatch.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace gapinfer {

MatchScore make_score(int matched, int total_a, int total_b) {
  MatchScore s;
  s.matched = matched;
  s.total_a = total_a;
  s.total_b = total_b;
  if (matched > 0 && total_a > 0 && total_b > 0) {
    s.precision = static_cast<double>(matched) / total_a;
    s.recall = static_cast<double>(matched) / total_b;
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

AlignView AlignView::of(const SemanticGraph& g) {
  AlignView v;
  v.node_count = static_cast<int>(g.nodes.size());
  v.root = g.root;
  v.node_labels.resize(g.nodes.size());
  for (const Node& n : g.nodes) v.node_labels[n.id] = {n.label};
  for (const Edge& e : g.edges) {
    auto& labels = v.edge_labels[{e.source, e.target}];
    labels.insert(std::lower_bound(labels.begin(), labels.end(), e.label), e.label);
  }
  return v;
}

bool AlignView::node_matches(int b, const std::string& label) const {
  const auto& ls = node_labels[b];
  return std::binary_search(ls.begin(), ls.end(), label);
}

bool AlignView::edge_matches(int bs, int bt, const std::string& label) const {
  auto it = edge_labels.find({bs, bt});
  if (it == edge_labels.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), label);
}

namespace {

int count_matched(const SemanticGraph& a, const AlignView& v, const std::vector<int>& mapping) {
  int matched = 0;
  for (const Node& n : a.nodes) {
    int b = mapping[n.id];
    if (b >= 0 && v.node_matches(b, n.label)) ++matched;
  }
  for (const Edge& e : a.edges) {
    int bs = mapping[e.source], bt = mapping[e.target];
    if (bs >= 0 && bt >= 0 && v.edge_matches(bs, bt, e.label)) ++matched;
  }
  if (mapping[a.root] == v.root) ++matched;
  return matched;
}

// One first-improvement pass over remap and swap moves; returns whether any
// move was applied. `used[b]` tracks occupied view nodes.
bool improve_once(const SemanticGraph& a, const AlignView& v, std::vector<int>& mapping,
                  std::vector<char>& used, int& matched) {
  int n_a = static_cast<int>(mapping.size());
  bool improved = false;
  for (int i = 0; i < n_a; ++i) {
    for (int b = 0; b < v.node_count; ++b) {
      if (used[b] || mapping[i] == b) continue;
      int old = mapping[i];
      mapping[i] = b;
      int m = count_matched(a, v, mapping);
      if (m > matched) {
        matched = m;
        used[b] = 1;
        if (old >= 0) used[old] = 0;
        improved = true;
      } else {
        mapping[i] = old;
      }
    }
  }
  for (int i = 0; i < n_a; ++i) {
    for (int j = i + 1; j < n_a; ++j) {
      if (mapping[i] < 0 && mapping[j] < 0) continue;
      std::swap(mapping[i], mapping[j]);
      int m = count_matched(a, v, mapping);
      if (m > matched) {
        matched = m;
        improved = true;
      } else {
        std::swap(mapping[i], mapping[j]);
      }
    }
  }
  return improved;
}

std::vector<int> greedy_seed(const SemanticGraph& a, const AlignView& v) {
  std::vector<int> mapping(a.nodes.size(), -1);
  std::vector<char> used(v.node_count, 0);
  for (const Node& n : a.nodes) {
    for (int b = 0; b < v.node_count; ++b) {
      if (!used[b] && v.node_matches(b, n.label)) {
        mapping[n.id] = b;
        used[b] = 1;
        break;
      }
    }
  }
  return mapping;
}

std::vector<int> random_seed(const SemanticGraph& a, const AlignView& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> as(a.nodes.size()), bs(v.node_count);
  std::iota(as.begin(), as.end(), 0);
  std::iota(bs.begin(), bs.end(), 0);
  std::shuffle(as.begin(), as.end(), rng);
  std::shuffle(bs.begin(), bs.end(), rng);
  std::vector<int> mapping(a.nodes.size(), -1);
  std::size_t k = std::min(as.size(), bs.size());
  for (std::size_t i = 0; i < k; ++i) mapping[as[i]] = bs[i];
  return mapping;
}

}  // namespace

Alignment align_to_view(const SemanticGraph& a, const AlignView& v, const AlignOptions& opt) {
  validate(a);
  Alignment best;
  best.matched = -1;
  int restarts = std::max(1, opt.restarts);
  for (int r = 0; r < restarts; ++r) {
    std::vector<int> mapping =
        r == 0 ? greedy_seed(a, v) : random_seed(a, v, opt.seed + static_cast<std::uint64_t>(r));
    std::vector<char> used(v.node_count, 0);
    for (int b : mapping)
      if (b >= 0) used[b] = 1;
    int matched = count_matched(a, v, mapping);
    for (int it = 0; it < opt.iterations; ++it)
      if (!improve_once(a, v, mapping, used, matched)) break;
    if (matched > best.matched || (matched == best.matched && mapping < best.mapping)) {
      best.mapping = std::move(mapping);
      best.matched = matched;
    }
  }
  return best;
}

Alignment align(const SemanticGraph& a, const SemanticGraph& b, const AlignOptions& opt) {
  validate(b);
  Alignment al = align_to_view(a, AlignView::of(b), opt);
  int total_a = static_cast<int>(a.nodes.size() + a.edges.size()) + 1;
  int total_b = static_cast<int>(b.nodes.size() + b.edges.size()) + 1;
  al.score = make_score(al.matched, total_a, total_b);
  return al;
}

namespace {

void enumerate(const SemanticGraph& a, const AlignView& v, std::vector<int>& mapping,
               std::vector<char>& used, std::size_t i, Alignment& best) {
  if (i == mapping.size()) {
    int m = count_matched(a, v, mapping);
    if (m > best.matched) {
      best.matched = m;
      best.mapping = mapping;
    }
    return;
  }
  // -1 first keeps enumeration in lexicographic order, so the first mapping
  // reaching the optimum is also the smallest one.
  mapping[i] = -1;
  enumerate(a, v, mapping, used, i + 1, best);
  for (int b = 0; b < v.node_count; ++b) {
    if (used[b]) continue;
    mapping[i] = b;
    used[b] = 1;
    enumerate(a, v, mapping, used, i + 1, best);
    used[b] = 0;
  }
  mapping[i] = -1;
}

}  // namespace

Alignment exhaustive_align(const SemanticGraph& a, const SemanticGraph& b) {
  validate(a);
  validate(b);
  if (a.nodes.size() > 8 || b.nodes.size() > 8)
    throw GraphError("exhaustive alignment limited to 8 nodes per side");
  AlignView v = AlignView::of(b);
  Alignment best;
  best.matched = -1;
  std::vector<int> mapping(a.nodes.size(), -1);
  std::vector<char> used(v.node_count, 0);
  enumerate(a, v, mapping, used, 0, best);
  int total_a = static_cast<int>(a.nodes.size() + a.edges.size()) + 1;
  int total_b = static_cast<int>(b.nodes.size() + b.edges.size()) + 1;
  best.score = make_score(best.matched, total_a, total_b);
  return best;
}

MatchScore smatch_score(const SemanticGraph& pred, const SemanticGraph& gold,
                        const AlignOptions& opt) {
  return align(pred, gold, opt).score;
}

std::pair<MatchScore, MatchScore> node_edge_f1(const SemanticGraph& pred,
                                               const SemanticGraph& gold,
                                               const Alignment& alignment) {
  int node_matched = 0;
  for (const Node& n : pred.nodes) {
    int b = alignment.mapping[n.id];
    if (b >= 0 && gold.nodes[b].label == n.label) ++node_matched;
  }
  int edge_matched = 0;
  for (const Edge& e : pred.edges) {
    int bs = alignment.mapping[e.source], bt = alignment.mapping[e.target];
    if (bs < 0 || bt < 0) continue;
    for (const Edge& f : gold.edges)
      if (f.source == bs && f.target == bt && f.label == e.label) {
        ++edge_matched;
        break;
      }
  }
  MatchScore nodes = make_score(node_matched, static_cast<int>(pred.nodes.size()),
                                static_cast<int>(gold.nodes.size()));
  MatchScore edges = make_score(edge_matched, static_cast<int>(pred.edges.size()),
                                static_cast<int>(gold.edges.size()));
  return {nodes, edges};
}

bool graphs_match(const SemanticGraph& a, const SemanticGraph& b, const AlignOptions& opt) {
  if (a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size()) return false;
  auto labels = [](const SemanticGraph& g) {
    std::vector<std::string> ls;
    for (const Node& n : g.nodes) ls.push_back(n.label);
    for (const Edge& e : g.edges) ls.push_back(":" + e.label);
    std::sort(ls.begin(), ls.end());
    return ls;
  };
  if (labels(a) != labels(b)) return false;
  if (a.nodes[a.root].label != b.nodes[b.root].label) return false;
  int total = static_cast<int>(a.nodes.size() + a.edges.size()) + 1;
  if (a.nodes.size() <= 8) return exhaustive_align(a, b).matched == total;
  return align(a, b, opt).matched == total;
}

}  // namespace gapinfer
