#include "gapinfer/metagraph.hpp"

#include <algorithm>

#include <json.hpp>

namespace gapinfer {

const Realization* MetaGraph::realization(int beam, VarId v) const {
  const auto& m = realizations[beam];
  auto it = m.find(v);
  return it == m.end() ? nullptr : &it->second;
}

std::vector<VarId> MetaGraph::gap_parents(VarId v) const {
  const MetaVariable& var = variables[v];
  if (var.kind == VarKind::Edge) return {var.source};
  std::vector<VarId> out;
  for (VarId p : var.parents)
    if (variables[p].kind == VarKind::Edge) out.push_back(p);
  return out;
}

AlignView meta_view(const MetaGraph& meta) {
  AlignView v;
  std::vector<int> view_index(meta.variables.size(), -1);
  for (const MetaVariable& var : meta.variables) {
    if (var.kind != VarKind::Node) continue;
    view_index[var.id] = v.node_count++;
    std::vector<std::string> labels;
    for (const auto& [value, info] : var.candidates) labels.push_back(value);
    v.node_labels.push_back(std::move(labels));  // std::map keys are sorted
  }
  v.root = view_index[meta.root_var];
  for (const MetaVariable& var : meta.variables) {
    if (var.kind != VarKind::Edge) continue;
    auto& labels = v.edge_labels[{view_index[var.source], view_index[var.target]}];
    for (const auto& [value, info] : var.candidates)
      labels.insert(std::lower_bound(labels.begin(), labels.end(), value), value);
  }
  for (auto& [key, labels] : v.edge_labels)
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return v;
}

namespace {

VarId new_node_var(MetaGraph& meta) {
  MetaVariable var;
  var.id = static_cast<VarId>(meta.variables.size());
  var.kind = VarKind::Node;
  meta.variables.push_back(std::move(var));
  return meta.variables.back().id;
}

VarId new_edge_var(MetaGraph& meta, VarId source, VarId target) {
  MetaVariable var;
  var.id = static_cast<VarId>(meta.variables.size());
  var.kind = VarKind::Edge;
  var.source = source;
  var.target = target;
  var.parents.push_back(source);
  meta.variables.push_back(std::move(var));
  meta.variables[source].children.push_back(meta.variables.back().id);
  meta.variables.back().children.push_back(target);
  meta.variables[target].parents.push_back(meta.variables.back().id);
  return meta.variables.back().id;
}

// Finds the edge variable the graph edge (vs -> vt) should realize: the
// smallest free one whose candidates already contain `label`, else the
// smallest free one. `taken` marks edge variables this merge pass already
// used (one realization per variable per source graph).
VarId pick_edge_var(const MetaGraph& meta, VarId vs, VarId vt, const std::string& label,
                    const std::vector<char>& taken) {
  VarId fallback = -1;
  for (const MetaVariable& var : meta.variables) {
    if (var.kind != VarKind::Edge || var.source != vs || var.target != vt) continue;
    if (taken[var.id]) continue;
    if (var.candidates.count(label)) return var.id;
    if (fallback < 0) fallback = var.id;
  }
  return fallback;
}

// Cycle hunter over "existing meta links + incoming graph's edges under the
// tentative node assignment". Unmapped graph nodes are simulated as fresh
// vertices above `fresh_base`. Returns the vertices of one cycle, or empty.
struct CycleSim {
  int total = 0;
  std::vector<std::vector<int>> adj;

  std::vector<int> find_cycle() const {
    std::vector<char> color(total, 0);  // 0 new, 1 on stack, 2 done
    std::vector<int> parent(total, -1);
    std::vector<int> cycle;
    for (int s = 0; s < total && cycle.empty(); ++s) {
      if (color[s]) continue;
      // iterative DFS; stack holds (vertex, next child index)
      std::vector<std::pair<int, std::size_t>> stack{{s, 0}};
      color[s] = 1;
      while (!stack.empty() && cycle.empty()) {
        auto& [u, next] = stack.back();
        if (next < adj[u].size()) {
          int w = adj[u][next++];
          if (color[w] == 0) {
            color[w] = 1;
            parent[w] = u;
            stack.emplace_back(w, 0);
          } else if (color[w] == 1) {
            for (int x = u; x != w; x = parent[x]) cycle.push_back(x);
            cycle.push_back(w);
          }
        } else {
          color[u] = 2;
          stack.pop_back();
        }
      }
    }
    return cycle;
  }
};

// Shared structural merge for beam hypotheses and the symbolic graph:
// aligns g against the candidate sets, repairs would-be cycles by un-mapping
// offending nodes, then returns per-node and per-edge variable assignments
// (creating fresh variables as needed). `edge_taken` starts all-false sized
// to the current variable count and is consulted through pick_edge_var.
struct MergeAssignment {
  std::vector<VarId> node_var;  // per g node
  std::vector<VarId> edge_var;  // per g edge
  std::vector<VarId> fresh;     // variables created by this merge
};

MergeAssignment merge_structure(MetaGraph& meta, const SemanticGraph& g,
                                const AlignOptions& opt,
                                const std::vector<char>& edge_taken_init) {
  validate(g);
  AlignView view = meta_view(meta);
  std::vector<VarId> node_vars;
  for (const MetaVariable& var : meta.variables)
    if (var.kind == VarKind::Node) node_vars.push_back(var.id);

  Alignment al = align_to_view(g, view, opt);
  std::vector<int> assign(g.nodes.size(), -1);
  for (std::size_t i = 0; i < assign.size(); ++i)
    if (al.mapping[i] >= 0) assign[i] = node_vars[al.mapping[i]];

  // repair until the combined link structure is acyclic
  int fresh_base = static_cast<int>(meta.variables.size());
  while (true) {
    CycleSim sim;
    sim.total = fresh_base + static_cast<int>(g.nodes.size());
    sim.adj.assign(sim.total, {});
    // collapse edge variables to direct source->target links; bare links stay
    // out of the check since assembly never follows them, and a back-edge
    // into the root plus its bare link would otherwise read as a cycle no
    // un-mapping can break
    for (const MetaVariable& var : meta.variables)
      if (var.kind == VarKind::Edge) sim.adj[var.source].push_back(var.target);
    auto sim_id = [&](int node) { return assign[node] >= 0 ? assign[node] : fresh_base + node; };
    for (const Edge& e : g.edges) sim.adj[sim_id(e.source)].push_back(sim_id(e.target));
    for (auto& a : sim.adj) std::sort(a.begin(), a.end());

    std::vector<int> cycle = sim.find_cycle();
    if (cycle.empty()) break;
    // un-map the smallest mapped graph node sitting on the cycle; one always
    // exists because neither the meta DAG nor g alone is cyclic
    int victim = -1;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      if (assign[i] >= 0 &&
          std::find(cycle.begin(), cycle.end(), assign[i]) != cycle.end()) {
        victim = static_cast<int>(i);
        break;
      }
    if (victim < 0) throw GraphError("cycle repair failed in meta-graph merge");
    assign[victim] = -1;
  }

  MergeAssignment out;
  out.node_var.assign(g.nodes.size(), -1);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (assign[i] >= 0) {
      out.node_var[i] = assign[i];
    } else {
      out.node_var[i] = new_node_var(meta);
      out.fresh.push_back(out.node_var[i]);
    }
  }
  std::vector<char> taken = edge_taken_init;
  taken.resize(meta.variables.size(), 0);
  for (const Edge& e : g.edges) {
    VarId vs = out.node_var[e.source], vt = out.node_var[e.target];
    VarId ev = pick_edge_var(meta, vs, vt, e.label, taken);
    if (ev < 0) {
      ev = new_edge_var(meta, vs, vt);
      out.fresh.push_back(ev);
      taken.resize(meta.variables.size(), 0);
    }
    taken[ev] = 1;
    out.edge_var.push_back(ev);
  }
  // anything new and parentless hangs off the root by a bare link
  for (VarId v : out.fresh) {
    if (v == meta.root_var || !meta.variables[v].parents.empty()) continue;
    if (meta.variables[v].kind == VarKind::Edge) continue;
    meta.variables[v].parents.push_back(meta.root_var);
    meta.variables[meta.root_var].children.push_back(v);
  }
  return out;
}

}  // namespace

MetaGraph build_meta_graph(const BeamSet& beams, const AlignOptions& opt) {
  if (beams.candidates.empty())
    throw GraphError("meta graph needs at least one hypothesis");
  MetaGraph meta;
  meta.beam_count = static_cast<int>(beams.candidates.size());
  meta.realizations.resize(meta.beam_count);

  const BeamCandidate& anchor = beams.candidates[0];
  std::vector<VarId> node_var(anchor.graph.nodes.size());
  for (const Node& n : anchor.graph.nodes) node_var[n.id] = new_node_var(meta);
  meta.root_var = node_var[anchor.graph.root];
  std::vector<VarId> edge_var;
  for (const Edge& e : anchor.graph.edges)
    edge_var.push_back(new_edge_var(meta, node_var[e.source], node_var[e.target]));

  auto realize = [&meta](int beam, const BeamCandidate& c, const std::vector<VarId>& nv,
                         const std::vector<VarId>& ev) {
    for (const Node& n : c.graph.nodes) {
      meta.variables[nv[n.id]].candidates[n.label].beams.push_back(beam);
      meta.realizations[beam][nv[n.id]] =
          {n.label, n.id, c.node_position[n.id], c.node_logprob[n.id]};
    }
    for (std::size_t i = 0; i < c.graph.edges.size(); ++i) {
      const Edge& e = c.graph.edges[i];
      meta.variables[ev[i]].candidates[e.label].beams.push_back(beam);
      meta.realizations[beam][ev[i]] =
          {e.label, static_cast<int>(i), c.edge_position[i], c.edge_logprob[i]};
    }
  };
  realize(0, anchor, node_var, edge_var);

  for (int k = 1; k < meta.beam_count; ++k) {
    AlignOptions o = opt;
    o.seed = opt.seed + 1000003ull * static_cast<std::uint64_t>(k);
    MergeAssignment m = merge_structure(meta, beams.candidates[k].graph, o,
                                        std::vector<char>(meta.variables.size(), 0));
    realize(k, beams.candidates[k], m.node_var, m.edge_var);
  }
  return meta;
}

void attach_symbolic(MetaGraph& meta, const SemanticGraph& symbolic, const AlignOptions& opt) {
  if (meta.has_symbolic) throw GraphError("symbolic graph already attached");
  AlignOptions o = opt;
  o.seed = opt.seed + 7919ull;
  // an edge variable can carry at most one symbolic value; none exist yet
  MergeAssignment m =
      merge_structure(meta, symbolic, o, std::vector<char>(meta.variables.size(), 0));
  for (const Node& n : symbolic.nodes) {
    meta.variables[m.node_var[n.id]].candidates[n.label].symbolic = true;
    meta.symbolic[m.node_var[n.id]] = {n.label, n.id};
  }
  for (std::size_t i = 0; i < symbolic.edges.size(); ++i) {
    const Edge& e = symbolic.edges[i];
    meta.variables[m.edge_var[i]].candidates[e.label].symbolic = true;
    meta.symbolic[m.edge_var[i]] = {e.label, static_cast<int>(i)};
  }
  meta.has_symbolic = true;
}

nlohmann::json meta_to_json(const MetaGraph& meta) {
  nlohmann::json vars = nlohmann::json::array();
  for (const MetaVariable& v : meta.variables) {
    nlohmann::json cands = nlohmann::json::object();
    for (const auto& [value, info] : v.candidates)
      cands[value] = {{"beams", info.beams}, {"symbolic", info.symbolic}};
    nlohmann::json jv = {{"id", v.id},
                         {"kind", v.kind == VarKind::Node ? "node" : "edge"},
                         {"candidates", cands},
                         {"parents", v.parents},
                         {"children", v.children}};
    if (v.kind == VarKind::Edge) {
      jv["source"] = v.source;
      jv["target"] = v.target;
    }
    vars.push_back(std::move(jv));
  }
  return {{"root_var", meta.root_var},
          {"beam_count", meta.beam_count},
          {"variables", vars}};
}

}  // namespace gapinfer
