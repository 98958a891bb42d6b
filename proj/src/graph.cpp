#include "gapinfer/graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

namespace gapinfer {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : GraphError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

namespace {

bool is_structural(char c) {
  return c == '(' || c == ')' || c == ':' || c == '*' || std::isspace(static_cast<unsigned char>(c));
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  ParsedGraph run() {
    skip_ws();
    expect('(', "expected '('");
    NodeId root = parse_node();
    skip_ws();
    if (pos_ < text_.size()) fail("trailing characters after graph");
    out_.graph.root = root;
    out_.linearized.text = text_;
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, pos_ + 1);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c, const char* msg) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail(msg);
    ++pos_;
  }

  std::string read_token(const char* what) {
    std::size_t start = pos_;
    while (pos_ < text_.size() && !is_structural(text_[pos_])) ++pos_;
    if (pos_ == start) fail(std::string("expected ") + what);
    return text_.substr(start, pos_ - start);
  }

  int read_marker() {
    // caller consumed '*'
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) fail("expected marker number after '*'");
    return std::stoi(text_.substr(start, pos_ - start));
  }

  bool reaches(NodeId from, NodeId to) const {
    if (from == to) return true;
    std::vector<NodeId> stack{from};
    std::vector<char> seen(out_.graph.nodes.size(), 0);
    seen[from] = 1;
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (const Edge& e : out_.graph.edges) {
        if (e.source != u || seen[e.target]) continue;
        if (e.target == to) return true;
        seen[e.target] = 1;
        stack.push_back(e.target);
      }
    }
    return false;
  }

  // pos_ sits just past the opening '('
  NodeId parse_node() {
    skip_ws();
    std::size_t label_start = pos_;
    std::string label = read_token("node label");
    NodeId id = static_cast<NodeId>(out_.graph.nodes.size());
    out_.graph.nodes.push_back({id, label});
    out_.linearized.symbols.push_back(
        {label_start, pos_, SymbolKind::NodeLabel, id});
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '*') {
      ++pos_;
      std::size_t marker_pos = pos_;
      int marker = read_marker();
      if (!markers_.emplace(marker, id).second)
        throw ParseError("duplicate reentrancy marker *" + std::to_string(marker), marker_pos);
      skip_ws();
    }
    while (true) {
      if (pos_ >= text_.size()) fail("unclosed '('");
      char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        return id;
      }
      if (c != ':') fail("expected ':' or ')'");
      ++pos_;
      std::size_t role_start = pos_;
      std::string role = read_token("edge role");
      std::size_t role_end = pos_;
      int edge_index = static_cast<int>(out_.graph.edges.size());
      skip_ws();
      if (pos_ >= text_.size()) fail("expected '(' or '*'");
      if (text_[pos_] == '(') {
        ++pos_;
        // the child gets the next node id, so the edge can be completed up
        // front and cycle checks below see the whole ancestor chain
        NodeId child = static_cast<NodeId>(out_.graph.nodes.size());
        out_.graph.edges.push_back({id, child, role});
        out_.linearized.symbols.push_back(
            {role_start, role_end, SymbolKind::EdgeRole, edge_index});
        parse_node();
      } else if (text_[pos_] == '*') {
        std::size_t ref_start = pos_;
        ++pos_;
        int marker = read_marker();
        auto it = markers_.find(marker);
        if (it == markers_.end())
          throw ParseError("reference to undeclared marker *" + std::to_string(marker), ref_start + 1);
        NodeId target = it->second;
        if (target == id) throw ParseError("self-loop via *" + std::to_string(marker), ref_start + 1);
        for (const Edge& e : out_.graph.edges)
          if (e.source == id && e.target == target && e.label == role)
            throw ParseError("duplicate edge :" + role, ref_start + 1);
        if (reaches(target, id))
          throw ParseError("cyclic reference via *" + std::to_string(marker), ref_start + 1);
        out_.graph.edges.push_back({id, target, role});
        out_.linearized.symbols.push_back(
            {role_start, role_end, SymbolKind::EdgeRole, edge_index});
        out_.linearized.symbols.push_back(
            {ref_start, pos_, SymbolKind::ReentrancyRef, target});
      } else {
        fail("expected '(' or '*'");
      }
      skip_ws();
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  ParsedGraph out_;
  std::map<int, NodeId> markers_;
};

}  // namespace

ParsedGraph parse_linearized(const std::string& text) {
  return Parser(text).run();
}

void validate(const SemanticGraph& g) {
  int n = static_cast<int>(g.nodes.size());
  if (n == 0) throw GraphError("graph has no nodes");
  if (g.root < 0 || g.root >= n) throw GraphError("root id out of range");
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i].id != i) throw GraphError("node ids must be dense indices");
    const std::string& label = g.nodes[i].label;
    if (label.empty()) throw GraphError("empty node label");
    for (char c : label)
      if (is_structural(c)) throw GraphError("structural character in node label '" + label + "'");
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge& e = g.edges[i];
    if (e.source < 0 || e.source >= n || e.target < 0 || e.target >= n)
      throw GraphError("edge endpoint out of range");
    if (e.source == e.target) throw GraphError("self-loop on node " + std::to_string(e.source));
    if (e.label.empty()) throw GraphError("empty edge role");
    for (char c : e.label)
      if (is_structural(c)) throw GraphError("structural character in edge role '" + e.label + "'");
    for (std::size_t j = 0; j < i; ++j) {
      const Edge& f = g.edges[j];
      if (f.source == e.source && f.target == e.target && f.label == e.label)
        throw GraphError("duplicate edge :" + e.label);
    }
  }
  // Kahn over out-edges: detects cycles.
  std::vector<int> indeg(n, 0);
  for (const Edge& e : g.edges) ++indeg[e.target];
  std::vector<NodeId> queue;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0) queue.push_back(i);
  int visited = 0;
  while (!queue.empty()) {
    NodeId u = queue.back();
    queue.pop_back();
    ++visited;
    for (const Edge& e : g.edges)
      if (e.source == u && --indeg[e.target] == 0) queue.push_back(e.target);
  }
  if (visited != n) throw GraphError("graph contains a cycle");
  // reachability from the root
  std::vector<char> seen(n, 0);
  std::vector<NodeId> stack{g.root};
  seen[g.root] = 1;
  int reached = 1;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (const Edge& e : g.edges) {
      if (e.source == u && !seen[e.target]) {
        seen[e.target] = 1;
        ++reached;
        stack.push_back(e.target);
      }
    }
  }
  if (reached != n) throw GraphError("node unreachable from root");
}

namespace {

struct Serializer {
  const SemanticGraph& g;
  std::vector<std::vector<int>> out_edges;  // edge indices per source
  std::vector<int> indeg;
  std::vector<int> marker;  // assigned marker per node, 0 = none yet
  int next_marker = 1;
  std::string buf;

  explicit Serializer(const SemanticGraph& graph)
      : g(graph), out_edges(graph.nodes.size()), indeg(graph.nodes.size(), 0),
        marker(graph.nodes.size(), 0) {
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      out_edges[g.edges[i].source].push_back(static_cast<int>(i));
      ++indeg[g.edges[i].target];
    }
  }

  void emit(NodeId u, std::vector<char>& emitted) {
    emitted[u] = 1;
    buf += '(';
    buf += g.nodes[u].label;
    if (indeg[u] >= 2) {
      marker[u] = next_marker++;
      buf += " *" + std::to_string(marker[u]);
    }
    for (int ei : out_edges[u]) {
      const Edge& e = g.edges[ei];
      buf += " :" + e.label + " ";
      if (!emitted[e.target]) {
        emit(e.target, emitted);
      } else {
        buf += "*" + std::to_string(marker[e.target]);
      }
    }
    buf += ')';
  }
};

}  // namespace

std::string serialize(const SemanticGraph& g) {
  validate(g);
  Serializer s(g);
  std::vector<char> emitted(g.nodes.size(), 0);
  s.emit(g.root, emitted);
  return std::move(s.buf);
}

std::vector<Triple> triples(const SemanticGraph& g) {
  std::vector<Triple> out;
  out.reserve(g.nodes.size() + g.edges.size() + 1);
  for (const Node& n : g.nodes) out.push_back({TripleKind::Instance, n.id, 0, n.label});
  for (const Edge& e : g.edges) out.push_back({TripleKind::Relation, e.source, e.target, e.label});
  out.push_back({TripleKind::Top, g.root, 0, ""});
  return out;
}

nlohmann::json graph_to_json(const SemanticGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const Node& n : g.nodes) nodes.push_back({{"id", n.id}, {"label", n.label}});
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges)
    edges.push_back({{"src", e.source}, {"tgt", e.target}, {"label", e.label}});
  return {{"nodes", nodes}, {"edges", edges}, {"root", g.root}};
}

SemanticGraph graph_from_json(const nlohmann::json& j) {
  SemanticGraph g;
  for (const auto& n : j.at("nodes"))
    g.nodes.push_back({n.at("id").get<int>(), n.at("label").get<std::string>()});
  for (const auto& e : j.at("edges"))
    g.edges.push_back({e.at("src").get<int>(), e.at("tgt").get<int>(),
                       e.at("label").get<std::string>()});
  g.root = j.at("root").get<int>();
  validate(g);
  return g;
}

std::vector<SemanticGraph> read_graphs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graphs file: " + path);
  std::vector<SemanticGraph> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(parse_linearized(line).graph);
    } catch (const GraphError& e) {
      throw GraphError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gapinfer
