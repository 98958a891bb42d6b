#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gapinfer {

using NodeId = int;

struct Node {
  NodeId id = 0;
  std::string label;

  bool operator==(const Node&) const = default;
};

struct Edge {
  NodeId source = 0;
  NodeId target = 0;
  std::string label;

  bool operator==(const Edge&) const = default;
};

// Rooted, labeled DAG. Node ids are dense indices into `nodes`; edge order is
// part of the value (it fixes the canonical serialization).
struct SemanticGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  NodeId root = 0;

  bool operator==(const SemanticGraph&) const = default;
};

enum class SymbolKind { NodeLabel, EdgeRole, ReentrancyRef };

// Half-open character range in the linearization that denotes one graph
// element. `element` is a node id for NodeLabel/ReentrancyRef spans and an
// edge index for EdgeRole spans.
struct SymbolSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  SymbolKind kind = SymbolKind::NodeLabel;
  int element = 0;

  bool operator==(const SymbolSpan&) const = default;
};

struct LinearizedGraph {
  std::string text;
  std::vector<SymbolSpan> symbols;
};

struct ParsedGraph {
  SemanticGraph graph;
  LinearizedGraph linearized;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Syntax or structural error in a linearization. `offset` is the 1-based
// character position the parser was looking at.
class ParseError : public GraphError {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Parses the parenthesized linearization:
//   graph    := '(' label decl? (':' role (graph | '*' int))* ')'
//   decl     := '*' int        (names this node for later references)
// A later bare '*k' re-enters the node declared as '*k'. Node ids are
// assigned in order of first appearance.
ParsedGraph parse_linearized(const std::string& text);

// Canonical single-line form; parse(serialize(g)) succeeds and serializing
// the reparse is byte-identical. Validates first.
std::string serialize(const SemanticGraph& graph);

// Structural soundness: dense ids, sane labels, edges in range, no
// self-loops or duplicate edges, acyclic, everything reachable from root.
void validate(const SemanticGraph& graph);

enum class TripleKind { Instance, Relation, Top };

struct Triple {
  TripleKind kind = TripleKind::Instance;
  int a = 0;        // node id (Instance, Top) or edge source (Relation)
  int b = 0;        // edge target (Relation only)
  std::string label;
};

// One Instance per node, one Relation per edge, one Top for the root:
// exactly |N| + |E| + 1 triples.
std::vector<Triple> triples(const SemanticGraph& graph);

nlohmann::json graph_to_json(const SemanticGraph& graph);
SemanticGraph graph_from_json(const nlohmann::json& j);

// One graph per non-empty line; '#' starts a comment line. Blank and
// comment lines are skipped. Line numbers are reported on parse failure.
std::vector<SemanticGraph> read_graphs_file(const std::string& path);

}  // namespace gapinfer
