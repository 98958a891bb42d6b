#include "gapinfer/beam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace gapinfer {

namespace {

constexpr double kLogprobSlack = 1e-9;

void check_logprob(double lp, const char* what) {
  if (!std::isfinite(lp) && lp != -std::numeric_limits<double>::infinity())
    throw BeamError(std::string(what) + " is not a number");
  if (lp > kLogprobSlack)
    throw BeamError(std::string(what) + " is positive: " + std::to_string(lp));
}

}  // namespace

void BeamCandidate::finish() {
  node_logprob.assign(graph.nodes.size(), 0.0);
  node_position.assign(graph.nodes.size(), -1);
  edge_logprob.assign(graph.edges.size(), 0.0);
  edge_position.assign(graph.edges.size(), -1);
  for (std::size_t i = 0; i < linearized.symbols.size(); ++i) {
    const SymbolSpan& s = linearized.symbols[i];
    double lp = std::min(symbol_logprobs[i], 0.0);
    if (s.kind == SymbolKind::EdgeRole) {
      edge_logprob[s.element] += lp;
      if (edge_position[s.element] < 0) edge_position[s.element] = static_cast<int>(i);
    } else {
      node_logprob[s.element] += lp;
      if (node_position[s.element] < 0) node_position[s.element] = static_cast<int>(i);
    }
  }
}

BeamCandidate segment_symbols(const std::vector<Token>& tokens) {
  BeamCandidate c;
  c.tokens = tokens;
  std::string text;
  for (const Token& t : tokens) {
    check_logprob(t.logprob, "token logprob");
    c.sequence_logprob += std::min(t.logprob, 0.0);
    text += t.text;
  }
  ParsedGraph parsed;
  try {
    parsed = parse_linearized(text);
  } catch (const GraphError& e) {
    throw BeamError(std::string("hypothesis does not linearize a graph: ") + e.what());
  }
  c.graph = std::move(parsed.graph);
  c.linearized = std::move(parsed.linearized);
  c.symbol_logprobs.assign(c.linearized.symbols.size(), 0.0);
  std::size_t offset = 0;
  for (const Token& t : tokens) {
    if (!t.text.empty()) {
      // charge the whole token to the span holding its first character
      const auto& spans = c.linearized.symbols;
      auto it = std::upper_bound(spans.begin(), spans.end(), offset,
                                 [](std::size_t pos, const SymbolSpan& s) { return pos < s.start; });
      if (it != spans.begin()) {
        --it;
        if (offset >= it->start && offset < it->end)
          c.symbol_logprobs[it - spans.begin()] += std::min(t.logprob, 0.0);
      }
    }
    offset += t.text.size();
  }
  c.finish();
  return c;
}

BeamCandidate make_candidate(const std::string& graph_text,
                             const std::vector<double>& symbol_logprobs,
                             double sequence_logprob) {
  BeamCandidate c;
  ParsedGraph parsed;
  try {
    parsed = parse_linearized(graph_text);
  } catch (const GraphError& e) {
    throw BeamError(std::string("hypothesis does not linearize a graph: ") + e.what());
  }
  c.graph = std::move(parsed.graph);
  c.linearized = std::move(parsed.linearized);
  if (symbol_logprobs.size() != c.linearized.symbols.size())
    throw BeamError("symbol_logprobs has " + std::to_string(symbol_logprobs.size()) +
                    " entries for " + std::to_string(c.linearized.symbols.size()) + " symbols");
  for (double lp : symbol_logprobs) check_logprob(lp, "symbol logprob");
  check_logprob(sequence_logprob, "sequence logprob");
  c.symbol_logprobs = symbol_logprobs;
  c.sequence_logprob = std::min(sequence_logprob, 0.0);
  double sum = 0.0;
  for (double lp : c.symbol_logprobs) sum += std::min(lp, 0.0);
  // structural tokens only subtract mass, so the sequence cannot outscore
  // the sum of its symbols
  if (c.sequence_logprob > sum + kLogprobSlack)
    throw BeamError("sequence logprob exceeds the sum of symbol logprobs");
  c.finish();
  return c;
}

namespace {

BeamCandidate candidate_from_json(const nlohmann::json& j) {
  if (j.contains("tokens")) {
    std::vector<Token> tokens;
    for (const auto& t : j.at("tokens")) {
      if (!t.is_array() || t.size() != 2)
        throw BeamError("token entries must be [text, logprob] pairs");
      tokens.push_back({t[0].get<std::string>(), t[1].get<double>()});
    }
    return segment_symbols(tokens);
  }
  if (j.contains("graph")) {
    return make_candidate(j.at("graph").get<std::string>(),
                          j.at("symbol_logprobs").get<std::vector<double>>(),
                          j.at("sequence_logprob").get<double>());
  }
  throw BeamError("hypothesis needs either \"tokens\" or \"graph\"");
}

std::string record_id(const nlohmann::json& j) {
  const auto& id = j.at("id");
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return std::to_string(id.get<long long>());
  throw BeamError("record id must be a string or integer");
}

}  // namespace

std::vector<BeamSet> load_beams_jsonl(const std::string& path,
                                      std::vector<std::string>* warnings, bool strict) {
  std::ifstream in(path);
  if (!in) throw BeamError("cannot open beams file: " + path);
  std::vector<BeamSet> out;
  std::string line;
  int lineno = 0;
  auto warn = [&](const std::string& msg) {
    std::string full = path + ":" + std::to_string(lineno) + ": " + msg;
    if (strict) throw BeamError(full);
    if (warnings) warnings->push_back(full);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      warn(std::string("not a JSON record: ") + e.what());
      continue;
    }
    BeamSet set;
    try {
      set.id = record_id(j);
      set.input = j.value("input", std::string());
      if (!j.contains("beams") || !j.at("beams").is_array() || j.at("beams").empty())
        throw BeamError("record needs a non-empty \"beams\" array");
    } catch (const std::exception& e) {
      warn(e.what());
      continue;
    }
    for (const auto& b : j.at("beams")) {
      try {
        set.candidates.push_back(candidate_from_json(b));
      } catch (const std::exception& e) {
        ++set.invalid_count;
        warn("record " + set.id + ": dropped hypothesis: " + e.what());
      }
    }
    std::stable_sort(set.candidates.begin(), set.candidates.end(),
                     [](const BeamCandidate& a, const BeamCandidate& b) {
                       return a.sequence_logprob > b.sequence_logprob;
                     });
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace gapinfer
