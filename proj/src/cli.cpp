#include "gapinfer/cli.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gapinfer/evaluate.hpp"

namespace gapinfer::cli {

namespace {

using nlohmann::json;

class CliError : public std::runtime_error {
 public:
  CliError(const std::string& what, int code) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw CliError("no such file: " + path, 1);
}

template <typename Fn>
void parallel_for(int n, int workers, Fn fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 0) workers = 1;
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& t : pool) t.join();
}

struct GraphCorpus {
  std::vector<std::string> ids;  // empty when the file carries no ids
  std::vector<SemanticGraph> graphs;
};

// .jsonl files ({"id", "graph"} per line) keep their ids; plain graph files
// are positional.
GraphCorpus read_graph_corpus(const std::string& path) {
  require_file(path);
  GraphCorpus corpus;
  std::ifstream probe(path);
  std::string first;
  std::getline(probe, first);
  bool jsonl = first.find_first_not_of(" \t\r") != std::string::npos &&
               first[first.find_first_not_of(" \t\r")] == '{';
  if (!jsonl) {
    corpus.graphs = read_graphs_file(path);
    return corpus;
  }
  std::ifstream in(path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      const auto& id = j.at("id");
      corpus.ids.push_back(id.is_string() ? id.get<std::string>()
                                          : std::to_string(id.get<long long>()));
      corpus.graphs.push_back(parse_linearized(j.at("graph").get<std::string>()).graph);
    } catch (const std::exception& e) {
      throw CliError(path + ":" + std::to_string(lineno) + ": " + e.what(), 1);
    }
  }
  return corpus;
}

std::vector<BeamSet> read_beams(const std::string& path, bool strict) {
  require_file(path);
  std::vector<std::string> warnings;
  std::vector<BeamSet> records;
  try {
    records = load_beams_jsonl(path, &warnings, strict);
  } catch (const BeamError& e) {
    throw CliError(std::string(e.what()), 2);
  }
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  return records;
}

// symbolic graphs pair with beam records by line order
std::vector<const SemanticGraph*> pair_symbolic(const std::vector<BeamSet>& records,
                                                const GraphCorpus& symbolic) {
  if (symbolic.graphs.size() != records.size())
    throw CliError("symbolic file has " + std::to_string(symbolic.graphs.size()) +
                       " graphs for " + std::to_string(records.size()) + " records",
                   1);
  std::vector<const SemanticGraph*> out;
  for (const SemanticGraph& g : symbolic.graphs) out.push_back(&g);
  return out;
}

json variable_json(const MetaGraph& meta, const GapTables& gap, const VariableDecision& d) {
  const MetaVariable& var = meta.variables[d.var];
  json candidates = json::object();
  for (const auto& [value, info] : var.candidates) {
    candidates[value] = {{"marginal", gap.marginal.at({var.id, value})},
                         {"cond_loglik", gap.cond_loglik.at({var.id, value})},
                         {"beams", info.beams},
                         {"symbolic", info.symbolic}};
  }
  return {{"id", d.var},
          {"kind", d.kind == VarKind::Node ? "node" : "edge"},
          {"chosen", d.chosen},
          {"alpha", d.alpha},
          {"criterion", d.score},
          {"marginal", d.marginal},
          {"candidates", candidates}};
}

struct InferOutcome {
  std::string id;
  std::string line;
  bool failed = false;
  double alpha_sum = 0.0;
  int alpha_count = 0;
  bool novel = false;
};

int run_infer(const PipelineConfig& cfg, int workers, bool strict, const std::string& beams_path,
              const std::string& symbolic_path, const std::string& out_path) {
  std::vector<BeamSet> records = read_beams(beams_path, strict);
  if (records.empty()) throw CliError("no records in " + beams_path, 1);
  GraphCorpus symbolic;
  std::vector<const SemanticGraph*> sym(records.size(), nullptr);
  if (!symbolic_path.empty()) {
    symbolic = read_graph_corpus(symbolic_path);
    sym = pair_symbolic(records, symbolic);
  }
  int dropped = 0;
  for (const BeamSet& r : records) dropped += r.invalid_count;

  std::vector<InferOutcome> outcomes(records.size());
  std::vector<std::string> errors(records.size());
  parallel_for(static_cast<int>(records.size()), workers, [&](int i) {
    InferOutcome& o = outcomes[i];
    o.id = records[i].id;
    try {
      PipelineResult res = run_pipeline(records[i], sym[i], cfg);
      json vars = json::array();
      for (const VariableDecision& d : res.inference.decisions) {
        vars.push_back(variable_json(res.meta, res.gap, d));
        o.alpha_sum += d.alpha;
        ++o.alpha_count;
      }
      json j = {{"id", records[i].id},
                {"graph", serialize(res.graph)},
                {"novel", res.novel},
                {"component", res.component},
                {"components", res.component_count},
                {"symbolic_fallback", res.symbolic_fallback},
                {"graph_loglik", res.inference.graph_loglik},
                {"variables", vars}};
      o.line = j.dump();
      o.novel = res.novel;
    } catch (const std::exception& e) {
      o.failed = true;
      errors[i] = "record " + records[i].id + ": " + e.what();
    }
  });

  for (const std::string& e : errors)
    if (!e.empty()) std::cerr << "error: " << e << "\n";
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const InferOutcome& a, const InferOutcome& b) { return a.id < b.id; });

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (out_path != "-") {
    file.open(out_path);
    if (!file) throw CliError("cannot write " + out_path, 1);
    out = &file;
  }
  int failed = 0, novel = 0, emitted = 0;
  double alpha_sum = 0.0;
  long alpha_count = 0;
  for (const InferOutcome& o : outcomes) {
    if (o.failed) {
      ++failed;
      continue;
    }
    *out << o.line << "\n";
    ++emitted;
    if (o.novel) ++novel;
    alpha_sum += o.alpha_sum;
    alpha_count += o.alpha_count;
  }
  json summary = {{"sentences", records.size()},
                  {"emitted", emitted},
                  {"failed", failed},
                  {"novel", novel},
                  {"novel_fraction", emitted ? static_cast<double>(novel) / emitted : 0.0},
                  {"mean_alpha", alpha_count ? alpha_sum / alpha_count : 0.0},
                  {"dropped_hypotheses", dropped}};
  std::cout << summary.dump() << "\n";
  return failed ? 2 : 0;
}

int run_score(const PipelineConfig& cfg, bool strict, const std::string& pred_path,
              const std::string& gold_path, const std::string& beams_path,
              const std::string& symbolic_path) {
  GraphCorpus pred = read_graph_corpus(pred_path);
  GraphCorpus gold = read_graph_corpus(gold_path);
  std::vector<SemanticGraph> gold_graphs;
  if (!pred.ids.empty() && !gold.ids.empty()) {
    std::map<std::string, const SemanticGraph*> by_id;
    for (std::size_t i = 0; i < gold.ids.size(); ++i) by_id[gold.ids[i]] = &gold.graphs[i];
    for (std::size_t i = 0; i < pred.ids.size(); ++i) {
      auto it = by_id.find(pred.ids[i]);
      if (it == by_id.end()) throw CliError("no reference for id " + pred.ids[i], 1);
      gold_graphs.push_back(*it->second);
    }
  } else {
    if (pred.graphs.size() != gold.graphs.size())
      throw CliError("prediction and reference counts differ", 1);
    gold_graphs = gold.graphs;
  }
  CorpusScore score = corpus_smatch(pred.graphs, gold_graphs, cfg.align);
  json out = {{"smatch", score_to_json(score.smatch)},
              {"nodes", score_to_json(score.nodes)},
              {"edges", score_to_json(score.edges)},
              {"sentences", score.sentences}};

  if (!beams_path.empty()) {
    std::vector<BeamSet> records = read_beams(beams_path, strict);
    std::vector<const SemanticGraph*> sym(records.size(), nullptr);
    GraphCorpus symbolic;
    if (!symbolic_path.empty()) {
      symbolic = read_graph_corpus(symbolic_path);
      sym = pair_symbolic(records, symbolic);
    }
    std::map<std::string, std::size_t> beam_index;
    for (std::size_t i = 0; i < records.size(); ++i) beam_index[records[i].id] = i;
    std::vector<BeamSet> beams_for;
    std::vector<const SemanticGraph*> sym_for;
    for (std::size_t i = 0; i < pred.graphs.size(); ++i) {
      std::size_t at;
      if (!pred.ids.empty()) {
        auto it = beam_index.find(pred.ids[i]);
        if (it == beam_index.end()) throw CliError("no hypotheses for id " + pred.ids[i], 1);
        at = it->second;
      } else {
        if (i >= records.size()) throw CliError("fewer hypothesis records than predictions", 1);
        at = i;
      }
      beams_for.push_back(records[at]);
      sym_for.push_back(sym[at]);
    }
    NoveltyReport nov = novelty_report(pred.graphs, beams_for, sym_for, gold_graphs, cfg.align);
    json jn = {{"total", nov.total}, {"novel", nov.novel}, {"fraction", nov.fraction}};
    jn["novel_smatch"] = nov.novel_smatch ? score_to_json(*nov.novel_smatch) : json();
    jn["other_smatch"] = nov.other_smatch ? score_to_json(*nov.other_smatch) : json();
    out["novelty"] = jn;
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int run_calibrate(const PipelineConfig& cfg, int workers, bool strict,
                  const std::string& beams_path, const std::string& gold_path,
                  const std::string& symbolic_path, int bins, const std::string& out_path,
                  const std::string& csv_path) {
  std::vector<BeamSet> records = read_beams(beams_path, strict);
  GraphCorpus gold = read_graph_corpus(gold_path);
  std::vector<const SemanticGraph*> gold_for(records.size(), nullptr);
  if (!gold.ids.empty()) {
    std::map<std::string, const SemanticGraph*> by_id;
    for (std::size_t i = 0; i < gold.ids.size(); ++i) by_id[gold.ids[i]] = &gold.graphs[i];
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto it = by_id.find(records[i].id);
      if (it == by_id.end()) throw CliError("no reference for id " + records[i].id, 1);
      gold_for[i] = it->second;
    }
  } else {
    if (gold.graphs.size() != records.size())
      throw CliError("reference count does not match record count", 1);
    for (std::size_t i = 0; i < records.size(); ++i) gold_for[i] = &gold.graphs[i];
  }
  GraphCorpus symbolic;
  std::vector<const SemanticGraph*> sym(records.size(), nullptr);
  if (!symbolic_path.empty()) {
    symbolic = read_graph_corpus(symbolic_path);
    sym = pair_symbolic(records, symbolic);
  }

  std::vector<std::vector<CalibrationElement>> parts(records.size());
  std::vector<std::string> errors(records.size());
  parallel_for(static_cast<int>(records.size()), workers, [&](int i) {
    try {
      parts[i] = collect_calibration(records[i], sym[i], *gold_for[i], cfg);
    } catch (const std::exception& e) {
      errors[i] = "record " + records[i].id + ": " + e.what();
    }
  });
  int failed = 0;
  for (const std::string& e : errors) {
    if (e.empty()) continue;
    std::cerr << "error: " << e << "\n";
    ++failed;
  }
  std::vector<CalibrationElement> elements;
  for (const auto& p : parts) elements.insert(elements.end(), p.begin(), p.end());
  CalibrationReport report = bin_elements(std::move(elements), bins);

  std::ofstream out(out_path);
  if (!out) throw CliError("cannot write " + out_path, 1);
  out << calibration_to_json(report).dump(2) << "\n";
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) throw CliError("cannot write " + csv_path, 1);
    csv << calibration_to_csv(report);
  }
  json summary = {{"elements", report.total},
                  {"excluded", report.excluded},
                  {"buckets", report.buckets.size()},
                  {"overall_neural_accuracy", report.overall_neural_accuracy}};
  std::cout << summary.dump() << "\n";
  return failed ? 2 : 0;
}

int run_prune_stats(const PipelineConfig& cfg, bool strict, const std::string& beams_path,
                    const std::string& symbolic_path, double threshold) {
  std::vector<BeamSet> records = read_beams(beams_path, strict);
  GraphCorpus symbolic;
  std::vector<const SemanticGraph*> sym(records.size(), nullptr);
  if (!symbolic_path.empty()) {
    symbolic = read_graph_corpus(symbolic_path);
    sym = pair_symbolic(records, symbolic);
  }
  int failed = 0;
  long total_vars = 0, total_pruned = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      if (records[i].candidates.empty()) throw InferenceError("no usable hypothesis");
      MetaGraph meta = build_meta_graph(records[i], cfg.align);
      if (sym[i]) attach_symbolic(meta, *sym[i], cfg.align);
      auto marg = compute_marginals(meta, records[i], cfg);
      MetaGraph pruned = prune(meta, marg, threshold);
      double lo = 1.0, hi = 0.0;
      for (const MetaVariable& var : meta.variables) {
        double best = 0.0;
        for (const auto& [value, info] : var.candidates) best = std::max(best, marg.at({var.id, value}));
        lo = std::min(lo, best);
        hi = std::max(hi, best);
      }
      int pruned_count = static_cast<int>(meta.variables.size() - pruned.variables.size());
      total_vars += static_cast<long>(meta.variables.size());
      total_pruned += pruned_count;
      json j = {{"id", records[i].id},
                {"variables", meta.variables.size()},
                {"pruned", pruned_count},
                {"kept", pruned.variables.size()},
                {"min_strength", lo},
                {"max_strength", hi}};
      std::cout << j.dump() << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error: record " << records[i].id << ": " << e.what() << "\n";
      ++failed;
    }
  }
  json summary = {{"records", records.size()},
                  {"threshold", threshold},
                  {"total_variables", total_vars},
                  {"total_pruned", total_pruned}};
  std::cout << summary.dump() << "\n";
  return failed ? 2 : 0;
}

int run_cluster_stats(const PipelineConfig& cfg, bool strict, const std::string& beams_path) {
  std::vector<BeamSet> records = read_beams(beams_path, strict);
  int failed = 0;
  long total_components = 0;
  for (const BeamSet& r : records) {
    try {
      if (r.candidates.empty()) throw InferenceError("no usable hypothesis");
      MixtureModel mix = cluster_beams(r, cfg);
      total_components += static_cast<long>(mix.components.size());
      json comps = json::array();
      for (const MixtureComponent& c : mix.components)
        comps.push_back({{"members", c.beams},
                         {"weight", c.weight},
                         {"surprisal", c.surprisal},
                         {"top_beam", c.top_beam}});
      json j = {{"id", r.id}, {"hypotheses", r.candidates.size()}, {"components", comps}};
      std::cout << j.dump() << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error: record " << r.id << ": " << e.what() << "\n";
      ++failed;
    }
  }
  json summary = {{"records", records.size()},
                  {"mean_components",
                   records.empty() ? 0.0
                                   : static_cast<double>(total_components) /
                                         static_cast<double>(records.size())}};
  std::cout << summary.dump() << "\n";
  return failed ? 2 : 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Subgraph-level confidence estimation and neural-symbolic decoding "
               "for linearized semantic graphs"};
  app.set_config("--config", "", "configuration file (key=value, [section] per subcommand)")
      ->envname("GAPINFER_CONFIG");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(0, 1);

  PipelineConfig cfg;
  int workers = 0;
  bool strict = false;
  bool print_config = false;

  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  app.add_option("--alpha-temperature", cfg.alpha_temperature,
                 "temperature of the neural/symbolic gate")
      ->capture_default_str();
  app.add_option("--alpha-bias", cfg.alpha_bias, "bias of the neural/symbolic gate")
      ->capture_default_str();
  app.add_option("--agg-temperature", cfg.aggregation_temperature,
                 "softmax temperature over hypothesis scores")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--logprob-floor", cfg.logprob_floor, "lower bound applied before any log")
      ->capture_default_str();
  app.add_option("--prune-threshold", cfg.prune_threshold,
                 "drop variables whose best marginal falls below this (0 = off)")
      ->capture_default_str();
  app.add_flag("--mixture,!--no-mixture", cfg.mixture,
               "cluster hypotheses and decode the selected component")
      ->capture_default_str();
  app.add_option("--mixture-cut", cfg.mixture_cut, "stop merging clusters at this distance")
      ->capture_default_str();
  app.add_option("--mixture-prior-sign", cfg.mixture_prior_sign,
                 "sign on the overlap score inside the component prior")
      ->check(CLI::IsMember({-1, 1}))
      ->capture_default_str();
  app.add_flag("--alpha-per-candidate", cfg.alpha_per_candidate,
               "gate each candidate by its own surprisal")
      ->capture_default_str();
  app.add_option("--restarts", cfg.align.restarts, "alignment restarts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--iterations", cfg.align.iterations, "alignment improvement sweeps per restart")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--seed", cfg.align.seed, "base seed for randomized restarts")
      ->capture_default_str();
  app.add_option("--workers", workers, "worker threads (0 = hardware)")->capture_default_str();
  app.add_flag("--strict", strict, "fail on the first malformed record")->capture_default_str();

  auto* infer_cmd = app.add_subcommand("infer", "decode predictions from hypothesis records");
  std::string beams_path, symbolic_path, out_path = "-", pred_path, gold_path, csv_path;
  int bins = 10;
  double threshold = -1.0;
  infer_cmd->add_option("--beams", beams_path, "hypothesis records (.jsonl)")->required();
  infer_cmd->add_option("--symbolic", symbolic_path, "symbolic parses (.graphs or .jsonl)");
  infer_cmd->add_option("--out", out_path, "prediction output (.jsonl, - for stdout)")
      ->capture_default_str();

  auto* score_cmd = app.add_subcommand("score", "Smatch a prediction file against references");
  score_cmd->add_option("--pred", pred_path, "predictions (.jsonl or .graphs)")->required();
  score_cmd->add_option("--gold", gold_path, "references (.graphs or .jsonl)")->required();
  score_cmd->add_option("--beams", beams_path, "hypothesis records, enables the novelty report");
  score_cmd->add_option("--symbolic", symbolic_path, "symbolic parses for the novelty report");

  auto* cal_cmd = app.add_subcommand("calibrate", "bucket element confidences against gold");
  cal_cmd->add_option("--beams", beams_path, "hypothesis records (.jsonl)")->required();
  cal_cmd->add_option("--gold", gold_path, "references (.graphs or .jsonl)")->required();
  cal_cmd->add_option("--symbolic", symbolic_path, "symbolic parses (.graphs or .jsonl)");
  cal_cmd->add_option("--bins", bins, "equal-count bucket count")->capture_default_str();
  cal_cmd->add_option("--out", out_path, "report output (.json)")->required();
  cal_cmd->add_option("--csv", csv_path, "also write the bucket table as CSV");

  auto* prune_cmd = app.add_subcommand("prune-stats", "report what a threshold would remove");
  prune_cmd->add_option("--beams", beams_path, "hypothesis records (.jsonl)")->required();
  prune_cmd->add_option("--symbolic", symbolic_path, "symbolic parses (.graphs or .jsonl)");
  prune_cmd->add_option("--threshold", threshold, "marginal threshold")->required();

  auto* cluster_cmd = app.add_subcommand("cluster-stats", "report hypothesis clusters");
  cluster_cmd->add_option("--beams", beams_path, "hypothesis records (.jsonl)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (print_config) {
    std::cout << app.config_to_str(true, true);
    return 0;
  }

  try {
    if (infer_cmd->parsed())
      return run_infer(cfg, workers, strict, beams_path, symbolic_path, out_path);
    if (score_cmd->parsed())
      return run_score(cfg, strict, pred_path, gold_path, beams_path, symbolic_path);
    if (cal_cmd->parsed())
      return run_calibrate(cfg, workers, strict, beams_path, gold_path, symbolic_path, bins,
                           out_path, csv_path);
    if (prune_cmd->parsed())
      return run_prune_stats(cfg, strict, beams_path, symbolic_path, threshold);
    if (cluster_cmd->parsed()) return run_cluster_stats(cfg, strict, beams_path);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 1;
}

}  // namespace gapinfer::cli
