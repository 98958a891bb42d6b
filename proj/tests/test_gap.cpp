#include <doctest.h>

#include <cmath>
#include <random>

#include "gapinfer/gap.hpp"
#include "gapinfer/metagraph.hpp"
#include "test_util.hpp"

using namespace gapinfer;
using testutil::cand;

namespace {

constexpr double kFloor = -23.025850929940457;  // log(1e-10)

struct F1Setup {
  BeamSet beams;
  MetaGraph meta;
  BeamPosterior post;
  VarId root = 0, child = 0, edge = 0;
};

F1Setup f1_setup(double temperature) {
  F1Setup s;
  s.beams = testutil::f1_beams();
  s.meta = build_meta_graph(s.beams);
  s.post = beam_posterior(s.beams, temperature);
  for (const MetaVariable& v : s.meta.variables) {
    if (v.kind == VarKind::Edge)
      s.edge = v.id;
    else if (v.id == s.meta.root_var)
      s.root = v.id;
    else
      s.child = v.id;
  }
  return s;
}

}  // namespace

TEST_CASE("beam_posterior softmax over sequence scores") {
  BeamSet beams = testutil::f1_beams();
  BeamPosterior p1 = beam_posterior(beams, 1.0);
  REQUIRE(p1.weights.size() == 2);
  CHECK(p1.weights[0] == doctest::Approx(0.6923076923076923).epsilon(1e-12));
  CHECK(p1.weights[1] == doctest::Approx(0.3076923076923077).epsilon(1e-12));
  CHECK(p1.seq_logprobs[0] == doctest::Approx(std::log(0.9)));

  BeamPosterior p01 = beam_posterior(beams, 0.1);
  CHECK(p01.weights[0] == doctest::Approx(0.999699361750716).epsilon(1e-12));
  CHECK(p01.weights[1] == doctest::Approx(0.0003006382492839195).epsilon(1e-9));

  BeamSet empty;
  CHECK_THROWS_AS(beam_posterior(empty, 1.0), EstimationError);
  CHECK_THROWS_AS(beam_posterior(beams, 0.0), EstimationError);
  CHECK_THROWS_AS(beam_posterior(beams, -1.0), EstimationError);
}

TEST_CASE("marginals weight element probability by hypothesis support") {
  F1Setup s = f1_setup(1.0);
  CHECK(marginal(s.meta, s.post, {s.child, "_b_n"}) ==
        doctest::Approx(0.6230769230769231).epsilon(1e-12));
  CHECK(marginal(s.meta, s.post, {s.child, "_c_n"}) ==
        doctest::Approx(0.24615384615384617).epsilon(1e-12));
  CHECK(marginal(s.meta, s.post, {s.edge, "ARG1"}) ==
        doctest::Approx(0.8461538461538461).epsilon(1e-12));
  CHECK(marginal(s.meta, s.post, {s.root, "_a_n"}) == doctest::Approx(1.0));
  // unknown value occurs nowhere
  CHECK(marginal(s.meta, s.post, {s.child, "_zzz"}) == 0.0);

  CHECK(marginal_joint(s.meta, s.post, {{s.root, "_a_n"}, {s.child, "_b_n"}}) ==
        doctest::Approx(0.6230769230769231).epsilon(1e-12));
  CHECK(marginal_joint(s.meta, s.post, {{s.child, "_b_n"}, {s.child, "_c_n"}}) == 0.0);
}

TEST_CASE("conditional renormalizes and respects linear order") {
  F1Setup s = f1_setup(1.0);
  // both hypotheses realize the edge, so the support softmax equals the full
  // posterior and only the first hypothesis places _b_n after ARG1
  CHECK(conditional(s.meta, s.post, {s.child, "_b_n"}, {{s.edge, "ARG1"}}) ==
        doctest::Approx(0.6230769230769231).epsilon(1e-12));
  // a target inside the conditioning set is certain
  CHECK(conditional(s.meta, s.post, {s.edge, "ARG1"}, {{s.edge, "ARG1"}}) == 1.0);
  // the root precedes the edge in every linearization
  CHECK(conditional(s.meta, s.post, {s.root, "_a_n"}, {{s.edge, "ARG1"}}) == 0.0);
  CHECK_THROWS_AS(conditional(s.meta, s.post, {s.child, "_b_n"}, {{s.child, "_zzz"}}),
                  EstimationError);
}

TEST_CASE("reverse_conditional applies the Bayes flip") {
  F1Setup s = f1_setup(1.0);
  CHECK(reverse_conditional(s.meta, s.post, {s.edge, "ARG1"}, {{s.child, "_b_n"}}) ==
        doctest::Approx(0.8461538461538461).epsilon(1e-12));
  // empty conditioning set falls back to the forward estimate
  CHECK(reverse_conditional(s.meta, s.post, {s.child, "_b_n"}, {}) ==
        doctest::Approx(0.6230769230769231).epsilon(1e-12));
}

TEST_CASE("reverse_conditional degenerate probabilities") {
  // second hypothesis is so improbable at low temperature that its weight
  // underflows to zero
  BeamSet beams;
  beams.id = "deg";
  beams.candidates.push_back(cand("(_a_n)", {1.0}, 0.37));
  beams.candidates.push_back(cand("(_a_n :ARG1 (_b_n))", {1.0, 1.0, 1.0}, 7.12e-218));
  MetaGraph meta = build_meta_graph(beams);
  BeamPosterior post = beam_posterior(beams, 0.1);
  VarId child = -1, edge = -1, root = meta.root_var;
  for (const MetaVariable& v : meta.variables) {
    if (v.kind == VarKind::Edge)
      edge = v.id;
    else if (v.id != root)
      child = v.id;
  }
  REQUIRE(post.weights[1] == 0.0);
  // conditioning event has zero probability mass
  CHECK_THROWS_AS(reverse_conditional(meta, post, {child, "_b_n"}, {{edge, "ARG1"}}),
                  EstimationError);
  // zero-probability target against a solid conditioner is just zero
  CHECK(reverse_conditional(meta, post, {child, "_b_n"}, {{root, "_a_n"}}) == 0.0);
}

TEST_CASE("graphical_loglik averages per-hypothesis conditionals") {
  F1Setup s = f1_setup(1.0);
  CHECK(graphical_loglik(s.meta, s.post, s.child, "_b_n", kFloor) ==
        doctest::Approx(-0.4730852957831436).epsilon(1e-12));
  CHECK(graphical_loglik(s.meta, s.post, s.child, "_c_n", kFloor) ==
        doctest::Approx(-1.4017985476558559).epsilon(1e-10));
  CHECK(graphical_loglik(s.meta, s.post, s.edge, "ARG1", kFloor) ==
        doctest::Approx(-0.1670540846631662).epsilon(1e-10));
  bool fallback = true;
  CHECK(graphical_loglik(s.meta, s.post, s.root, "_a_n", kFloor, &fallback) == 0.0);
  CHECK_FALSE(fallback);
}

TEST_CASE("graphical_loglik flips the estimator for early slots") {
  // the shared node sits between its two edge parents in the linearization,
  // so the reversed estimate applies and comes out as a hard zero
  BeamSet beams;
  beams.id = "reent";
  beams.candidates.push_back(cand("(_r_v :A (_m_n *1) :B *1)", {1, 1, 1, 1, 1}, 1.0));
  MetaGraph meta = build_meta_graph(beams);
  BeamPosterior post = beam_posterior(beams, 1.0);
  VarId shared = -1;
  for (const MetaVariable& v : meta.variables)
    if (v.kind == VarKind::Node && v.candidates.count("_m_n")) shared = v.id;
  REQUIRE(shared >= 0);
  REQUIRE(meta.gap_parents(shared).size() == 2);
  CHECK(graphical_loglik(meta, post, shared, "_m_n", kFloor) == doctest::Approx(kFloor));
}

TEST_CASE("graphical_loglik falls back to the marginal without parent support") {
  // the two hypotheses hang _m_n off different parents, so no single
  // hypothesis realizes the merged parent set
  BeamSet beams;
  beams.id = "split";
  beams.candidates.push_back(cand("(_r_v :A (_m_n))", {1, 1, 1}, 0.9));
  beams.candidates.push_back(cand("(_r_v :B (_x_n :C (_m_n)))", {1, 1, 1, 1, 1}, 0.6));
  MetaGraph meta = build_meta_graph(beams);
  VarId shared = -1;
  for (const MetaVariable& v : meta.variables)
    if (v.kind == VarKind::Node && v.candidates.count("_m_n")) shared = v.id;
  REQUIRE(shared >= 0);
  REQUIRE(meta.gap_parents(shared).size() == 2);
  BeamPosterior post = beam_posterior(beams, 1.0);
  bool fallback = false;
  double got = graphical_loglik(meta, post, shared, "_m_n", kFloor, &fallback);
  CHECK(fallback);
  CHECK(got == doctest::Approx(0.0));  // log of a certain marginal

  PipelineConfig config;
  config.aggregation_temperature = 1.0;
  GapTables tables = compute_gap(meta, beams, config);
  CHECK(tables.marginal_fallback.count(shared) == 1);
}

TEST_CASE("compute_gap fills every candidate") {
  F1Setup s = f1_setup(1.0);
  attach_symbolic(s.meta, testutil::f1_symbolic());
  PipelineConfig config;
  config.aggregation_temperature = 1.0;
  GapTables t = compute_gap(s.meta, s.beams, config);

  CHECK(t.marginal.at({s.child, "_b_n"}) == doctest::Approx(0.6230769230769231).epsilon(1e-12));
  CHECK(t.cond_loglik.at({s.root, "_a_n"}) == 0.0);
  CHECK(t.cond_loglik.at({s.child, "_b_n"}) ==
        doctest::Approx(-0.4730852957831436).epsilon(1e-12));
  CHECK(t.cond_loglik.at({s.child, "_c_n"}) ==
        doctest::Approx(-1.4017985476558559).epsilon(1e-10));
  CHECK(t.cond_loglik.at({s.edge, "ARG1"}) ==
        doctest::Approx(-0.1670540846631662).epsilon(1e-10));
  CHECK(t.marginal_fallback.empty());

  // per-parent-assignment entries keep the conditioning signature
  std::string edge_key = std::to_string(s.edge) + "=ARG1";
  std::string root_key = std::to_string(s.root) + "=_a_n";
  CHECK(t.cond_by_parents.at({s.child, "_b_n", edge_key}) ==
        doctest::Approx(-0.4730852957831436).epsilon(1e-12));
  CHECK(t.cond_by_parents.at({s.edge, "ARG1", root_key}) ==
        doctest::Approx(-0.1670540846631662).epsilon(1e-10));
  CHECK(t.cond_by_parents.count({s.root, "_a_n", "-"}) == 1);

  double chosen_b = t.assignment_loglik({{s.root, "_a_n"}, {s.child, "_b_n"}, {s.edge, "ARG1"}});
  CHECK(chosen_b == doctest::Approx(-0.6401393804463098).epsilon(1e-10));
  double chosen_c = t.assignment_loglik({{s.root, "_a_n"}, {s.child, "_c_n"}, {s.edge, "ARG1"}});
  CHECK(chosen_c == doctest::Approx(-1.5688526323190221).epsilon(1e-10));
}

TEST_CASE("symbolic-only candidates take the floor") {
  F1Setup s = f1_setup(1.0);
  attach_symbolic(s.meta, testutil::parse_graph("(_a_n :ARG9 (_z_n))"));
  PipelineConfig config;
  config.aggregation_temperature = 1.0;
  GapTables t = compute_gap(s.meta, s.beams, config);
  VarId fresh = -1;
  for (const MetaVariable& v : s.meta.variables)
    if (v.candidates.count("_z_n")) fresh = v.id;
  REQUIRE(fresh >= 0);
  CHECK(t.marginal.at({fresh, "_z_n"}) == 0.0);
  CHECK(t.cond_loglik.at({fresh, "_z_n"}) == doctest::Approx(config.logprob_floor));
  // no hypothesis supports it, but the floor path is not the fallback path
  CHECK(t.marginal_fallback.count(fresh) == 0);
}

TEST_CASE("compute_marginals matches the full tables") {
  F1Setup s = f1_setup(1.0);
  PipelineConfig config;
  config.aggregation_temperature = 1.0;
  GapTables t = compute_gap(s.meta, s.beams, config);
  auto only = compute_marginals(s.meta, s.beams, config);
  CHECK(only == t.marginal);
}

TEST_CASE("estimators agree with the brute-force oracle on random inputs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    BeamSet beams = testutil::random_beam_set(rng);
    MetaGraph meta = build_meta_graph(beams);
    for (double t : {1.0, 0.1}) {
      BeamPosterior post = beam_posterior(beams, t);
      testutil::Oracle oracle = testutil::oracle_of(meta, beams, t);
      for (const MetaVariable& var : meta.variables) {
        for (const auto& [value, info] : var.candidates) {
          double want = static_cast<double>(oracle.marginal(var.id, value));
          CHECK(marginal(meta, post, {var.id, value}) == doctest::Approx(want).epsilon(1e-9));

          std::vector<VarId> parents = meta.gap_parents(var.id);
          testutil::Oracle::Graphical g =
              oracle.graphical(var.id, value, std::vector<int>(parents.begin(), parents.end()),
                               kFloor);
          bool fallback = false;
          double got = graphical_loglik(meta, post, var.id, value, kFloor, &fallback);
          CHECK(got == doctest::Approx(static_cast<double>(g.value)).epsilon(1e-9));
          CHECK(fallback == g.fallback);
        }
      }
    }
  }
}
