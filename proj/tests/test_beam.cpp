#include <doctest.h>

#include <cmath>
#include <limits>

#include "gapinfer/beam.hpp"
#include "test_util.hpp"

using namespace gapinfer;

TEST_CASE("make_candidate caches element logprobs and positions") {
  BeamCandidate c = testutil::cand("(_a_n :ARG1 (_b_n))", {1.0, 1.0, 0.9}, 0.9);
  CHECK(c.sequence_logprob == doctest::Approx(std::log(0.9)));
  REQUIRE(c.symbol_logprobs.size() == 3);
  CHECK(c.node_logprob[0] == doctest::Approx(0.0));
  CHECK(c.node_logprob[1] == doctest::Approx(std::log(0.9)));
  CHECK(c.edge_logprob[0] == doctest::Approx(0.0));
  CHECK(c.node_position[0] == 0);
  CHECK(c.edge_position[0] == 1);
  CHECK(c.node_position[1] == 2);
}

TEST_CASE("reentrancy spans accumulate on their node") {
  // symbols: _r_v, A, _m_n, B, *1 -- the reference span charges node 1 again
  BeamCandidate c = testutil::cand("(_r_v :A (_m_n *1) :B *1)",
                                   {1.0, 0.9, 0.8, 0.7, 0.6}, 0.2);
  CHECK(c.node_logprob[1] == doctest::Approx(std::log(0.8) + std::log(0.6)));
  CHECK(c.node_position[1] == 2);
  CHECK(c.edge_logprob[1] == doctest::Approx(std::log(0.7)));
  CHECK(c.edge_position[1] == 3);
}

TEST_CASE("make_candidate rejects bad inputs") {
  CHECK_THROWS_AS(testutil::cand("(((", {0.5}, 0.5), BeamError);
  CHECK_THROWS_AS(testutil::cand("(_a_n)", {0.5, 0.5}, 0.5), BeamError);  // count mismatch
  CHECK_THROWS_AS(make_candidate("(_a_n)", {0.5}, -1.0), BeamError);      // positive logprob
  CHECK_THROWS_AS(make_candidate("(_a_n)", {std::numeric_limits<double>::quiet_NaN()}, -1.0),
                  BeamError);
  // a sequence more likely than its own symbols is inconsistent
  CHECK_THROWS_AS(make_candidate("(_a_n)", {std::log(0.5)}, std::log(0.9)), BeamError);
}

TEST_CASE("segment_symbols charges tokens to the span under their first character") {
  std::vector<Token> tokens = {{"(", -0.1},    {"_a_n", -0.2}, {" :", -0.3}, {"ARG1", -0.4},
                               {" (", -0.5},   {"_b_n", -0.6}, {"))", -0.7}};
  BeamCandidate c = segment_symbols(tokens);
  CHECK(c.sequence_logprob == doctest::Approx(-2.8));
  REQUIRE(c.symbol_logprobs.size() == 3);
  CHECK(c.symbol_logprobs[0] == doctest::Approx(-0.2));
  CHECK(c.symbol_logprobs[1] == doctest::Approx(-0.4));
  CHECK(c.symbol_logprobs[2] == doctest::Approx(-0.6));
  CHECK(c.graph.nodes.size() == 2);
  CHECK(c.tokens.size() == 7);
}

TEST_CASE("segment_symbols drops structural-token mass from the symbols") {
  // every token starts on a structural character: no symbol gets charged,
  // the sequence keeps the full mass
  std::vector<Token> tokens = {{"(_a_n", -0.5}, {" :A", -0.5}, {" (_b_n))", -0.5}};
  BeamCandidate c = segment_symbols(tokens);
  CHECK(c.sequence_logprob == doctest::Approx(-1.5));
  CHECK(c.symbol_logprobs[0] == doctest::Approx(0.0));
  CHECK(c.symbol_logprobs[1] == doctest::Approx(0.0));
  CHECK(c.symbol_logprobs[2] == doctest::Approx(0.0));
}

TEST_CASE("segment_symbols rejects broken streams") {
  CHECK_THROWS_AS(segment_symbols({{"(_a_n", -0.1}}), BeamError);   // unclosed
  CHECK_THROWS_AS(segment_symbols({{"(_a_n)", 0.5}}), BeamError);   // positive logprob
}

TEST_CASE("load_beams_jsonl keeps good records and counts the rest") {
  std::string dir = testutil::temp_dir();
  std::string path = dir + "/beams.jsonl";
  testutil::write_file(
      path,
      "{\"id\": \"s1\", \"input\": \"x\", \"beams\": ["
      "{\"graph\": \"(_a_n)\", \"symbol_logprobs\": [-0.7], \"sequence_logprob\": -0.9},"
      "{\"graph\": \"(_b_n)\", \"symbol_logprobs\": [-0.1], \"sequence_logprob\": -0.2},"
      "{\"tokens\": [[\"(_c_n\", -0.3], [\")\", -0.1]]}]}\n"
      "not json\n"
      "\n"
      "{\"id\": 7, \"beams\": ["
      "{\"graph\": \"(_a_n)\", \"symbol_logprobs\": [-0.1, -0.2], \"sequence_logprob\": -0.3},"
      "{\"graph\": \"(_d_v)\", \"symbol_logprobs\": [-0.4], \"sequence_logprob\": -0.5}]}\n"
      "{\"id\": \"s3\"}\n");

  std::vector<std::string> warnings;
  std::vector<BeamSet> sets = load_beams_jsonl(path, &warnings);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].id == "s1");
  CHECK(sets[0].input == "x");
  REQUIRE(sets[0].candidates.size() == 3);
  // sorted by sequence logprob, best first
  CHECK(sets[0].candidates[0].sequence_logprob == doctest::Approx(-0.2));
  CHECK(sets[0].candidates[1].sequence_logprob == doctest::Approx(-0.4));  // token beam
  CHECK(sets[0].candidates[2].sequence_logprob == doctest::Approx(-0.9));
  CHECK(sets[0].invalid_count == 0);

  CHECK(sets[1].id == "7");
  CHECK(sets[1].candidates.size() == 1);
  CHECK(sets[1].invalid_count == 1);

  REQUIRE(warnings.size() == 3);  // bad json, bad hypothesis, record without beams
  CHECK(warnings[0].find(":2:") != std::string::npos);

  CHECK_THROWS_AS(load_beams_jsonl(path, nullptr, true), BeamError);
  CHECK_THROWS_AS(load_beams_jsonl(dir + "/absent.jsonl", nullptr), BeamError);
}
