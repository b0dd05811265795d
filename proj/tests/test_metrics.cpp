#include "doctest.h"
#include "scopecomp/metrics.hpp"
#include "support.hpp"

using namespace scopecomp;
using testsupport::oracle_levenshtein;
using testsupport::oracle_opt;

TEST_CASE("levenshtein on small known pairs") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("abc", "") == 3);
  CHECK(levenshtein("flaw", "lawn") == 2);
  CHECK(levenshtein("same", "same") == 0);
}

TEST_CASE("levenshtein counts characters, not bytes, by default") {
  // "ü" is two bytes in UTF-8.
  CHECK(levenshtein("grün", "grun") == 1);
  MetricOptions bytes;
  bytes.bytes = true;
  CHECK(levenshtein("grün", "grun", bytes) == 2);
}

TEST_CASE("levenshtein agrees with the recursive oracle on random strings") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto a = testsupport::random_string(rng, 12, 4);
    auto b = testsupport::random_string(rng, 12, 4);
    REQUIRE(levenshtein(a, b) == oracle_levenshtein(a, b));
  }
}

TEST_CASE("opt prefix distance") {
  SUBCASE("prediction that continues past the truth scores zero") {
    auto r = opt_prefix_distance("return x;\n}junk junk", "return x;\n}");
    CHECK(r.distance == 0);
    CHECK(r.prefix_len == 11);
  }
  SUBCASE("empty prediction costs the whole truth") {
    auto r = opt_prefix_distance("", "abc");
    CHECK(r.distance == 3);
    CHECK(r.prefix_len == 0);
  }
  SUBCASE("ties resolve to the shortest prefix") {
    // "", "a" and "ab" are each one edit away from "b".
    auto r = opt_prefix_distance("ab", "b");
    CHECK(r.distance == 1);
    CHECK(r.prefix_len == 0);
  }
  SUBCASE("matches min over prefixes of the oracle") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 150; ++i) {
      auto p = testsupport::random_string(rng, 14, 3);
      auto t = testsupport::random_string(rng, 14, 3);
      auto r = opt_prefix_distance(p, t);
      REQUIRE(r.distance == oracle_opt(p, t));
      REQUIRE(oracle_levenshtein(p.substr(0, r.prefix_len), t) == r.distance);
      REQUIRE(r.distance <= levenshtein(p, t));
    }
  }
}

TEST_CASE("whitespace normalization") {
  CHECK(normalize_whitespace("a  \t b   \nc\t\t\n") == "a b\nc\n");
  MetricOptions ws;
  ws.normalize_ws = true;
  CHECK(levenshtein("if (x)  {\n", "if (x) {   \n", ws) == 0);
  CHECK(levenshtein("if (x)  {\n", "if (x) {   \n") == 3);
}

TEST_CASE("evaluate_one fills every field") {
  EvalInput in{"t1", "if_body", "x = 1;\n}extra", "x = 1;\n}"};
  auto r = evaluate_one(in);
  CHECK(r.full_distance == 5);
  CHECK(r.opt_distance == 0);
  CHECK(r.opt_prefix_len == 8);
  CHECK(r.conciseness_delta == 5);
}

TEST_CASE("aggregate report groups by category with mean and median") {
  std::vector<EvalRecord> recs = {
      {"a", "for_body", "", "", 4, 1, 0, 3},
      {"b", "for_body", "", "", 2, 0, 0, 2},
      {"c", "for_body", "", "", 9, 5, 0, 4},
      {"d", "else_body", "", "", 1, 1, 0, 0},
      {"e", "else_body", "", "", 3, 2, 0, 1},
  };
  auto rows = aggregate_report(recs);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].category == "else_body");
  CHECK(rows[0].n_tests == 2);
  CHECK(rows[0].mean_full == doctest::Approx(2.0));
  CHECK(rows[0].median_opt == doctest::Approx(1.5));
  CHECK(rows[1].category == "for_body");
  CHECK(rows[1].mean_opt == doctest::Approx(2.0));
  CHECK(rows[1].median_full == doctest::Approx(4.0));

  auto csv = report_csv(rows);
  CHECK(csv ==
        "category,n,mean_opt,median_opt,mean_full,median_full\n"
        "else_body,2,1.500,1.500,2.000,2.000\n"
        "for_body,3,2.000,1.000,5.000,4.000\n");
}

TEST_CASE("eval records round-trip through JSON") {
  auto j = Json::parse(to_json(evaluate_one({"t", "logging", "ab", "abc"})).dump());
  CHECK(j["full_distance"] == 1);
  CHECK(j["opt_distance"] == 1);
  auto back = eval_input_from_json(j);
  CHECK(back.prediction == "ab");
  CHECK(back.ground_truth == "abc");
}
