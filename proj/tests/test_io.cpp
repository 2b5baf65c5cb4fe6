#include "deftree/io.hpp"

#include "deftree/report.hpp"
#include "deftree/theorem_lab.hpp"
#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace deftree;
using namespace deftree::test;

TEST_CASE("rational strings round-trip bit-exactly") {
  for (const char* s : {"0", "1", "4/5", "355/113", "12345678901234567890/7",
                        "1000000000000000000000001/3"}) {
    REQUIRE(format_rat(parse_rat(s)) == s);
  }
  REQUIRE(parse_rat("2/4") == Rat(1, 2));
  REQUIRE_THROWS(parse_rat("1/0"));
  REQUIRE_THROWS(parse_rat("x"));
}

TEST_CASE("instance files round-trip to identical objects") {
  for (const std::string name : {"binomial", "ex1", "xquestion", "ladder", "revival", "sec3"}) {
    Instance inst = gallery(name);
    std::string text = serialize_instance(inst);
    Instance back = parse_instance_text(text);
    REQUIRE(serialize_instance(back) == text);
    REQUIRE(back.tree.size() == inst.tree.size());
    REQUIRE(back.gens.singles.size() == inst.gens.singles.size());
    REQUIRE(back.gens.rays.size() == inst.gens.rays.size());
    for (size_t k = 0; k < inst.gens.singles.size(); ++k)
      REQUIRE(back.gens.singles[k].second == inst.gens.singles[k].second);
    REQUIRE(instance_digest(back) == instance_digest(inst));
  }
}

TEST_CASE("random instances round-trip as well") {
  for (uint64_t seed = 3000; seed < 3020; ++seed) {
    Instance inst = make_random_instance(seed, {});
    Instance back = parse_instance_text(serialize_instance(inst));
    REQUIRE(serialize_instance(back) == serialize_instance(inst));
  }
}

TEST_CASE("instance parse errors carry field diagnostics") {
  REQUIRE_THROWS_WITH(parse_instance_text("{"), Catch::Matchers::ContainsSubstring("parse error"));
  REQUIRE_THROWS_WITH(parse_instance_text("{\"horizon\": 1}"),
                      Catch::Matchers::ContainsSubstring("nodes"));
  // A generator with a missing node value names the node.
  Json j = instance_json(gallery("binomial"));
  j["generators"]["cash"].erase("u");
  REQUIRE_THROWS_WITH(parse_instance(j), Catch::Matchers::ContainsSubstring("missing value"));
}

TEST_CASE("deflator files round-trip") {
  Instance inst = gallery("binomial");
  auto res = synth_deflator_nupbr(inst.tree, inst.gens);
  Json j = deflator_json(inst.tree, res.deflator.y, res.delta, to_string(res.deflator.mode));
  auto [y, delta] = parse_deflator(inst.tree, j);
  REQUIRE(y == res.deflator.y);
  REQUIRE(delta == res.delta);
}

TEST_CASE("run reports render the same values in both formats") {
  RunReport report;
  report.command = "demo";
  report.digest = "abc";
  report.set("delta", "4/5");
  report.set("verdict", "holds");
  report.exit_status = 0;
  std::string human = report.render_human();
  std::string machine = report.render_machine();
  for (const auto& [k, v] : report.fields) {
    REQUIRE(human.find(k + ": " + v) != std::string::npos);
    Json j = Json::parse(machine);
    REQUIRE(j.at("fields").at(k).get<std::string>() == v);
  }
}
