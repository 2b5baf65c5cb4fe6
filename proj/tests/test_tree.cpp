#include "deftree/tree.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace deftree;
using namespace deftree::test;

TEST_CASE("build: deterministic timeline") {
  EventTree t = timeline(2);
  REQUIRE(t.size() == 3);
  REQUIRE(t.leaf_count() == 1);
  REQUIRE(t.node(t.leaves()[0]).id == "n2");
  REQUIRE(t.node(0).path_prob == 1);
}

TEST_CASE("build: binomial split") {
  EventTree t = binomial();
  REQUIRE(t.size() == 3);
  REQUIRE(t.leaf_count() == 2);
  REQUIRE(t.node(t.index_of("u")).path_prob == Rat(1, 2));
}

TEST_CASE("build: probability sum violation is reported with the node") {
  REQUIRE_THROWS_WITH(EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                                        {"u", 1, "n0", Rat(1, 3)},
                                        {"d", 1, "n0", Rat(1, 3)}},
                                       1),
                      Catch::Matchers::ContainsSubstring("probability sum 2/3 != 1") &&
                          Catch::Matchers::ContainsSubstring("n0"));
}

TEST_CASE("build: orphan, time gap, nonpositive probability") {
  REQUIRE_THROWS_WITH(
      EventTree::build({{"n0", 0, std::nullopt, Rat(1)}, {"x", 1, "nope", Rat(1)}}, 1),
      Catch::Matchers::ContainsSubstring("orphan"));
  REQUIRE_THROWS_WITH(
      EventTree::build({{"n0", 0, std::nullopt, Rat(1)}, {"x", 2, "n0", Rat(1)}}, 2),
      Catch::Matchers::ContainsSubstring("time gap"));
  REQUIRE_THROWS(EventTree::build({{"n0", 0, std::nullopt, Rat(1)}, {"x", 1, "n0", Rat(0)}}, 1));
  REQUIRE_THROWS_WITH(EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                                        {"n1", 0, std::nullopt, Rat(1)}},
                                       1),
                      Catch::Matchers::ContainsSubstring("exactly one root"));
}

TEST_CASE("conditional expectation: binomial mean and constants") {
  EventTree t = binomial();
  auto out = conditional_expectation(t, std::vector<Rat>{Rat(6), Rat(2)}, 1, 0);
  REQUIRE(out == std::vector<Rat>{Rat(4)});

  EventTree tl = timeline(3);
  AdaptedProcess c(4, Rat(7));
  for (int s = 0; s <= 3; ++s)
    REQUIRE(conditional_expectation_process(tl, c, 3, s) == std::vector<Rat>(1, Rat(7)));
}

TEST_CASE("conditional expectation: two-leaf mean, errors") {
  EventTree t = two_leaf();
  auto out = conditional_expectation(t, std::vector<Rat>{Rat(9), Rat(1)}, 2, 0);
  REQUIRE(out == std::vector<Rat>{Rat(5)});  // (9+1)/2 by hand
  REQUIRE_THROWS(conditional_expectation(t, std::vector<Rat>{Rat(9), Rat(1)}, 1, 2));
  REQUIRE_THROWS(conditional_expectation(t, std::vector<Rat>{Rat(9)}, 2, 0));
}

TEST_CASE("tower property: s <= t <= u compose exactly") {
  EventTree t = EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                                  {"u", 1, "n0", Rat(1, 3)},
                                  {"d", 1, "n0", Rat(2, 3)},
                                  {"uu", 2, "u", Rat(1, 4)},
                                  {"ud", 2, "u", Rat(3, 4)},
                                  {"du", 2, "d", Rat(1, 2)},
                                  {"dd", 2, "d", Rat(1, 2)}},
                                 2);
  SplitMix64 rng(99);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<Rat> vals;
    for (size_t i = 0; i < t.at_time(2).size(); ++i)
      vals.push_back(Rat(static_cast<long>(rng.below(12)), 1 + static_cast<long>(rng.below(5))));
    auto direct = conditional_expectation(t, vals, 2, 0);
    auto mid = conditional_expectation(t, vals, 2, 1);
    auto composed = conditional_expectation(t, mid, 1, 0);
    REQUIRE(direct == composed);
  }
}

TEST_CASE("supermartingale test: constants, projection rows") {
  EventTree tl = timeline(2);
  REQUIRE(is_supermartingale(tl, rats({1, 1, 1})).ok);

  auto down_up = is_supermartingale(tl, rats({5, 4, 5}));
  REQUIRE_FALSE(down_up.ok);
  REQUIRE(tl.node(down_up.witness_node).time == 1);

  REQUIRE(is_supermartingale(tl, rats({5, 5, 4})).ok);
}

TEST_CASE("one-step inequalities compose to root domination") {
  EventTree t = binomial();
  AdaptedProcess y{Rat(1), Rat(4, 5), Rat(4, 5)};
  REQUIRE(is_supermartingale(t, y).ok);
  for (int time = 0; time <= t.horizon(); ++time) {
    auto level = conditional_expectation_process(t, y, time, 0);
    REQUIRE(level[0] <= y[0]);
  }
}

TEST_CASE("hitting time: first zero, never, revival ignored") {
  EventTree tl = timeline(2);
  REQUIRE(hitting_time(tl, rats({1, 1, 0})).at[0] == 2);
  REQUIRE_FALSE(hitting_time(tl, rats({1, 2, 1})).at[0].has_value());
  REQUIRE(hitting_time(tl, rats({1, 0, 1})).at[0] == 1);
}

TEST_CASE("stopping time measurability") {
  EventTree t = two_leaf();
  StoppingTime tau{{std::optional<int>(1), std::optional<int>(1)}};
  REQUIRE(is_stopping_time(t, tau));
  // Leaves share the time-1 atom, so splitting at 2 vs infinity is fine,
  // but splitting {tau <= 1} across them is not.
  StoppingTime bad{{std::optional<int>(1), std::nullopt}};
  REQUIRE_FALSE(is_stopping_time(t, bad));
  StoppingTime ok{{std::optional<int>(2), std::nullopt}};
  REQUIRE(is_stopping_time(t, ok));
}

TEST_CASE("refine: trivial partition changes nothing") {
  EventTree t = binomial();
  std::vector<int> all{0, 1};
  Refinement r = refine_by_partition(t, {all}, {0});
  REQUIRE(r.tree.size() == t.size());
  for (int i = 0; i < t.size(); ++i) {
    REQUIRE(r.tree.node(i).id == t.node(i).id);
    REQUIRE(r.map.to_base[static_cast<size_t>(i)] == i);
    REQUIRE(r.map.weight[static_cast<size_t>(i)] == 1);
  }
}

TEST_CASE("refine: binomial leaves revealed at 0 split the root") {
  EventTree t = binomial();
  Refinement r = refine_by_partition(t, {{0}, {1}}, {0, 0});
  REQUIRE(r.tree.at_time(0).size() == 2);
  for (int n : r.tree.at_time(0)) {
    REQUIRE(r.tree.node(n).prob == Rat(1, 2));
    REQUIRE(r.map.weight[static_cast<size_t>(n)] == Rat(1, 2));
    REQUIRE(r.map.to_base[static_cast<size_t>(n)] == 0);
  }
}

TEST_CASE("refine: revealing {a} at 1 gives four time-1 sets") {
  EventTree t = two_leaf();
  Refinement r = refine_by_partition(t, {{0}, {1}}, {1, 1});
  // Two time-1 atoms generate a sigma-algebra of 4 sets.
  REQUIRE(r.tree.at_time(1).size() == 2);
  REQUIRE(r.tree.at_time(0).size() == 1);
}

TEST_CASE("refine: leaf probabilities are preserved") {
  EventTree t = EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                                  {"u", 1, "n0", Rat(1, 3)},
                                  {"d", 1, "n0", Rat(2, 3)},
                                  {"uu", 2, "u", Rat(1, 4)},
                                  {"ud", 2, "u", Rat(3, 4)},
                                  {"du", 2, "d", Rat(1, 2)},
                                  {"dd", 2, "d", Rat(1, 2)}},
                                 2);
  Refinement r = refine_by_partition(t, {{0, 3}, {1}, {2}}, {0, 1, 2});
  REQUIRE(r.tree.leaf_count() == t.leaf_count());
  for (int w = 0; w < t.leaf_count(); ++w) {
    int copy = r.tree.leaves()[static_cast<size_t>(w)];
    REQUIRE(r.map.to_base[static_cast<size_t>(copy)] == t.leaves()[static_cast<size_t>(w)]);
    REQUIRE(r.tree.node(copy).path_prob == t.node(t.leaves()[static_cast<size_t>(w)]).path_prob);
  }
}

TEST_CASE("refine: overlapping cells rejected") {
  EventTree t = binomial();
  REQUIRE_THROWS_WITH(refine_by_partition(t, {{0, 1}, {1}}, {0, 0}),
                      Catch::Matchers::ContainsSubstring("overlapping"));
  REQUIRE_THROWS_WITH(refine_by_partition(t, {{0}}, {0}),
                      Catch::Matchers::ContainsSubstring("cover"));
}

TEST_CASE("optional projection: identity and forced mean") {
  EventTree t = binomial();
  NodeMap id = NodeMap::identity(t);
  AdaptedProcess x = rats({1, 2, 3});
  REQUIRE(optional_projection(t, t, id, x) == x);

  Refinement r = refine_by_partition(t, {{0}, {1}}, {0, 0});
  AdaptedProcess y(static_cast<size_t>(r.tree.size()), Rat(0));
  for (int n : r.tree.at_time(0))
    y[static_cast<size_t>(n)] = r.tree.node(n).leaves[0] == 0 ? Rat(2) : Rat(4);
  AdaptedProcess back = optional_projection(t, r.tree, r.map, y);
  REQUIRE(back[0] == Rat(3));
}

TEST_CASE("projection commutes with conditional expectation at equal times") {
  EventTree t = EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                                  {"u", 1, "n0", Rat(1, 3)},
                                  {"d", 1, "n0", Rat(2, 3)},
                                  {"uu", 2, "u", Rat(1, 4)},
                                  {"ud", 2, "u", Rat(3, 4)},
                                  {"du", 2, "d", Rat(1, 2)},
                                  {"dd", 2, "d", Rat(1, 2)}},
                                 2);
  Refinement r = refine_by_partition(t, {{0, 2}, {1, 3}}, {1, 1});
  SplitMix64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    AdaptedProcess z(static_cast<size_t>(r.tree.size()));
    for (auto& v : z) v = Rat(static_cast<long>(rng.below(9)), 1 + static_cast<long>(rng.below(4)));
    AdaptedProcess projected = optional_projection(t, r.tree, r.map, z);
    for (int s = 0; s <= 2; ++s) {
      // Project, then condition on the base tree...
      auto a = conditional_expectation_process(t, projected, 2, s);
      // ...versus condition on the refined tree, then project the time-s level.
      auto refined_level = conditional_expectation_process(r.tree, z, 2, s);
      AdaptedProcess lifted(static_cast<size_t>(r.tree.size()), Rat(0));
      for (size_t k = 0; k < r.tree.at_time(s).size(); ++k)
        lifted[static_cast<size_t>(r.tree.at_time(s)[k])] = refined_level[k];
      std::map<int, Rat> mean;
      for (int n : r.tree.at_time(s)) {
        int b = r.map.to_base[static_cast<size_t>(n)];
        mean[b] += r.map.weight[static_cast<size_t>(n)] * lifted[static_cast<size_t>(n)];
      }
      for (size_t k = 0; k < t.at_time(s).size(); ++k)
        REQUIRE(mean[t.at_time(s)[k]] == a[k]);
    }
  }
}
