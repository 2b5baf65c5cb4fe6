#pragma once

#include "deftree/theorem_lab.hpp"
#include "deftree/tree.hpp"

#include <initializer_list>
#include <string>
#include <vector>

namespace deftree::test {

/// Deterministic single-path tree n0 -> n1 -> ... -> n{horizon}.
inline EventTree timeline(int horizon) {
  std::vector<NodeSpec> specs;
  for (int t = 0; t <= horizon; ++t) {
    NodeSpec s;
    s.id = "n" + std::to_string(t);
    s.time = t;
    if (t > 0) s.parent = "n" + std::to_string(t - 1);
    s.prob = 1;
    specs.push_back(s);
  }
  return EventTree::build(specs, horizon);
}

/// Root with two equally likely children u, d.
inline EventTree binomial() {
  return EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                           {"u", 1, "n0", Rat(1, 2)},
                           {"d", 1, "n0", Rat(1, 2)}},
                          1);
}

/// Timeline 0-1 then a two-leaf split: trivial F_1, leaves a and b.
inline EventTree two_leaf() {
  return EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                           {"n1", 1, "n0", Rat(1)},
                           {"a", 2, "n1", Rat(1, 2)},
                           {"b", 2, "n1", Rat(1, 2)}},
                          2);
}

inline AdaptedProcess rats(std::initializer_list<int> values) {
  AdaptedProcess x;
  for (int v : values) x.push_back(Rat(v));
  return x;
}

}  // namespace deftree::test
