#pragma once

#include "deftree/rational.hpp"
#include "deftree/tree.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace deftree {

/// Possibly non-adapted nonnegative process: one value per (leaf, time).
struct RawProcess {
  std::vector<std::vector<Rat>> by_leaf;  // [leaf ordinal][time 0..horizon]
};

inline void require_raw(const EventTree& tree, const RawProcess& z) {
  if (z.by_leaf.size() != static_cast<size_t>(tree.leaf_count()))
    throw std::invalid_argument("raw process must carry one value list per leaf");
  for (const auto& path : z.by_leaf) {
    if (path.size() != static_cast<size_t>(tree.horizon()) + 1)
      throw std::invalid_argument("raw process must carry one value per time 0..horizon");
    for (const Rat& v : path)
      if (v < 0) throw std::invalid_argument("raw process values must be nonnegative");
  }
}

struct GsmVerdict {
  bool ok = true;
  int s = -1, t = -1;
  int atom = -1;  // witnessing time-s node
  Rat lhs, rhs;   // E[(Z_t/Z_s) I_atom] vs P(atom)
};

/// Generalized supermartingale test: E[(Z_t/Z_s) I_A] <= P(A) for all s < t
/// and every atom A of F_s (atoms suffice by additivity), with 0/0 = 1.
/// A zero Z_s under a positive Z_t makes the instance undefined.
inline GsmVerdict is_generalized_supermartingale(const EventTree& tree, const RawProcess& z) {
  require_raw(tree, z);
  // Undefined ratios anywhere make the whole instance undefined, regardless
  // of violations found earlier in the scan order.
  for (int w = 0; w < tree.leaf_count(); ++w)
    for (int s = 0; s < tree.horizon(); ++s)
      for (int t = s + 1; t <= tree.horizon(); ++t)
        if (z.by_leaf[static_cast<size_t>(w)][static_cast<size_t>(s)] == 0 &&
            z.by_leaf[static_cast<size_t>(w)][static_cast<size_t>(t)] != 0)
          throw std::invalid_argument("undefined instance: Z_s = 0 under positive Z_t on leaf '" +
                                      tree.node(tree.leaves()[static_cast<size_t>(w)]).id + "'");
  for (int s = 0; s < tree.horizon(); ++s) {
    for (int t = s + 1; t <= tree.horizon(); ++t) {
      for (int atom : tree.at_time(s)) {
        Rat expectation = 0;
        for (int w : tree.node(atom).leaves) {
          const Rat& zs = z.by_leaf[static_cast<size_t>(w)][static_cast<size_t>(s)];
          const Rat& zt = z.by_leaf[static_cast<size_t>(w)][static_cast<size_t>(t)];
          Rat ratio = zs == 0 ? Rat(1) : zt / zs;  // 0/0 = 1
          expectation += tree.node(tree.leaves()[static_cast<size_t>(w)]).path_prob * ratio;
        }
        const Rat& p = tree.node(atom).path_prob;
        if (expectation > p) return {false, s, t, atom, expectation, p};
      }
    }
  }
  return {};
}

struct ProjectionComparison {
  bool gsm = false;
  bool projection_supermartingale = false;
  AdaptedProcess projection;
  GsmVerdict gsm_verdict;
  SupermartingaleVerdict projection_verdict;
};

/// Optional projection (per-node probability-weighted average over the node's
/// leaves) side by side with the generalized-supermartingale verdict; the two
/// notions are independent.
inline ProjectionComparison compare_projection(const EventTree& tree, const RawProcess& z) {
  require_raw(tree, z);
  ProjectionComparison out;
  out.projection.assign(static_cast<size_t>(tree.size()), Rat(0));
  for (int i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    Rat acc = 0;
    for (int w : n.leaves)
      acc += tree.node(tree.leaves()[static_cast<size_t>(w)]).path_prob *
             z.by_leaf[static_cast<size_t>(w)][static_cast<size_t>(n.time)];
    out.projection[static_cast<size_t>(i)] = acc / n.path_prob;
  }
  out.gsm_verdict = is_generalized_supermartingale(tree, z);
  out.gsm = out.gsm_verdict.ok;
  out.projection_verdict = is_supermartingale(tree, out.projection);
  out.projection_supermartingale = out.projection_verdict.ok;
  return out;
}

}  // namespace deftree
