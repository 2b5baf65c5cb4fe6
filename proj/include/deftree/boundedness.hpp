#pragma once

#include "deftree/process_set.hpp"
#include "deftree/rational.hpp"
#include "deftree/tree.hpp"

#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace deftree {

/// Per-node suprema over the fork-convex closure, normalized to root wealth 1.
/// s_pos: strategies whose wealth stayed positive on the whole path so far;
/// s_zero: strategies that hit zero and continued through the 0/0 = 1
/// resurrection branch. The closure supremum at a node is the max of the two.
struct SupProfile {
  std::vector<ExtReal> s_pos, s_zero;

  ExtReal bound(int node) const {
    return ExtReal::max(s_pos.at(static_cast<size_t>(node)), s_zero.at(static_cast<size_t>(node)));
  }
};

/// Forward DP for the closure supremum.
///
/// A strategy rides sigma units of one member per stretch. Per member and per
/// death flag the DP tracks the supremum of ride scales, with these moves:
///   - fresh anchor: entering wealth v on a member positive at the node gives
///     scale v / member(node);
///   - riding through zeros keeps the scale (a zero flips the flag);
///   - junction swap: at a node where the ridden member and another member
///     both vanish, the scale transfers verbatim to the other member (the
///     itinerary's tail is replaced behind the original anchor, and 0/0 = 1
///     at the junction);
///   - resurrection: wherever some element vanishes, every co-vanishing
///     member can be entered at scale exactly 1;
///   - mixing: wherever some element is positive and a member vanishes, that
///     member's scale becomes unbounded - switching the positive wealth into
///     cc^alpha(positive element, dead ride) with alpha near 1 rescales the
///     dead ride's revival arbitrarily;
///   - ray scales split into the x = 0 endpoint (base) and the x -> infinity
///     endpoint (direction); anchors where one part vanishes under a positive
///     sibling make the opposite endpoint coefficient unbounded (cheap
///     tickets at x near 0, free direction at x large), and a fully vanished
///     family resurrects at arbitrarily large x.
/// Values always branch on the zero factor first, so 0 * inf is never formed.
/// Convex combinations otherwise lower values (mediant), so the moves above
/// are exhaustive.
inline SupProfile closure_sup(const EventTree& tree, const GeneratorSet& gens) {
  validate_generator_set(tree, gens);
  const size_t n_nodes = static_cast<size_t>(tree.size());
  const size_t n_singles = gens.singles.size();
  const size_t n_rays = gens.rays.size();

  SupProfile profile;
  profile.s_pos.assign(n_nodes, ExtReal(Rat(0)));
  profile.s_zero.assign(n_nodes, ExtReal(Rat(0)));
  std::vector<char> dead_reachable(n_nodes, 0);

  struct RideState {
    std::vector<ExtReal> single[2];  // per single, per death flag
    std::vector<ExtReal> ray_a[2];   // x = 0 endpoint scale
    std::vector<ExtReal> ray_b[2];   // x -> infinity endpoint scale
  };
  std::vector<RideState> state(n_nodes);
  RideState empty;
  for (int f = 0; f < 2; ++f) {
    empty.single[f].assign(n_singles, ExtReal(Rat(0)));
    empty.ray_a[f].assign(n_rays, ExtReal(Rat(0)));
    empty.ray_b[f].assign(n_rays, ExtReal(Rat(0)));
  }

  const ExtReal zero{Rat(0)};
  const ExtReal one{Rat(1)};
  const ExtReal inf = ExtReal::infinity();

  for (int idx = 0; idx < tree.size(); ++idx) {
    const auto& node = tree.node(idx);
    const size_t i = static_cast<size_t>(idx);
    const bool is_root = node.parent < 0;
    const RideState& up = is_root ? empty : state[static_cast<size_t>(node.parent)];

    bool member_dead_here = false;
    for (const auto& [name, g] : gens.singles)
      if (g[i] == 0) member_dead_here = true;
    for (const auto& [name, r] : gens.rays)
      if (r.a[i] == 0) member_dead_here = true;
    bool dead = member_dead_here ||
                (!is_root && dead_reachable[static_cast<size_t>(node.parent)]);
    dead_reachable[i] = dead ? 1 : 0;

    // Incoming rides with the death update: a vanished member flips its
    // rides to the zero flag, scale intact (riding through).
    RideState in;
    for (int f = 0; f < 2; ++f) {
      in.single[f].assign(n_singles, zero);
      in.ray_a[f].assign(n_rays, zero);
      in.ray_b[f].assign(n_rays, zero);
    }
    for (size_t s = 0; s < n_singles; ++s) {
      if (gens.singles[s].second[i] > 0) {
        for (int f = 0; f < 2; ++f) in.single[f][s] = up.single[f][s];
      } else {
        in.single[1][s] = ExtReal::max(up.single[0][s], up.single[1][s]);
      }
    }
    for (size_t r = 0; r < n_rays; ++r) {
      const Rat& av = gens.rays[r].second.a[i];
      const Rat& bv = gens.rays[r].second.b[i];
      if (av > 0) {
        for (int f = 0; f < 2; ++f) in.ray_a[f][r] = up.ray_a[f][r];
      } else {
        in.ray_a[1][r] = ExtReal::max(up.ray_a[0][r], up.ray_a[1][r]);
      }
      if (av > 0 || bv > 0) {
        for (int f = 0; f < 2; ++f) in.ray_b[f][r] = up.ray_b[f][r];
      } else {
        in.ray_b[1][r] = ExtReal::max(up.ray_b[0][r], up.ray_b[1][r]);
      }
    }

    // Value suprema at this node.
    ExtReal v[2] = {zero, zero};
    if (is_root) {
      v[0] = one;  // every element is normalized to 1 at time 0
    } else {
      for (size_t s = 0; s < n_singles; ++s) {
        const Rat& gv = gens.singles[s].second[i];
        if (gv == 0) continue;
        for (int f = 0; f < 2; ++f) v[f] = ExtReal::max(v[f], in.single[f][s].scaled(gv));
      }
      for (size_t r = 0; r < n_rays; ++r) {
        const Rat& av = gens.rays[r].second.a[i];
        const Rat& bv = gens.rays[r].second.b[i];
        for (int f = 0; f < 2; ++f) {
          if (av > 0) v[f] = ExtReal::max(v[f], in.ray_a[f][r].scaled(av));
          if (bv > 0) v[f] = ExtReal::max(v[f], in.ray_b[f][r].scaled(bv));
        }
      }
    }
    profile.s_pos[i] = v[0];
    profile.s_zero[i] = v[1];
    const bool positive_here = v[0].is_positive() || v[1].is_positive();

    // Swap pool: best scale sitting dead at this node, plus the plain
    // resurrection at scale 1. Large-x ray rides carry vanishing per-member
    // scales and never feed the pool.
    ExtReal pool = dead ? one : zero;
    for (size_t s = 0; s < n_singles; ++s)
      if (gens.singles[s].second[i] == 0) pool = ExtReal::max(pool, in.single[1][s]);
    for (size_t r = 0; r < n_rays; ++r)
      if (gens.rays[r].second.a[i] == 0) pool = ExtReal::max(pool, in.ray_a[1][r]);
    if (positive_here && member_dead_here) pool = inf;  // mixing

    RideState& st = state[i];
    st = in;
    for (size_t s = 0; s < n_singles; ++s) {
      const Rat& gv = gens.singles[s].second[i];
      if (gv > 0) {
        for (int f = 0; f < 2; ++f)
          st.single[f][s] = ExtReal::max(in.single[f][s], v[f].over(gv));
      } else {
        st.single[1][s] = ExtReal::max(in.single[1][s], pool);
      }
    }
    for (size_t r = 0; r < n_rays; ++r) {
      const Rat& av = gens.rays[r].second.a[i];
      const Rat& bv = gens.rays[r].second.b[i];
      if (av > 0) {
        for (int f = 0; f < 2; ++f) {
          st.ray_a[f][r] = ExtReal::max(in.ray_a[f][r], v[f].over(av));
          // x near 0 members get arbitrarily cheap here when only the
          // direction part vanishes... nothing to fold: that is the bv == 0
          // case below for the direction coefficient.
        }
      } else {
        st.ray_a[1][r] = ExtReal::max(in.ray_a[1][r], pool);
        if (bv > 0) {
          // x near 0 members are positive here at vanishing cost.
          for (int f = 0; f < 2; ++f)
            if (v[f].is_positive()) st.ray_a[f][r] = ExtReal::max(st.ray_a[f][r], inf);
        }
      }
      if (bv > 0) {
        for (int f = 0; f < 2; ++f)
          st.ray_b[f][r] = ExtReal::max(in.ray_b[f][r], v[f].over(bv));
      } else if (av > 0) {
        // Large-x members ride through with value av; anchoring here makes
        // the direction coefficient unbounded.
        for (int f = 0; f < 2; ++f)
          if (v[f].is_positive()) st.ray_b[f][r] = ExtReal::max(st.ray_b[f][r], inf);
      } else {
        // The whole family vanished: any positive pool scale (resurrection
        // included) re-enters at arbitrarily large x.
        if (pool.is_positive()) st.ray_b[1][r] = inf;
      }
    }
  }
  return profile;
}

struct NupbrVerdict {
  bool holds = true;
  int witness_time = -1;
  int witness_node = -1;
};

/// NUPBR_loc on a finite tree with positive atoms: L0-bounded level sets are
/// exactly uniformly bounded ones, so the verdict is finiteness of the
/// closure supremum at every node.
inline NupbrVerdict check_nupbr_loc(const EventTree& tree, const GeneratorSet& gens) {
  SupProfile s = closure_sup(tree, gens);
  for (int i = 0; i < tree.size(); ++i)
    if (s.bound(i).is_inf()) return {false, tree.node(i).time, i};
  return {};
}

struct DsvReport {
  bool holds = true;
  std::vector<ExtReal> statistic;  // per leaf ordinal
  std::vector<int> anchor_node;    // per leaf ordinal
  StoppingTime that;
};

/// Discrete left-liminf statistic at the dominating process' cemetery time:
/// the anchor is the node one step before T-hat (the horizon node when T-hat
/// is infinite, by the constant tail), and DSV holds iff the closure
/// supremum over X-hat stays finite at every anchor.
inline DsvReport dsv_statistic_sup(const EventTree& tree, const GeneratorSet& gens,
                                   const AdaptedProcess& xhat) {
  if (!is_valid_spd_witness(tree, gens, xhat))
    throw std::invalid_argument("xhat is not a dominating witness of this instance");

  SupProfile s = closure_sup(tree, gens);
  DsvReport out;
  out.that = hitting_time(tree, xhat);
  for (int w = 0; w < tree.leaf_count(); ++w) {
    const auto& th = out.that.at[static_cast<size_t>(w)];
    int anchor_time = th.has_value() ? *th - 1 : tree.horizon();
    if (anchor_time < 0) throw std::logic_error("T-hat = 0 cannot occur with X-hat(root) = 1");
    int d = tree.path_node(w, anchor_time);
    const Rat& xv = xhat[static_cast<size_t>(d)];
    if (xv == 0) throw std::logic_error("anchor node with vanished X-hat");
    out.anchor_node.push_back(d);
    out.statistic.push_back(s.bound(d).over(xv));
    if (out.statistic.back().is_inf()) out.holds = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eventually periodic sequences and the liminf product inequality

struct EventuallyPeriodicSeq {
  std::vector<Rat> prefix;
  std::vector<Rat> cycle;   // nonempty unless diverges
  bool diverges = false;    // tends to infinity; prefix/cycle are bookkeeping

  Rat at(size_t n) const {
    if (n < prefix.size()) return prefix[n];
    return cycle.at((n - prefix.size()) % cycle.size());
  }
  ExtReal liminf() const {
    if (diverges) return ExtReal::infinity();
    if (cycle.empty()) throw std::invalid_argument("cycle must be nonempty");
    Rat m = cycle.front();
    for (const Rat& v : cycle) m = std::min(m, v);
    return ExtReal(m);
  }
};

struct LiminfProductReport {
  ExtReal lim_x, lim_y;
  std::optional<ExtReal> lim_xy;  // absent when out of lemma
  bool inequality_holds = false;
  bool out_of_lemma = false;
};

/// liminf x * liminf y <= liminf (xy) over the synchronized cycle; the
/// infinity-times-zero configuration falls outside the lemma's cases and is
/// reported as such (the product can then take any value).
inline LiminfProductReport liminf_product_check(const EventuallyPeriodicSeq& x,
                                                const EventuallyPeriodicSeq& y) {
  LiminfProductReport out;
  out.lim_x = x.liminf();
  out.lim_y = y.liminf();
  bool zero_x = out.lim_x.is_zero(), zero_y = out.lim_y.is_zero();
  if ((x.diverges && zero_y) || (y.diverges && zero_x)) {
    out.out_of_lemma = true;
    return out;
  }
  if (x.diverges || y.diverges) {
    out.lim_xy = ExtReal::infinity();
    out.inequality_holds = true;  // inf * positive <= inf
    return out;
  }
  size_t start = std::max(x.prefix.size(), y.prefix.size());
  size_t period = std::lcm(x.cycle.size(), y.cycle.size());
  Rat m = x.at(start) * y.at(start);
  for (size_t n = start; n < start + period; ++n) m = std::min(m, x.at(n) * y.at(n));
  out.lim_xy = ExtReal(m);
  out.inequality_holds = ExtReal(out.lim_x.value() * out.lim_y.value()) <= *out.lim_xy;
  return out;
}

}  // namespace deftree
