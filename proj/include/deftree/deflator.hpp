#pragma once

#include "deftree/boundedness.hpp"
#include "deftree/lp.hpp"
#include "deftree/process_set.hpp"
#include "deftree/tree.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deftree {

enum class SupportMode { strict_everywhere, strict_before_ttilde, strict_before_that_with_boundary };

inline std::string to_string(SupportMode m) {
  switch (m) {
    case SupportMode::strict_everywhere: return "strict-everywhere";
    case SupportMode::strict_before_ttilde: return "strict-before-Ttilde";
    case SupportMode::strict_before_that_with_boundary: return "strict-before-That-with-boundary";
  }
  return "?";
}

struct Deflator {
  AdaptedProcess y;
  Rat delta;  // certified positivity margin over the support region
  SupportMode mode = SupportMode::strict_everywhere;
  struct Step {
    std::string rep;
    int node;
    Rat lhs, rhs;  // one-step expectation vs current value, lhs <= rhs
  };
  std::vector<Step> certificate;
};

struct InfeasibilityCertificate {
  struct Item {
    std::string label;
    Rat weight;
  };
  std::vector<Item> items;  // nonnegative combination proving delta <= 0

  bool names(const std::string& label_part) const {
    for (const auto& it : items)
      if (it.label.find(label_part) != std::string::npos) return true;
    return false;
  }
};

struct SynthResult {
  bool exists = false;  // optimal delta > 0, decided exactly
  Deflator deflator;
  InfeasibilityCertificate certificate;  // meaningful when !exists
  LinearProgram lp;
  Rat delta;
};

namespace detail {

/// Constraint parts: each single, and each ray's base and direction
/// separately (the all-x family constraint splits by linearity).
struct ConstraintPart {
  std::string name;
  const AdaptedProcess* values;
};

inline std::vector<ConstraintPart> constraint_parts(const GeneratorSet& gens) {
  std::vector<ConstraintPart> out;
  for (const auto& [name, g] : gens.singles) out.push_back({name, &g});
  for (const auto& [name, r] : gens.rays) {
    out.push_back({name + ".A", &r.a});
    out.push_back({name + ".B", &r.b});
  }
  return out;
}

/// A node is live when some member of the set is positive there.
inline std::vector<char> live_nodes(const EventTree& tree, const GeneratorSet& gens) {
  std::vector<char> live(static_cast<size_t>(tree.size()), 0);
  for (const auto& part : constraint_parts(gens))
    for (int i = 0; i < tree.size(); ++i)
      if ((*part.values)[static_cast<size_t>(i)] > 0) live[static_cast<size_t>(i)] = 1;
  return live;
}

struct LpSpec {
  std::vector<char> has_var;       // node carries a Y variable
  std::vector<Rat> fixed;          // Y value where has_var is false
  std::vector<char> margin;        // Y(n) >= delta support rows
  std::vector<std::pair<int, Rat>> anchors;  // coef * Y(node) >= delta rows
};

inline SynthResult solve_smd_lp(const EventTree& tree, const GeneratorSet& gens, const LpSpec& spec,
                                SupportMode mode) {
  LinearProgram lp;
  size_t delta_var = lp.add_var("delta", Rat(1));
  std::vector<int> var_of(static_cast<size_t>(tree.size()), -1);
  for (int i = 0; i < tree.size(); ++i)
    if (spec.has_var[static_cast<size_t>(i)])
      var_of[static_cast<size_t>(i)] = static_cast<int>(lp.add_var("Y(" + tree.node(i).id + ")"));

  auto parts = constraint_parts(gens);
  for (int i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (n.time == tree.horizon()) continue;
    for (const auto& part : parts) {
      const AdaptedProcess& r = *part.values;
      // sum_c p(c|n) R(c) Y(c) <= R(n) Y(n), fixed values folded into rhs.
      std::vector<std::pair<size_t, Rat>> coeffs;
      Rat rhs = 0;
      bool nonempty = false;
      if (r[static_cast<size_t>(i)] != 0) {
        if (var_of[static_cast<size_t>(i)] >= 0)
          coeffs.push_back({static_cast<size_t>(var_of[static_cast<size_t>(i)]),
                            -r[static_cast<size_t>(i)]});
        else
          rhs += r[static_cast<size_t>(i)] * spec.fixed[static_cast<size_t>(i)];
        nonempty = true;
      }
      for (int c : n.children) {
        const Rat& rc = r[static_cast<size_t>(c)];
        if (rc == 0) continue;
        Rat w = tree.node(c).prob * rc;
        if (var_of[static_cast<size_t>(c)] >= 0)
          coeffs.push_back({static_cast<size_t>(var_of[static_cast<size_t>(c)]), w});
        else
          rhs -= w * spec.fixed[static_cast<size_t>(c)];
        nonempty = true;
      }
      if (!nonempty || (coeffs.empty() && rhs >= 0)) continue;
      auto& row = lp.add_row("smd:" + part.name + "@" + n.id, rhs);
      for (auto& [j, v] : coeffs) row.coeff[j] += v;
    }
  }
  for (int i = 0; i < tree.size(); ++i) {
    if (!spec.margin[static_cast<size_t>(i)]) continue;
    if (var_of[static_cast<size_t>(i)] >= 0) {
      auto& row = lp.add_row("support@" + tree.node(i).id, Rat(0));
      row.coeff[delta_var] = 1;
      row.coeff[static_cast<size_t>(var_of[static_cast<size_t>(i)])] = -1;
    } else {
      auto& row = lp.add_row("support@" + tree.node(i).id, spec.fixed[static_cast<size_t>(i)]);
      row.coeff[delta_var] = 1;
    }
  }
  for (const auto& [node, coef] : spec.anchors) {
    if (var_of[static_cast<size_t>(node)] >= 0) {
      auto& row = lp.add_row("anchor@" + tree.node(node).id, Rat(0));
      row.coeff[delta_var] = 1;
      row.coeff[static_cast<size_t>(var_of[static_cast<size_t>(node)])] = -coef;
    } else {
      auto& row = lp.add_row("anchor@" + tree.node(node).id,
                             coef * spec.fixed[static_cast<size_t>(node)]);
      row.coeff[delta_var] = 1;
    }
  }

  LpResult sol = solve_lp(lp);
  SynthResult out;
  out.lp = lp;
  out.delta = sol.value;
  out.exists = sol.value > 0;
  out.deflator.mode = mode;
  out.deflator.delta = sol.value;
  out.deflator.y.assign(static_cast<size_t>(tree.size()), Rat(0));
  for (int i = 0; i < tree.size(); ++i)
    out.deflator.y[static_cast<size_t>(i)] = var_of[static_cast<size_t>(i)] >= 0
        ? sol.x[static_cast<size_t>(var_of[static_cast<size_t>(i)])]
        : spec.fixed[static_cast<size_t>(i)];
  if (!out.exists) {
    for (size_t row : sol.certificate_rows)
      out.certificate.items.push_back({lp.rows[row].label, sol.dual[row]});
  } else {
    // Re-verify every one-step inequality by substitution; the list is the
    // deflator's certificate.
    for (int i = 0; i < tree.size(); ++i) {
      const auto& n = tree.node(i);
      if (n.time == tree.horizon()) continue;
      for (const auto& part : parts) {
        const AdaptedProcess& r = *part.values;
        Rat lhs = 0;
        for (int c : n.children)
          lhs += tree.node(c).prob * r[static_cast<size_t>(c)] * out.deflator.y[static_cast<size_t>(c)];
        Rat rhs = r[static_cast<size_t>(i)] * out.deflator.y[static_cast<size_t>(i)];
        if (lhs > rhs) throw std::logic_error("LP solution violates a one-step inequality");
        out.deflator.certificate.push_back({part.name, i, lhs, rhs});
      }
    }
  }
  return out;
}

/// Nodes strictly before a stopping time, per path; well defined on atoms.
inline std::vector<char> nodes_before(const EventTree& tree, const StoppingTime& st) {
  std::vector<char> pre(static_cast<size_t>(tree.size()), 0);
  for (int i = 0; i < tree.size(); ++i) {
    bool before = true;
    for (int w : tree.node(i).leaves) {
      const auto& v = st.at[static_cast<size_t>(w)];
      if (v.has_value() && *v <= tree.node(i).time) before = false;
    }
    pre[static_cast<size_t>(i)] = before ? 1 : 0;
  }
  return pre;
}

}  // namespace detail

/// Direct dual of the NUPBR_loc characterization: maximize the margin delta
/// of a deflator strictly positive on live nodes, fixed to one on fully dead
/// nodes. Existence of a strictly positive SMD is decided as delta > 0.
inline SynthResult synth_deflator_nupbr(const EventTree& tree, const GeneratorSet& gens) {
  validate_generator_set(tree, gens);
  detail::LpSpec spec;
  auto live = detail::live_nodes(tree, gens);
  spec.has_var.assign(static_cast<size_t>(tree.size()), 0);
  spec.fixed.assign(static_cast<size_t>(tree.size()), Rat(1));
  spec.margin = live;
  for (int i = 0; i < tree.size(); ++i) {
    bool root = tree.node(i).parent < 0;
    spec.has_var[static_cast<size_t>(i)] = (live[static_cast<size_t>(i)] && !root) ? 1 : 0;
    // Roots and dead nodes stay fixed at 1.
  }
  return detail::solve_smd_lp(tree, gens, spec, SupportMode::strict_everywhere);
}

/// Corollary form with the support condition {Y = 0} subset of {X = 0}:
/// identical constraint system, dead nodes reported at zero instead of one.
inline SynthResult synth_deflator_support(const EventTree& tree, const GeneratorSet& gens) {
  validate_generator_set(tree, gens);
  detail::LpSpec spec;
  auto live = detail::live_nodes(tree, gens);
  spec.has_var.assign(static_cast<size_t>(tree.size()), 0);
  spec.fixed.assign(static_cast<size_t>(tree.size()), Rat(0));
  spec.margin = live;
  for (int i = 0; i < tree.size(); ++i) {
    bool root = tree.node(i).parent < 0;
    spec.has_var[static_cast<size_t>(i)] = (live[static_cast<size_t>(i)] && !root) ? 1 : 0;
    if (root) spec.fixed[static_cast<size_t>(i)] = 1;
  }
  return detail::solve_smd_lp(tree, gens, spec, SupportMode::strict_everywhere);
}

/// Deflator required strictly positive only before T-tilde (the weakest
/// statement of the equivalence chain); Y is free elsewhere.
inline SynthResult synth_deflator_before_ttilde(const EventTree& tree, const GeneratorSet& gens) {
  validate_generator_set(tree, gens);
  auto cem = cemetery_structure(tree, gens);
  detail::LpSpec spec;
  spec.has_var.assign(static_cast<size_t>(tree.size()), 0);
  spec.fixed.assign(static_cast<size_t>(tree.size()), Rat(1));
  spec.margin = detail::nodes_before(tree, cem.t_tilde);
  for (int i = 0; i < tree.size(); ++i)
    spec.has_var[static_cast<size_t>(i)] = tree.node(i).parent < 0 ? 0 : 1;
  return detail::solve_smd_lp(tree, gens, spec, SupportMode::strict_before_ttilde);
}

/// Direct dual of the DSV characterization for the SPD witness xhat: Y lives
/// strictly before T-hat, vanishes from T-hat on (those supermartingale steps
/// hold automatically), carries the margin on its support and the boundary
/// margin xhat(d) Y(d) >= delta at every discrete left-liminf anchor.
inline SynthResult synth_deflator_dsv(const EventTree& tree, const GeneratorSet& gens,
                                      const AdaptedProcess& xhat) {
  if (!is_valid_spd_witness(tree, gens, xhat))
    throw std::invalid_argument("xhat is not a dominating witness of this instance");
  StoppingTime that = hitting_time(tree, xhat);
  auto pre = detail::nodes_before(tree, that);

  detail::LpSpec spec;
  spec.has_var.assign(static_cast<size_t>(tree.size()), 0);
  spec.fixed.assign(static_cast<size_t>(tree.size()), Rat(0));
  spec.margin = pre;
  for (int i = 0; i < tree.size(); ++i) {
    bool root = tree.node(i).parent < 0;
    spec.has_var[static_cast<size_t>(i)] = (pre[static_cast<size_t>(i)] && !root) ? 1 : 0;
    if (root) spec.fixed[static_cast<size_t>(i)] = 1;
  }
  std::map<int, Rat> anchors;
  for (int w = 0; w < tree.leaf_count(); ++w) {
    const auto& th = that.at[static_cast<size_t>(w)];
    int anchor_time = th.has_value() ? *th - 1 : tree.horizon();
    int d = tree.path_node(w, anchor_time);
    anchors[d] = xhat[static_cast<size_t>(d)];
  }
  for (const auto& [node, coef] : anchors) spec.anchors.push_back({node, coef});
  return detail::solve_smd_lp(tree, gens, spec, SupportMode::strict_before_that_with_boundary);
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyReport {
  struct Violation {
    std::string kind;  // "smd" | "sample" | "support" | "anchor"
    std::string what;
    int node = -1;
  };
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Exact verification of the supermartingale-deflator property for every
/// generator representative and every supplied closure sample, plus the
/// declared support condition (and, in DSV mode, the boundary condition).
inline VerifyReport verify_smd(const EventTree& tree, const GeneratorSet& gens,
                               const AdaptedProcess& y, SupportMode mode,
                               const std::vector<ClosureElement>& samples = {},
                               std::optional<Rat> delta = std::nullopt,
                               const AdaptedProcess* xhat = nullptr) {
  tree.require_process(y);
  VerifyReport report;
  auto parts = detail::constraint_parts(gens);
  for (int i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (n.time == tree.horizon()) continue;
    for (const auto& part : parts) {
      const AdaptedProcess& r = *part.values;
      Rat lhs = 0;
      for (int c : n.children)
        lhs += tree.node(c).prob * r[static_cast<size_t>(c)] * y[static_cast<size_t>(c)];
      Rat rhs = r[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
      if (lhs > rhs)
        report.violations.push_back({"smd",
                                     part.name + "@" + n.id + ": " + format_rat(lhs) + " > " +
                                         format_rat(rhs),
                                     i});
    }
  }
  for (size_t s = 0; s < samples.size(); ++s) {
    AdaptedProcess prod(static_cast<size_t>(tree.size()));
    for (int i = 0; i < tree.size(); ++i)
      prod[static_cast<size_t>(i)] =
          samples[s].value[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    auto verdict = is_supermartingale(tree, prod);
    if (!verdict.ok)
      report.violations.push_back(
          {"sample", "sample #" + std::to_string(s) + " fails at node '" +
                         tree.node(verdict.witness_node).id + "'",
           verdict.witness_node});
  }

  auto below = [&](const Rat& v) { return delta ? v < *delta : v <= 0; };
  if (mode == SupportMode::strict_everywhere) {
    for (int i = 0; i < tree.size(); ++i)
      if (below(y[static_cast<size_t>(i)]))
        report.violations.push_back({"support", "Y not positive at '" + tree.node(i).id + "'", i});
  } else if (mode == SupportMode::strict_before_ttilde) {
    auto cem = cemetery_structure(tree, gens);
    auto pre = detail::nodes_before(tree, cem.t_tilde);
    auto live = detail::live_nodes(tree, gens);
    for (int i = 0; i < tree.size(); ++i) {
      if (pre[static_cast<size_t>(i)] && below(y[static_cast<size_t>(i)]))
        report.violations.push_back(
            {"support", "Y not positive before T-tilde at '" + tree.node(i).id + "'", i});
      if (y[static_cast<size_t>(i)] == 0 && live[static_cast<size_t>(i)])
        report.violations.push_back(
            {"support", "{Y=0} escapes {X=0} at '" + tree.node(i).id + "'", i});
    }
  } else {
    if (xhat == nullptr) throw std::invalid_argument("DSV verification needs xhat");
    StoppingTime that = hitting_time(tree, *xhat);
    auto pre = detail::nodes_before(tree, that);
    for (int i = 0; i < tree.size(); ++i)
      if (pre[static_cast<size_t>(i)] && below(y[static_cast<size_t>(i)]))
        report.violations.push_back(
            {"support", "Y not positive before T-hat at '" + tree.node(i).id + "'", i});
    for (int w = 0; w < tree.leaf_count(); ++w) {
      const auto& th = that.at[static_cast<size_t>(w)];
      int anchor_time = th.has_value() ? *th - 1 : tree.horizon();
      int d = tree.path_node(w, anchor_time);
      Rat prod = (*xhat)[static_cast<size_t>(d)] * y[static_cast<size_t>(d)];
      if (below(prod))
        report.violations.push_back(
            {"anchor", "X-hat*Y below margin at anchor '" + tree.node(d).id + "'", d});
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Auxiliary set and the constructive pasting pipeline

/// The proof's auxiliary set: each generator discounted by xhat before T-hat
/// and frozen at its discrete left-liminf (the anchor ratio) from T-hat on,
/// together with the constant process 1 (the image of xhat itself).
inline GeneratorSet build_auxiliary_set(const EventTree& tree, const GeneratorSet& gens,
                                        const AdaptedProcess& xhat) {
  if (!is_valid_spd_witness(tree, gens, xhat))
    throw std::invalid_argument("xhat is not a dominating witness of this instance");
  StoppingTime that = hitting_time(tree, xhat);
  auto pre = detail::nodes_before(tree, that);

  auto transform = [&](const AdaptedProcess& x) {
    AdaptedProcess z(static_cast<size_t>(tree.size()));
    for (int i = 0; i < tree.size(); ++i) {
      if (pre[static_cast<size_t>(i)]) {
        z[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] / xhat[static_cast<size_t>(i)];
      } else {
        int p = tree.node(i).parent;
        if (p < 0) throw std::logic_error("root cannot lie at or after T-hat");
        z[static_cast<size_t>(i)] = z[static_cast<size_t>(p)];  // frozen anchor ratio
      }
    }
    return z;
  };

  GeneratorSet out;
  out.singles.push_back({"1", AdaptedProcess(static_cast<size_t>(tree.size()), Rat(1))});
  for (const auto& [name, g] : gens.singles) out.singles.push_back({name, transform(g)});
  for (const auto& [name, r] : gens.rays)
    out.rays.push_back({name, Ray{transform(r.a), transform(r.b)}});
  return out;
}

struct PipelineStage {
  std::string rung;
  StoppingTime that;            // rung cemetery time on the base tree
  std::vector<std::optional<int>> tau;  // per leaf, T-hat - 1
  AdaptedProcess rung_deflator;  // on the refined tree
  AdaptedProcess pasted;         // running product on the refined tree
  AdaptedProcess cutoff;         // pasted * indicator [0, tau]
  AdaptedProcess projected;      // optional projection on the base tree
};

struct PipelineResult {
  bool ok = false;
  std::string failure;  // which precondition failed, or internal stage
  Deflator deflator;
  EventTree refined;
  NodeMap map;  // refined -> base
  std::vector<PipelineStage> stages;
  VerifyReport verification;
};

/// Constructive proof replay: discretized rung times, minimal filtration
/// enlargement making them stopping times, per-rung stopped LPs, pasting,
/// cutoff, optional projection, and the monotone limit across the ladder.
inline PipelineResult pasting_pipeline(const EventTree& tree, const GeneratorSet& gens) {
  PipelineResult out;
  auto cem = cemetery_structure(tree, gens);
  auto nupbr = check_nupbr_loc(tree, gens);
  if (!cem.absorbing || !nupbr.holds) {
    out.failure = !cem.absorbing && !nupbr.holds ? "absorbing and NUPBR_loc fail"
                  : !cem.absorbing              ? "0 is not an absorbing state"
                                                : "NUPBR_loc fails";
    return out;
  }

  // Collapse rungs with identical hitting vectors; keep the most-mixed one.
  std::vector<CemeteryStructure::Rung> rungs;
  for (auto& rung : cem.ladder) {
    if (!rungs.empty() && rungs.back().that == rung.that) rungs.back() = rung;
    else rungs.push_back(rung);
  }

  // Enlarge: reveal each cell {T-hat^n = k} at time k-1 so tau^n = T-hat^n - 1
  // becomes a stopping time; cells with T-hat infinite need no look-ahead.
  EventTree refined = tree;
  NodeMap full_map = NodeMap::identity(tree);
  for (const auto& rung : rungs) {
    std::map<std::optional<int>, std::vector<int>> cells_by_value;
    for (int w = 0; w < tree.leaf_count(); ++w)
      cells_by_value[rung.that.at[static_cast<size_t>(w)]].push_back(w);
    std::vector<std::vector<int>> cells;
    std::vector<int> reveal;
    for (auto& [value, leaves] : cells_by_value) {
      cells.push_back(leaves);
      reveal.push_back(value.has_value() ? *value - 1 : tree.horizon());
    }
    Refinement step = refine_by_partition(refined, cells, reveal);
    full_map = full_map.after(step.map);
    refined = std::move(step.tree);
  }
  // Leaf ordinals survive refinement unchanged (one copy per leaf, in order).
  for (int w = 0; w < refined.leaf_count(); ++w)
    if (full_map.to_base[static_cast<size_t>(refined.leaves()[static_cast<size_t>(w)])] !=
        tree.leaves()[static_cast<size_t>(w)])
      throw std::logic_error("refinement permuted leaves");

  GeneratorSet lifted;
  for (const auto& [name, g] : gens.singles)
    lifted.singles.push_back({name, lift_process(refined, full_map, g)});
  for (const auto& [name, r] : gens.rays)
    lifted.rays.push_back({name, Ray{lift_process(refined, full_map, r.a),
                                     lift_process(refined, full_map, r.b)}});

  auto stop_value = [&](const AdaptedProcess& x, const std::vector<std::optional<int>>& tau,
                        int node) {
    const auto& nd = refined.node(node);
    int w = nd.leaves.front();
    int t = nd.time;
    if (tau[static_cast<size_t>(w)].has_value())
      t = std::min(t, *tau[static_cast<size_t>(w)]);
    return x[static_cast<size_t>(refined.path_node(w, t))];
  };

  std::vector<std::vector<std::optional<int>>> taus;
  std::vector<AdaptedProcess> rung_y;
  for (const auto& rung : rungs) {
    std::vector<std::optional<int>> tau(static_cast<size_t>(tree.leaf_count()));
    for (int w = 0; w < tree.leaf_count(); ++w) {
      const auto& th = rung.that.at[static_cast<size_t>(w)];
      tau[static_cast<size_t>(w)] = th.has_value() ? std::optional<int>(*th - 1) : std::nullopt;
    }
    StoppingTime tau_st{tau};
    if (!is_stopping_time(refined, tau_st))
      throw std::logic_error("tau^n is not a stopping time on the refined tree");

    GeneratorSet stopped;
    auto stop_process = [&](const AdaptedProcess& x) {
      AdaptedProcess s(static_cast<size_t>(refined.size()));
      for (int i = 0; i < refined.size(); ++i) s[static_cast<size_t>(i)] = stop_value(x, tau, i);
      return s;
    };
    for (const auto& [name, g] : lifted.singles) stopped.singles.push_back({name, stop_process(g)});
    for (const auto& [name, r] : lifted.rays)
      stopped.rays.push_back({name, Ray{stop_process(r.a), stop_process(r.b)}});

    SynthResult rung_lp = synth_deflator_nupbr(refined, stopped);
    if (!rung_lp.exists) {
      out.failure = "rung LP returned no positive margin for '" + rung.name + "'";
      return out;
    }
    taus.push_back(std::move(tau));
    rung_y.push_back(rung_lp.deflator.y);

    PipelineStage stage;
    stage.rung = rung.name;
    stage.that = rung.that;
    stage.tau = taus.back();
    stage.rung_deflator = rung_lp.deflator.y;
    out.stages.push_back(std::move(stage));
  }

  // Pasting, cutoff, projection; the finite ladder's monotone limit is the
  // last stage.
  AdaptedProcess prev_projected;
  for (size_t k = 0; k < rungs.size(); ++k) {
    AdaptedProcess pasted(static_cast<size_t>(refined.size()), Rat(1));
    for (int i = 0; i < refined.size(); ++i) {
      Rat prod = 1;
      for (size_t j = 0; j <= k; ++j) {
        Rat num = stop_value(rung_y[j], taus[j], i);
        Rat den = j == 0
            ? rung_y[0][static_cast<size_t>(refined.path_node(refined.node(i).leaves.front(), 0))]
            : stop_value(rung_y[j], taus[j - 1], i);
        if (den == 0) throw std::logic_error("rung deflator vanished before its rung time");
        prod *= num / den;
      }
      pasted[static_cast<size_t>(i)] = prod;
    }
    AdaptedProcess cutoff(static_cast<size_t>(refined.size()), Rat(0));
    for (int i = 0; i < refined.size(); ++i) {
      int w = refined.node(i).leaves.front();
      const auto& tv = taus[k][static_cast<size_t>(w)];
      bool inside = !tv.has_value() || refined.node(i).time <= *tv;
      if (inside) cutoff[static_cast<size_t>(i)] = pasted[static_cast<size_t>(i)];
    }
    AdaptedProcess projected = optional_projection(tree, refined, full_map, cutoff);
    if (!prev_projected.empty()) {
      for (int i = 0; i < tree.size(); ++i)
        if (projected[static_cast<size_t>(i)] < prev_projected[static_cast<size_t>(i)])
          throw std::logic_error("pasting stages are not monotone");
    }
    prev_projected = projected;
    out.stages[k].pasted = std::move(pasted);
    out.stages[k].cutoff = std::move(cutoff);
    out.stages[k].projected = std::move(projected);
  }

  out.refined = std::move(refined);
  out.map = std::move(full_map);
  out.deflator.y = out.stages.back().projected;
  out.deflator.mode = SupportMode::strict_before_ttilde;
  auto pre = detail::nodes_before(tree, cem.t_tilde);
  std::optional<Rat> margin;
  for (int i = 0; i < tree.size(); ++i)
    if (pre[static_cast<size_t>(i)]) {
      const Rat& v = out.deflator.y[static_cast<size_t>(i)];
      if (!margin || v < *margin) margin = v;
    }
  out.deflator.delta = margin.value_or(Rat(0));
  out.verification = verify_smd(tree, gens, out.deflator.y, SupportMode::strict_before_ttilde, {},
                                out.deflator.delta > 0 ? std::optional<Rat>(out.deflator.delta)
                                                       : std::nullopt);
  out.ok = out.verification.ok();
  if (!out.ok) out.failure = "verification reported violations";
  return out;
}

}  // namespace deftree
