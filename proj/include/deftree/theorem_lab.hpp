#pragma once

#include "deftree/boundedness.hpp"
#include "deftree/deflator.hpp"
#include "deftree/io.hpp"
#include "deftree/process_set.hpp"
#include "deftree/tree.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deftree {

// ---------------------------------------------------------------------------
// Counterexample gallery

inline std::vector<std::string> gallery_names() {
  return {"binomial", "ex1", "xquestion", "ladder", "revival", "sec3", "ex3-N (N >= 1)"};
}

/// The built-in regression instances, value for value as documented.
inline Instance gallery(const std::string& name) {
  auto timeline = [](int horizon) {
    std::vector<NodeSpec> specs;
    for (int t = 0; t <= horizon; ++t) {
      NodeSpec s;
      s.id = "n" + std::to_string(t);
      s.time = t;
      if (t > 0) s.parent = "n" + std::to_string(t - 1);
      s.prob = 1;
      specs.push_back(std::move(s));
    }
    return specs;
  };
  auto values = [](std::initializer_list<int> num, std::initializer_list<int> den = {}) {
    AdaptedProcess x;
    auto d = den.begin();
    for (int n : num) x.push_back(den.size() ? Rat(n, *d++) : Rat(n));
    return x;
  };

  Instance inst;
  inst.name = name;
  if (name == "binomial") {
    inst.tree = EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                                  {"u", 1, "n0", Rat(1, 2)},
                                  {"d", 1, "n0", Rat(1, 2)}},
                                 1);
    inst.gens.singles.push_back({"cash", {Rat(1), Rat(1), Rat(1)}});
    inst.gens.singles.push_back({"stock", {Rat(1), Rat(2), Rat(1, 2)}});
  } else if (name == "ex1") {
    inst.tree = EventTree::build(timeline(2), 2);
    inst.gens.rays.push_back({"r", Ray{values({1, 1, 0}), values({0, 1, 0})}});
  } else if (name == "xquestion") {
    inst.tree = EventTree::build(timeline(2), 2);
    inst.gens.singles.push_back({"X", values({1, 0, 1})});
  } else if (name == "ladder") {
    inst.tree = EventTree::build(timeline(3), 3);
    inst.gens.singles.push_back({"X1", values({1, 1, 0, 0})});
    inst.gens.singles.push_back({"X2", values({1, 1, 1, 0})});
  } else if (name == "revival") {
    inst.tree = EventTree::build(timeline(3), 3);
    inst.gens.rays.push_back({"r", Ray{values({1, 1, 0, 0}), values({0, 0, 0, 1})}});
  } else if (name == "sec3") {
    // Two outcomes revealed only at the final step: the filtration is trivial
    // through t = 2, which is what makes the projection average both paths.
    inst.tree = EventTree::build({{"n0", 0, std::nullopt, Rat(1)},
                                  {"n1", 1, "n0", Rat(1)},
                                  {"n2", 2, "n1", Rat(1)},
                                  {"a", 3, "n2", Rat(1, 2)},
                                  {"b", 3, "n2", Rat(1, 2)}},
                                 3);
    inst.gens.singles.push_back({"1", AdaptedProcess(static_cast<size_t>(inst.tree.size()), Rat(1))});
    RawProcess z, w;
    z.by_leaf = {{Rat(5), Rat(6), Rat(9), Rat(9)}, {Rat(5), Rat(2), Rat(1), Rat(1)}};
    w.by_leaf = {{Rat(5), Rat(9), Rat(6), Rat(6)}, {Rat(5), Rat(1), Rat(2), Rat(2)}};
    inst.raws.push_back({"Z", std::move(z)});
    inst.raws.push_back({"W", std::move(w)});
  } else if (name.rfind("ex3-", 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(name.substr(4));
    } catch (const std::exception&) {
      n = 0;
    }
    if (n < 1) throw std::invalid_argument("ex3-N needs an integer N >= 1");
    inst.tree = EventTree::build(timeline(n + 1), n + 1);
    AdaptedProcess xhat, xtilde;
    for (int t = 0; t <= n + 1; ++t) {
      xhat.push_back(t <= n ? Rat(1) : Rat(0));
      xtilde.push_back(t <= n ? Rat(t + 1) : Rat(0));
    }
    inst.gens.singles.push_back({"Xhat", std::move(xhat)});
    inst.gens.singles.push_back({"Xtilde", std::move(xtilde)});
  } else {
    std::string msg = "unknown gallery instance '" + name + "'; available:";
    for (const auto& g : gallery_names()) msg += " " + g;
    throw std::invalid_argument(msg);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Corollary equivalence matrix

/// Verdicts of the four dual statements with the implication diagram
/// (1) <=> (2) => (3) => (4), all four equivalent under absorbing. A tripped
/// consistency flag is a bug certificate, not a mathematical finding.
struct EquivalenceReport {
  bool s1 = false;  // strictly positive SMD exists
  bool s2 = false;  // SMD with {Y=0} subset of {X=0} exists
  bool s3 = false;  // NUPBR_loc
  bool s4 = false;  // SMD strictly positive before T-tilde exists
  bool absorbing = false;
  bool extension_ok = false;  // Y + I_{Y=0} re-verified as a strict SMD
  bool consistent = false;
  std::string inconsistency;
  Rat delta1, delta2, delta4;
  NupbrVerdict nupbr;
};

inline EquivalenceReport check_theorem_equivalences(const EventTree& tree,
                                                    const GeneratorSet& gens) {
  EquivalenceReport out;
  SynthResult r1 = synth_deflator_nupbr(tree, gens);
  SynthResult r2 = synth_deflator_support(tree, gens);
  SynthResult r4 = synth_deflator_before_ttilde(tree, gens);
  out.nupbr = check_nupbr_loc(tree, gens);
  out.s1 = r1.exists;
  out.s2 = r2.exists;
  out.s3 = out.nupbr.holds;
  out.s4 = r4.exists;
  out.absorbing = is_absorbing(tree, gens);
  out.delta1 = r1.delta;
  out.delta2 = r2.delta;
  out.delta4 = r4.delta;

  out.extension_ok = true;
  if (out.s2) {
    AdaptedProcess extended = r2.deflator.y;
    for (auto& v : extended)
      if (v == 0) v = 1;
    out.extension_ok = verify_smd(tree, gens, extended, SupportMode::strict_everywhere).ok();
  }

  out.consistent = true;
  auto trip = [&](const std::string& what) {
    out.consistent = false;
    if (!out.inconsistency.empty()) out.inconsistency += "; ";
    out.inconsistency += what;
  };
  if (out.s1 != out.s2) trip("(1) <=> (2) violated");
  if (out.s2 && !out.s3) trip("(2) => (3) violated");
  if (out.s3 && !out.s4) trip("(3) => (4) violated");
  if (!out.extension_ok) trip("Y + I_{Y=0} extension failed re-verification");
  if (out.absorbing && !(out.s1 == out.s2 && out.s2 == out.s3 && out.s3 == out.s4))
    trip("equivalence under absorbing violated");
  return out;
}

// ---------------------------------------------------------------------------
// Characterization of T-tilde

struct CharTimeReport {
  bool hypotheses_hold = true;
  std::string failed_hypothesis;  // first failing (s,t) pair with reason
  bool equal = false;             // tau = T-tilde pathwise
  bool consistent = true;         // hypotheses imply equality
};

/// Checks the proposition's two hypotheses over all step pairs with
/// P[tau in (s,t]] > 0 -- existence of a pre-s-positive element under the
/// conditional measure (per node: some member positive) and vanishing of the
/// whole set from t on -- then compares tau with T-tilde pathwise.
inline CharTimeReport verify_char_time(const EventTree& tree, const GeneratorSet& gens,
                                       const std::vector<std::optional<int>>& tau) {
  if (tau.size() != static_cast<size_t>(tree.leaf_count()))
    throw std::invalid_argument("tau must carry one value per leaf");
  for (const auto& v : tau)
    if (v.has_value() && *v <= 0)
      throw std::invalid_argument("tau must be a positive random time");

  auto live = detail::live_nodes(tree, gens);
  CharTimeReport out;
  auto fail = [&](int s, int t, const std::string& why) {
    if (out.hypotheses_hold) {
      out.hypotheses_hold = false;
      out.failed_hypothesis = "(s,t)=(" + std::to_string(s) + "," +
                              (t < 0 ? std::string("inf") : std::to_string(t)) + "): " + why;
    }
  };

  for (int s = 0; s <= tree.horizon(); ++s) {
    for (int t = s + 1; t <= tree.horizon() + 1; ++t) {
      bool t_inf = t > tree.horizon();
      std::vector<int> event;  // leaves with tau in (s, t] (t possibly inf)
      for (int w = 0; w < tree.leaf_count(); ++w) {
        const auto& v = tau[static_cast<size_t>(w)];
        bool in = v.has_value() ? (*v > s && (t_inf || *v <= t)) : t_inf;
        if (in) event.push_back(w);
      }
      if (event.empty()) continue;
      for (int w : event) {
        for (int u = 0; u <= s && out.hypotheses_hold; ++u)
          if (!live[static_cast<size_t>(tree.path_node(w, u))])
            fail(s, t_inf ? -1 : t, "no element positive on [0,s] at node '" +
                                        tree.node(tree.path_node(w, u)).id + "'");
        if (!t_inf) {
          for (int u = t; u <= tree.horizon() && out.hypotheses_hold; ++u)
            if (live[static_cast<size_t>(tree.path_node(w, u))])
              fail(s, t, "some element positive on [t,inf) at node '" +
                             tree.node(tree.path_node(w, u)).id + "'");
        }
      }
    }
  }

  StoppingTime t_tilde = cemetery_structure(tree, gens).t_tilde;
  out.equal = true;
  for (int w = 0; w < tree.leaf_count(); ++w)
    if (t_tilde.at[static_cast<size_t>(w)] != tau[static_cast<size_t>(w)]) out.equal = false;
  out.consistent = !out.hypotheses_hold || out.equal;
  return out;
}

// ---------------------------------------------------------------------------
// Enlargement stability

struct EnlargeReport {
  NupbrVerdict base;
  NupbrVerdict refined;
  bool preserved = false;        // base holds => refined holds
  bool decomposition_ok = false; // sampled refined elements split per cell
};

namespace detail {

/// Lemma-style decomposition: restrict every switch event of a refined recipe
/// to the base atoms whose cell-k copy participates; the result is a base
/// closure element agreeing with the refined one on cell k.
inline RecipePtr restrict_recipe_to_cell(const EventTree& base, const EventTree& refined,
                                         const std::vector<int>& cell, const Recipe& recipe) {
  switch (recipe.kind) {
    case Recipe::Kind::single:
      return Recipe::make_single(recipe.name);
    case Recipe::Kind::ray:
      return Recipe::make_ray(recipe.name, recipe.x);
    case Recipe::Kind::cc:
      return Recipe::make_cc(recipe.alpha,
                             restrict_recipe_to_cell(base, refined, cell, *recipe.left),
                             restrict_recipe_to_cell(base, refined, cell, *recipe.right));
    case Recipe::Kind::sw: {
      std::vector<char> in_event(static_cast<size_t>(refined.size()), 0);
      for (int a : recipe.atoms) in_event[static_cast<size_t>(a)] = 1;
      std::vector<int> atoms;
      for (int n : base.at_time(recipe.t)) {
        // Any cell leaf under the base atom locates its refined copy.
        int copy = -1;
        for (int w : cell)
          if (base.path_node(w, recipe.t) == n) {
            copy = refined.path_node(w, recipe.t);
            break;
          }
        if (copy >= 0 && in_event[static_cast<size_t>(copy)]) atoms.push_back(n);
      }
      return Recipe::make_sw(recipe.t, std::move(atoms),
                             restrict_recipe_to_cell(base, refined, cell, *recipe.left),
                             restrict_recipe_to_cell(base, refined, cell, *recipe.right));
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

/// Refines the tree, lifts the generators, recomputes the NUPBR_loc verdict,
/// and replays the decomposition of sampled refined closure elements into
/// base elements cell by cell.
inline EnlargeReport check_enlargement_stability(const EventTree& tree, const GeneratorSet& gens,
                                                 const std::vector<std::vector<int>>& cells,
                                                 const std::vector<int>& reveal_time,
                                                 uint64_t seed = 7) {
  EnlargeReport out;
  out.base = check_nupbr_loc(tree, gens);
  Refinement ref = refine_by_partition(tree, cells, reveal_time);

  GeneratorSet lifted;
  for (const auto& [name, g] : gens.singles)
    lifted.singles.push_back({name, lift_process(ref.tree, ref.map, g)});
  for (const auto& [name, r] : gens.rays)
    lifted.rays.push_back({name, Ray{lift_process(ref.tree, ref.map, r.a),
                                     lift_process(ref.tree, ref.map, r.b)}});
  out.refined = check_nupbr_loc(ref.tree, lifted);
  out.preserved = !out.base.holds || out.refined.holds;

  out.decomposition_ok = true;
  auto samples = sample_closure(ref.tree, lifted, 2, seed, {Rat(0), Rat(1), Rat(2)});
  for (const auto& element : samples.elements) {
    for (const auto& cell : cells) {
      if (cell.empty()) continue;
      RecipePtr restricted =
          detail::restrict_recipe_to_cell(tree, ref.tree, cell, *element.recipe);
      AdaptedProcess base_value = eval_recipe(tree, gens, *restricted);
      for (int w : cell) {
        for (int t = 0; t <= tree.horizon(); ++t) {
          if (element.value[static_cast<size_t>(ref.tree.path_node(w, t))] !=
              base_value[static_cast<size_t>(tree.path_node(w, t))]) {
            out.decomposition_ok = false;
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded random instances for the duality sweeps

struct FuzzOptions {
  bool force_absorbing = false;
  int max_horizon = 4;
  int max_branches = 3;
  int max_singles = 3;
  bool allow_ray = true;
};

inline Instance make_random_instance(uint64_t seed, const FuzzOptions& opt = {}) {
  SplitMix64 rng(seed);
  Instance inst;
  inst.name = "fuzz-" + std::to_string(seed);

  int horizon = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(opt.max_horizon)));
  std::vector<NodeSpec> specs;
  int counter = 0;
  struct Pending {
    std::string id;
    int time;
  };
  std::vector<Pending> frontier{{"n0", 0}};
  specs.push_back({"n0", 0, std::nullopt, Rat(1)});
  while (!frontier.empty()) {
    Pending cur = frontier.back();
    frontier.pop_back();
    if (cur.time == horizon) continue;
    int kids = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(opt.max_branches)));
    std::vector<Rat> weights;
    Rat total = 0;
    for (int k = 0; k < kids; ++k) {
      weights.push_back(Rat(1 + static_cast<long>(rng.below(3))));
      total += weights.back();
    }
    for (int k = 0; k < kids; ++k) {
      std::string id = "n" + std::to_string(++counter);
      specs.push_back({id, cur.time + 1, cur.id, weights[static_cast<size_t>(k)] / total});
      frontier.push_back({id, cur.time + 1});
    }
  }
  inst.tree = EventTree::build(specs, horizon);

  static const Rat kPool[] = {Rat(0), Rat(0), Rat(1, 2), Rat(1), Rat(1), Rat(2), Rat(3), Rat(1, 3)};
  auto draw_value = [&] { return kPool[rng.below(std::size(kPool))]; };
  auto absorb = [&](AdaptedProcess& x) {
    for (int i = 0; i < inst.tree.size(); ++i) {
      int p = inst.tree.node(i).parent;
      if (p >= 0 && x[static_cast<size_t>(p)] == 0) x[static_cast<size_t>(i)] = 0;
    }
  };

  int n_singles = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(opt.max_singles)));
  for (int g = 0; g < n_singles; ++g) {
    AdaptedProcess x(static_cast<size_t>(inst.tree.size()));
    for (int i = 0; i < inst.tree.size(); ++i)
      x[static_cast<size_t>(i)] = inst.tree.node(i).time == 0 ? Rat(1) : draw_value();
    if (opt.force_absorbing) absorb(x);
    inst.gens.singles.push_back({"g" + std::to_string(g), std::move(x)});
  }
  if (opt.allow_ray && rng.coin()) {
    AdaptedProcess a(static_cast<size_t>(inst.tree.size()));
    AdaptedProcess b(static_cast<size_t>(inst.tree.size()));
    for (int i = 0; i < inst.tree.size(); ++i) {
      bool root = inst.tree.node(i).time == 0;
      a[static_cast<size_t>(i)] = root ? Rat(1) : draw_value();
      b[static_cast<size_t>(i)] = root ? Rat(0) : draw_value();
    }
    if (opt.force_absorbing) {
      absorb(a);
      // Joint zeros must absorb jointly for the whole family to absorb.
      for (int i = 0; i < inst.tree.size(); ++i) {
        int p = inst.tree.node(i).parent;
        if (p >= 0 && a[static_cast<size_t>(p)] == 0 && b[static_cast<size_t>(p)] == 0)
          b[static_cast<size_t>(i)] = 0;
      }
    }
    inst.gens.rays.push_back({"r", Ray{std::move(a), std::move(b)}});
  }
  validate_generator_set(inst.tree, inst.gens);
  return inst;
}

}  // namespace deftree
