#pragma once

#include "deftree/rational.hpp"
#include "deftree/tree.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deftree {

/// One-parameter generator family {A + x*B : x >= 0}.
struct Ray {
  AdaptedProcess a;  // member at x = 0, a(root) = 1
  AdaptedProcess b;  // direction, b(root) = 0
};

struct GeneratorSet {
  std::vector<std::pair<std::string, AdaptedProcess>> singles;
  std::vector<std::pair<std::string, Ray>> rays;
};

inline void validate_generator_set(const EventTree& tree, const GeneratorSet& gens) {
  if (gens.singles.empty() && gens.rays.empty())
    throw std::invalid_argument("at least one generator required");
  auto check_root = [&](const AdaptedProcess& x, const Rat& want, const std::string& what) {
    for (int n : tree.at_time(0))
      if (x.at(static_cast<size_t>(n)) != want)
        throw std::invalid_argument(what + " must equal " + format_rat(want) + " at time 0");
  };
  for (const auto& [name, g] : gens.singles) {
    tree.require_process(g);
    check_root(g, 1, "generator '" + name + "'");
  }
  for (const auto& [name, r] : gens.rays) {
    tree.require_process(r.a);
    tree.require_process(r.b);
    check_root(r.a, 1, "ray '" + name + "' base");
    check_root(r.b, 0, "ray '" + name + "' direction");
  }
}

/// Representatives finitely certifying family-quantified properties: every
/// single, and A plus A+B per ray (supp(A+xB) = supp(A+B) for x > 0).
struct Representative {
  enum class Kind { single, ray_base, ray_sum };
  Kind kind;
  std::string name;
  AdaptedProcess values;
};

inline std::vector<Representative> representatives(const EventTree& tree, const GeneratorSet& gens) {
  std::vector<Representative> out;
  for (const auto& [name, g] : gens.singles)
    out.push_back({Representative::Kind::single, name, g});
  for (const auto& [name, r] : gens.rays) {
    out.push_back({Representative::Kind::ray_base, name + ".A", r.a});
    AdaptedProcess sum(r.a);
    for (int i = 0; i < tree.size(); ++i) sum[static_cast<size_t>(i)] += r.b[static_cast<size_t>(i)];
    out.push_back({Representative::Kind::ray_sum, name + ".A+B", std::move(sum)});
  }
  return out;
}

/// Pointwise (1-alpha) X + alpha X'.
inline AdaptedProcess convex_combine(const EventTree& tree, const AdaptedProcess& x,
                                     const AdaptedProcess& xp, const Rat& alpha) {
  if (alpha < 0 || alpha > 1) throw std::invalid_argument("alpha outside [0,1]");
  tree.require_process(x);
  tree.require_process(xp);
  AdaptedProcess out(static_cast<size_t>(tree.size()));
  for (int i = 0; i < tree.size(); ++i)
    out[static_cast<size_t>(i)] =
        (1 - alpha) * x[static_cast<size_t>(i)] + alpha * xp[static_cast<size_t>(i)];
  return out;
}

struct AdmissibilityError : std::invalid_argument {
  int node;
  AdmissibilityError(const std::string& msg, int node_) : std::invalid_argument(msg), node(node_) {}
};

/// Switching operator I_{A^c} X + I_A (X_{t^.} / X'_t) X'_{t v .} with the
/// 0/0 = 1 convention: on A before t the result is X; from t on it is
/// (X_t/X'_t) X', where a both-zero junction hands over X' verbatim.
/// Admissibility on A: X'_t = 0 forces X_t = 0.
inline AdaptedProcess switch_process(const EventTree& tree, const AdaptedProcess& x,
                                     const AdaptedProcess& xp, int t,
                                     const std::vector<int>& atoms) {
  tree.require_process(x);
  tree.require_process(xp);
  if (t < 0 || t > tree.horizon()) throw std::invalid_argument("switch time outside 0..horizon");
  for (int a : atoms)
    if (tree.node(a).time != t)
      throw std::invalid_argument("switch event must be a union of time-t atoms");

  AdaptedProcess out = x;
  for (int a : atoms) {
    const Rat& xa = x[static_cast<size_t>(a)];
    const Rat& xpa = xp[static_cast<size_t>(a)];
    if (xpa == 0 && xa != 0)
      throw AdmissibilityError("switch not admissible: X'=0 < X at node '" + tree.node(a).id + "'",
                               a);
    Rat scale = xpa == 0 ? Rat(1) : xa / xpa;  // 0/0 = 1
    // Overwrite the subtree of the atom (times >= t).
    std::vector<int> stack{a};
    while (!stack.empty()) {
      int m = stack.back();
      stack.pop_back();
      out[static_cast<size_t>(m)] = scale * xp[static_cast<size_t>(m)];
      for (int c : tree.node(m).children) stack.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closure recipes and bounded-depth sampling

struct Recipe;
using RecipePtr = std::shared_ptr<const Recipe>;

struct Recipe {
  enum class Kind { single, ray, cc, sw };
  Kind kind;
  std::string name;        // single / ray generator reference
  Rat x;                   // ray parameter
  Rat alpha;               // cc weight
  int t = 0;               // sw time
  std::vector<int> atoms;  // sw event, union of time-t atoms
  RecipePtr left, right;

  static RecipePtr make_single(std::string name) {
    auto r = std::make_shared<Recipe>();
    r->kind = Kind::single;
    r->name = std::move(name);
    return r;
  }
  static RecipePtr make_ray(std::string name, Rat x) {
    auto r = std::make_shared<Recipe>();
    r->kind = Kind::ray;
    r->name = std::move(name);
    r->x = std::move(x);
    return r;
  }
  static RecipePtr make_cc(Rat alpha, RecipePtr l, RecipePtr rr) {
    auto r = std::make_shared<Recipe>();
    r->kind = Kind::cc;
    r->alpha = std::move(alpha);
    r->left = std::move(l);
    r->right = std::move(rr);
    return r;
  }
  static RecipePtr make_sw(int t, std::vector<int> atoms, RecipePtr l, RecipePtr rr) {
    auto r = std::make_shared<Recipe>();
    r->kind = Kind::sw;
    r->t = t;
    r->atoms = std::move(atoms);
    r->left = std::move(l);
    r->right = std::move(rr);
    return r;
  }

  int depth() const {
    if (kind == Kind::single || kind == Kind::ray) return 0;
    return 1 + std::max(left->depth(), right->depth());
  }
};

inline const AdaptedProcess& find_single(const GeneratorSet& gens, const std::string& name) {
  for (const auto& [n, g] : gens.singles)
    if (n == name) return g;
  throw std::invalid_argument("unknown generator '" + name + "'");
}

inline const Ray& find_ray(const GeneratorSet& gens, const std::string& name) {
  for (const auto& [n, r] : gens.rays)
    if (n == name) return r;
  throw std::invalid_argument("unknown ray '" + name + "'");
}

/// Evaluates a recipe; throws AdmissibilityError on an invalid switch.
inline AdaptedProcess eval_recipe(const EventTree& tree, const GeneratorSet& gens,
                                  const Recipe& recipe) {
  switch (recipe.kind) {
    case Recipe::Kind::single:
      return find_single(gens, recipe.name);
    case Recipe::Kind::ray: {
      if (recipe.x < 0) throw std::invalid_argument("ray parameter must be nonnegative");
      const Ray& r = find_ray(gens, recipe.name);
      AdaptedProcess out(r.a);
      for (int i = 0; i < tree.size(); ++i)
        out[static_cast<size_t>(i)] += recipe.x * r.b[static_cast<size_t>(i)];
      return out;
    }
    case Recipe::Kind::cc:
      return convex_combine(tree, eval_recipe(tree, gens, *recipe.left),
                            eval_recipe(tree, gens, *recipe.right), recipe.alpha);
    case Recipe::Kind::sw:
      return switch_process(tree, eval_recipe(tree, gens, *recipe.left),
                            eval_recipe(tree, gens, *recipe.right), recipe.t, recipe.atoms);
  }
  throw std::logic_error("unreachable");
}

struct ClosureElement {
  RecipePtr recipe;
  AdaptedProcess value;
};

/// Deterministic seeded generator (splitmix64); the sampling contract is
/// reproducibility from (seed, instance) alone.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }
  bool coin() { return (next() & 1) != 0; }

 private:
  uint64_t state_;
};

struct SampleResult {
  std::vector<ClosureElement> elements;
  int discarded = 0;       // inadmissible draws redrawn
  bool retry_cap_hit = false;
};

/// Bounded-depth sample of the fork-convex closure. Depth 0 is exactly the
/// generator representatives at the requested ray values; deeper levels apply
/// seeded cc/sw draws, discarding inadmissible switches.
inline SampleResult sample_closure(const EventTree& tree, const GeneratorSet& gens, int depth,
                                   uint64_t seed, const std::vector<Rat>& ray_values) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  validate_generator_set(tree, gens);
  SampleResult out;
  for (const auto& [name, g] : gens.singles)
    out.elements.push_back({Recipe::make_single(name), g});
  for (const auto& [name, r] : gens.rays) {
    for (const Rat& x : ray_values) {
      auto rec = Recipe::make_ray(name, x);
      out.elements.push_back({rec, eval_recipe(tree, gens, *rec)});
    }
  }
  if (out.elements.empty()) throw std::invalid_argument("no depth-0 representatives");

  static const Rat kAlphas[] = {Rat(0), Rat(1), Rat(1, 2), Rat(1, 3), Rat(2, 3), Rat(1, 4), Rat(3, 4)};
  SplitMix64 rng(seed);
  const size_t budget = std::max<size_t>(8, 2 * out.elements.size());
  for (int level = 1; level <= depth; ++level) {
    size_t level_end = out.elements.size();
    for (size_t slot = 0; slot < budget; ++slot) {
      bool made = false;
      for (int attempt = 0; attempt < 64 && !made; ++attempt) {
        const ClosureElement& l = out.elements[rng.below(level_end)];
        const ClosureElement& r = out.elements[rng.below(level_end)];
        if (rng.coin()) {
          const Rat& alpha = kAlphas[rng.below(std::size(kAlphas))];
          auto rec = Recipe::make_cc(alpha, l.recipe, r.recipe);
          out.elements.push_back({rec, convex_combine(tree, l.value, r.value, alpha)});
          made = true;
        } else {
          int t = static_cast<int>(rng.below(static_cast<uint64_t>(tree.horizon()) + 1));
          const auto& level_nodes = tree.at_time(t);
          std::vector<int> atoms;
          for (int n : level_nodes)
            if (rng.coin()) atoms.push_back(n);
          if (atoms.empty()) atoms = level_nodes;
          try {
            auto value = switch_process(tree, l.value, r.value, t, atoms);
            out.elements.push_back(
                {Recipe::make_sw(t, std::move(atoms), l.recipe, r.recipe), std::move(value)});
            made = true;
          } catch (const AdmissibilityError&) {
            ++out.discarded;
          }
        }
      }
      if (!made) out.retry_cap_hit = true;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification and cemetery structure

enum class SetClass { SP, SPD, SPP };

inline std::string to_string(SetClass c) {
  switch (c) {
    case SetClass::SP: return "SP";
    case SetClass::SPD: return "SPD";
    case SetClass::SPP: return "SPP";
  }
  return "?";
}

struct Classification {
  SetClass cls;
  AdaptedProcess witness;  // X-hat for SPD, X-bar for SPP
};

/// Candidate dominating process: uniform convex mixture of all singles and of
/// A+B per ray. SPP if it is strictly positive; SPD if its zero set is
/// contained in every representative's; SP otherwise.
inline Classification classify(const EventTree& tree, const GeneratorSet& gens) {
  validate_generator_set(tree, gens);
  std::vector<const AdaptedProcess*> components;
  std::vector<AdaptedProcess> owned;
  for (const auto& [name, g] : gens.singles) components.push_back(&g);
  for (const auto& [name, r] : gens.rays) {
    AdaptedProcess sum(r.a);
    for (int i = 0; i < tree.size(); ++i) sum[static_cast<size_t>(i)] += r.b[static_cast<size_t>(i)];
    owned.push_back(std::move(sum));
  }
  for (const auto& s : owned) components.push_back(&s);

  Rat w(1, static_cast<long>(components.size()));
  AdaptedProcess xhat(static_cast<size_t>(tree.size()), Rat(0));
  for (const auto* c : components)
    for (int i = 0; i < tree.size(); ++i)
      xhat[static_cast<size_t>(i)] += w * (*c)[static_cast<size_t>(i)];

  bool strictly_positive = true;
  for (const Rat& v : xhat)
    if (v == 0) strictly_positive = false;
  if (strictly_positive) return {SetClass::SPP, std::move(xhat)};

  for (const auto& rep : representatives(tree, gens)) {
    for (int i = 0; i < tree.size(); ++i) {
      if (xhat[static_cast<size_t>(i)] == 0 && rep.values[static_cast<size_t>(i)] != 0)
        return {SetClass::SP, std::move(xhat)};
    }
  }
  return {SetClass::SPD, std::move(xhat)};
}

/// Valid dominating witnesses: the classify mixture, or any representative
/// (a set member) whose zero set is contained in every representative's.
/// DSV genuinely depends on this choice, so the checkers accept any of them.
inline bool is_valid_spd_witness(const EventTree& tree, const GeneratorSet& gens,
                                 const AdaptedProcess& xhat) {
  Classification cls = classify(tree, gens);
  if (cls.cls == SetClass::SP) return false;
  if (xhat == cls.witness) return true;
  auto reps = representatives(tree, gens);
  bool is_member = false;
  for (const auto& rep : reps)
    if (rep.values == xhat) is_member = true;
  if (!is_member) return false;
  for (const auto& rep : reps)
    for (int i = 0; i < tree.size(); ++i)
      if (xhat[static_cast<size_t>(i)] == 0 && rep.values[static_cast<size_t>(i)] != 0)
        return false;
  return true;
}

struct CemeteryStructure {
  StoppingTime t_tilde;  // pathwise max of all representative hitting times
  struct Rung {
    std::string name;    // running cc^{1/2} mixture description
    AdaptedProcess value;
    StoppingTime that;
  };
  std::vector<Rung> ladder;  // hitting times nondecreasing, last = t_tilde under absorbing
  bool absorbing = false;
};

/// Zero is absorbing for a process iff a zero value never revives downstream.
inline bool is_absorbing(const EventTree& tree, const AdaptedProcess& x) {
  for (int i = 0; i < tree.size(); ++i) {
    if (x[static_cast<size_t>(i)] != 0) continue;
    for (int c : tree.node(i).children)
      if (x[static_cast<size_t>(c)] != 0) return false;
  }
  return true;
}

inline bool is_absorbing(const EventTree& tree, const GeneratorSet& gens) {
  for (const auto& rep : representatives(tree, gens))
    if (!is_absorbing(tree, rep.values)) return false;
  return true;
}

namespace detail {
// Orders hitting-time vectors leafwise-lexicographically, infinity last.
inline bool stopping_before(const StoppingTime& a, const StoppingTime& b) {
  for (size_t w = 0; w < a.at.size(); ++w) {
    bool ai = !a.at[w].has_value(), bi = !b.at[w].has_value();
    if (ai != bi) return bi;
    if (!ai && *a.at[w] != *b.at[w]) return *a.at[w] < *b.at[w];
  }
  return false;
}
}  // namespace detail

/// Proposition-style cemetery data: T-tilde, and a ladder of closure elements
/// (running cc^{1/2} mixtures of the sorted representatives) whose hitting
/// times increase to it.
inline CemeteryStructure cemetery_structure(const EventTree& tree, const GeneratorSet& gens) {
  validate_generator_set(tree, gens);
  auto reps = representatives(tree, gens);
  std::vector<StoppingTime> taus;
  for (const auto& rep : reps) taus.push_back(hitting_time(tree, rep.values));

  CemeteryStructure out;
  out.t_tilde.at.resize(static_cast<size_t>(tree.leaf_count()));
  for (int w = 0; w < tree.leaf_count(); ++w) {
    std::optional<int> best = 0;
    for (const auto& tau : taus) {
      const auto& v = tau.at[static_cast<size_t>(w)];
      if (!v.has_value())
        best = std::nullopt;
      else if (best.has_value() && *v > *best)
        best = *v;
    }
    out.t_tilde.at[static_cast<size_t>(w)] = best;
  }

  std::vector<size_t> order(reps.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    return detail::stopping_before(taus[i], taus[j]);
  });

  AdaptedProcess mix;
  std::string name;
  for (size_t i : order) {
    if (mix.empty()) {
      mix = reps[i].values;
      name = reps[i].name;
    } else {
      mix = convex_combine(tree, mix, reps[i].values, Rat(1, 2));
      name = "cc(" + name + "," + reps[i].name + ")";
    }
    out.ladder.push_back({name, mix, hitting_time(tree, mix)});
  }
  out.absorbing = is_absorbing(tree, gens);
  return out;
}

}  // namespace deftree
