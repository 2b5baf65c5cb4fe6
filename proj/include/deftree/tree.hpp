#pragma once

#include "deftree/rational.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deftree {

/// One value per tree node, nonnegative, constant-tail after the horizon.
using AdaptedProcess = std::vector<Rat>;

/// Per-leaf stopping value; nullopt is the infinity marker (never a sentinel).
struct StoppingTime {
  std::vector<std::optional<int>> at;  // indexed by leaf ordinal

  friend bool operator==(const StoppingTime& a, const StoppingTime& b) { return a.at == b.at; }
};

struct NodeSpec {
  std::string id;
  int time = 0;
  std::optional<std::string> parent;
  Rat prob = 1;
};

/// Finite filtered probability space as a rooted event tree.
///
/// Time is the unit-step grid 0..horizon; the atoms of F_t are the time-t
/// nodes. Instance trees have a single root (F_0 trivial); refined trees
/// produced by filtration enlargement may carry several time-0 nodes whose
/// weights sum to one.
class EventTree {
 public:
  struct Node {
    std::string id;
    int time = 0;
    int parent = -1;            // -1 for time-0 nodes
    Rat prob;                   // conditional branch probability (unconditional at time 0)
    Rat path_prob;              // unconditional probability of the node atom
    std::vector<int> children;
    std::vector<int> leaves;    // leaf ordinals below this node, ascending
  };

  static EventTree build(const std::vector<NodeSpec>& specs, int horizon) {
    return assemble(specs, horizon, /*require_single_root=*/true);
  }
  /// Used by refinement, where the enlarged F_0 need not be trivial.
  static EventTree build_multi_root(const std::vector<NodeSpec>& specs, int horizon) {
    return assemble(specs, horizon, /*require_single_root=*/false);
  }

  int horizon() const { return horizon_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int i) const { return nodes_.at(static_cast<size_t>(i)); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& at_time(int t) const { return by_time_.at(static_cast<size_t>(t)); }
  const std::vector<int>& leaves() const { return leaf_nodes_; }
  int leaf_count() const { return static_cast<int>(leaf_nodes_.size()); }
  /// Node on the path of leaf ordinal `w` at time t.
  int path_node(int w, int t) const { return leaf_paths_.at(static_cast<size_t>(w)).at(static_cast<size_t>(t)); }
  int index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::invalid_argument("unknown node id '" + id + "'");
    return it->second;
  }
  bool has_node(const std::string& id) const { return index_.count(id) > 0; }

  void require_process(const AdaptedProcess& x) const {
    if (static_cast<int>(x.size()) != size())
      throw std::invalid_argument("process must carry one value per node");
    for (int i = 0; i < size(); ++i)
      if (x[static_cast<size_t>(i)] < 0)
        throw std::invalid_argument("negative value at node '" + node(i).id + "'");
  }

 private:
  static EventTree assemble(const std::vector<NodeSpec>& specs, int horizon, bool require_single_root);

  std::vector<Node> nodes_;  // sorted by (time, input order)
  int horizon_ = 0;
  std::vector<std::vector<int>> by_time_;
  std::vector<int> leaf_nodes_;
  std::vector<std::vector<int>> leaf_paths_;
  std::map<std::string, int> index_;
};

inline EventTree EventTree::assemble(const std::vector<NodeSpec>& specs, int horizon,
                                     bool require_single_root) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  EventTree t;
  t.horizon_ = horizon;

  // Deterministic node ordering: by time, then input order.
  std::vector<size_t> order;
  for (int time = 0; time <= horizon; ++time)
    for (size_t i = 0; i < specs.size(); ++i)
      if (specs[i].time == time) order.push_back(i);
  if (order.size() != specs.size())
    throw std::invalid_argument("node time outside 0..horizon");

  std::map<std::string, int> index;
  for (size_t pos = 0; pos < order.size(); ++pos) {
    const NodeSpec& s = specs[order[pos]];
    if (index.count(s.id)) throw std::invalid_argument("duplicate node id '" + s.id + "'");
    index[s.id] = static_cast<int>(pos);
    Node n;
    n.id = s.id;
    n.time = s.time;
    n.prob = s.prob;
    if (n.prob <= 0)
      throw std::invalid_argument("branch probability must be positive at node '" + s.id + "'");
    t.nodes_.push_back(std::move(n));
  }

  int roots = 0;
  for (size_t pos = 0; pos < order.size(); ++pos) {
    const NodeSpec& s = specs[order[pos]];
    Node& n = t.nodes_[pos];
    if (!s.parent) {
      if (n.time != 0)
        throw std::invalid_argument("orphan node '" + s.id + "' at time " + std::to_string(n.time));
      ++roots;
      continue;
    }
    auto it = index.find(*s.parent);
    if (it == index.end())
      throw std::invalid_argument("orphan node '" + s.id + "': parent '" + *s.parent + "' not found");
    n.parent = it->second;
    const Node& p = t.nodes_[static_cast<size_t>(n.parent)];
    if (n.time != p.time + 1)
      throw std::invalid_argument("time gap != 1 on edge '" + p.id + "' -> '" + s.id + "'");
    t.nodes_[static_cast<size_t>(n.parent)].children.push_back(static_cast<int>(pos));
  }
  if (roots == 0) throw std::invalid_argument("no root node at time 0");
  if (require_single_root && roots != 1)
    throw std::invalid_argument("expected exactly one root at time 0 (F_0 trivial)");

  // Branch probabilities: children sum to 1 at every node, roots sum to 1.
  Rat root_sum = 0;
  for (auto& n : t.nodes_)
    if (n.parent < 0) root_sum += n.prob;
  if (root_sum != 1)
    throw std::invalid_argument("probability sum " + format_rat(root_sum) + " != 1 at time 0");
  for (size_t i = 0; i < t.nodes_.size(); ++i) {
    const Node& n = t.nodes_[i];
    if (n.time == horizon) {
      if (!n.children.empty())
        throw std::invalid_argument("node '" + n.id + "' at the horizon has children");
      continue;
    }
    if (n.children.empty())
      throw std::invalid_argument("non-leaf node '" + n.id + "' has no children");
    Rat sum = 0;
    for (int c : n.children) sum += t.nodes_[static_cast<size_t>(c)].prob;
    if (sum != 1)
      throw std::invalid_argument("probability sum " + format_rat(sum) + " != 1 at node '" + n.id + "'");
  }

  t.by_time_.assign(static_cast<size_t>(horizon) + 1, {});
  for (size_t i = 0; i < t.nodes_.size(); ++i) {
    Node& n = t.nodes_[i];
    n.path_prob = n.parent < 0 ? n.prob : t.nodes_[static_cast<size_t>(n.parent)].path_prob * n.prob;
    t.by_time_[static_cast<size_t>(n.time)].push_back(static_cast<int>(i));
  }
  t.leaf_nodes_ = t.by_time_[static_cast<size_t>(horizon)];

  for (size_t w = 0; w < t.leaf_nodes_.size(); ++w) {
    std::vector<int> path(static_cast<size_t>(horizon) + 1, -1);
    int cur = t.leaf_nodes_[w];
    for (int time = horizon; time >= 0; --time) {
      path[static_cast<size_t>(time)] = cur;
      cur = t.nodes_[static_cast<size_t>(cur)].parent;
    }
    t.leaf_paths_.push_back(std::move(path));
    for (int node : t.leaf_paths_.back()) {
      t.nodes_[static_cast<size_t>(node)].leaves.push_back(static_cast<int>(w));
    }
  }
  t.index_ = std::move(index);
  return t;
}

/// Conditional expectation of time-t values down to time s, exact.
///
/// `values_at_t` is aligned with tree.at_time(t); the result is aligned with
/// tree.at_time(s). Weights are conditional path probabilities.
inline std::vector<Rat> conditional_expectation(const EventTree& tree,
                                                const std::vector<Rat>& values_at_t, int t, int s) {
  if (s > t) throw std::invalid_argument("conditional expectation needs s <= t");
  if (t > tree.horizon() || s < 0) throw std::invalid_argument("time outside 0..horizon");
  if (values_at_t.size() != tree.at_time(t).size())
    throw std::invalid_argument("values missing for a time-" + std::to_string(t) + " node");

  std::map<int, Rat> acc;  // time-s node -> weighted sum
  const auto& level = tree.at_time(t);
  for (size_t i = 0; i < level.size(); ++i) {
    int anc = level[i];
    while (tree.node(anc).time > s) anc = tree.node(anc).parent;
    acc[anc] += tree.node(level[i]).path_prob * values_at_t[i];
  }
  std::vector<Rat> out;
  for (int n : tree.at_time(s)) out.push_back(acc[n] / tree.node(n).path_prob);
  return out;
}

/// Convenience form taking a full adapted process instead of one time level.
inline std::vector<Rat> conditional_expectation_process(const EventTree& tree,
                                                        const AdaptedProcess& x, int t, int s) {
  std::vector<Rat> level;
  for (int n : tree.at_time(t)) level.push_back(x.at(static_cast<size_t>(n)));
  return conditional_expectation(tree, level, t, s);
}

struct SupermartingaleVerdict {
  bool ok = true;
  int witness_node = -1;  // first violating node in canonical order
  Rat lhs, rhs;           // one-step expectation vs current value
};

/// One-step supermartingale test: sum_c p(c|n) Y(c) <= Y(n) at every
/// non-terminal node; the one-step inequalities suffice in discrete time.
inline SupermartingaleVerdict is_supermartingale(const EventTree& tree, const AdaptedProcess& y) {
  tree.require_process(y);
  for (int i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (n.time == tree.horizon()) continue;
    Rat step = 0;
    for (int c : n.children) step += tree.node(c).prob * y[static_cast<size_t>(c)];
    if (step > y[static_cast<size_t>(i)]) {
      return {false, i, step, y[static_cast<size_t>(i)]};
    }
  }
  return {};
}

/// First time the path value hits zero; infinity marker if it never does
/// (the constant tail rules out a first zero after the horizon).
inline StoppingTime hitting_time(const EventTree& tree, const AdaptedProcess& x) {
  tree.require_process(x);
  StoppingTime st;
  st.at.resize(static_cast<size_t>(tree.leaf_count()));
  for (int w = 0; w < tree.leaf_count(); ++w) {
    st.at[static_cast<size_t>(w)] = std::nullopt;
    for (int t = 0; t <= tree.horizon(); ++t) {
      if (x[static_cast<size_t>(tree.path_node(w, t))] == 0) {
        st.at[static_cast<size_t>(w)] = t;
        break;
      }
    }
  }
  return st;
}

/// Measurability of a per-leaf time map: {tau <= t} must be a union of
/// time-t atoms for every t.
inline bool is_stopping_time(const EventTree& tree, const StoppingTime& st) {
  if (st.at.size() != static_cast<size_t>(tree.leaf_count())) return false;
  for (int t = 0; t <= tree.horizon(); ++t) {
    for (int n : tree.at_time(t)) {
      bool first = true, in = false;
      for (int w : tree.node(n).leaves) {
        const auto& v = st.at[static_cast<size_t>(w)];
        bool le = v.has_value() && *v <= t;
        if (first) {
          in = le;
          first = false;
        } else if (in != le) {
          return false;
        }
      }
    }
  }
  return true;
}

/// Copies-and-weights record tying a refined tree to its base tree.
struct NodeMap {
  std::vector<int> to_base;  // refined node index -> base node index
  std::vector<Rat> weight;   // P(copy atom) / P(base atom)

  static NodeMap identity(const EventTree& tree) {
    NodeMap m;
    m.to_base.resize(static_cast<size_t>(tree.size()));
    m.weight.assign(static_cast<size_t>(tree.size()), Rat(1));
    for (int i = 0; i < tree.size(); ++i) m.to_base[static_cast<size_t>(i)] = i;
    return m;
  }

  /// Composition: map from a twice-refined tree through `inner` then this.
  NodeMap after(const NodeMap& outer) const {
    NodeMap m;
    m.to_base.resize(outer.to_base.size());
    m.weight.resize(outer.to_base.size());
    for (size_t i = 0; i < outer.to_base.size(); ++i) {
      int mid = outer.to_base[i];
      m.to_base[i] = to_base.at(static_cast<size_t>(mid));
      m.weight[i] = outer.weight[i] * weight.at(static_cast<size_t>(mid));
    }
    return m;
  }
};

struct Refinement {
  EventTree tree;
  NodeMap map;
};

/// Filtration enlargement by a finite leaf partition with per-cell reveal
/// times. From a cell's reveal time onward, node atoms are intersected with
/// the cell; branch probabilities are renormalized by conditional cell
/// probabilities. Atoms of the refined time-t sigma-algebra are exactly the
/// sets U_k (V_k ∩ A_k) over revealed cells plus one block of unrevealed mass.
inline Refinement refine_by_partition(const EventTree& tree,
                                      const std::vector<std::vector<int>>& cells,
                                      const std::vector<int>& reveal_time) {
  if (cells.size() != reveal_time.size())
    throw std::invalid_argument("one reveal time per cell required");
  std::vector<int> cell_of(static_cast<size_t>(tree.leaf_count()), -1);
  for (size_t k = 0; k < cells.size(); ++k) {
    if (reveal_time[k] < 0 || reveal_time[k] > tree.horizon())
      throw std::invalid_argument("reveal time outside 0..horizon");
    for (int w : cells[k]) {
      if (w < 0 || w >= tree.leaf_count()) throw std::invalid_argument("cell names unknown leaf");
      if (cell_of[static_cast<size_t>(w)] != -1) throw std::invalid_argument("overlapping cells");
      cell_of[static_cast<size_t>(w)] = static_cast<int>(k);
    }
  }
  for (int w = 0; w < tree.leaf_count(); ++w)
    if (cell_of[static_cast<size_t>(w)] == -1)
      throw std::invalid_argument("cells do not cover every leaf");

  // Block key of leaf w at time t: its cell if revealed, else the lumped
  // unrevealed block (-1).
  auto block_key = [&](int w, int t) {
    int k = cell_of[static_cast<size_t>(w)];
    return reveal_time[static_cast<size_t>(k)] <= t ? k : -1;
  };

  struct Copy {
    int base;
    int key;
    std::vector<int> leaves;
  };
  std::vector<Copy> copies;
  std::map<std::pair<int, int>, int> copy_index;  // (base, key) -> copy position
  for (int t = 0; t <= tree.horizon(); ++t) {
    for (int n : tree.at_time(t)) {
      // Group the node's leaves by block, cells in ascending order, lumped
      // block last; ordering is deterministic.
      std::map<int, std::vector<int>> groups;
      for (int w : tree.node(n).leaves) groups[block_key(w, t)].push_back(w);
      auto emit = [&](int key, std::vector<int> leaves) {
        copy_index[{n, key}] = static_cast<int>(copies.size());
        copies.push_back({n, key, std::move(leaves)});
      };
      for (auto& [key, leaves] : groups)
        if (key >= 0) emit(key, std::move(leaves));
      if (groups.count(-1)) emit(-1, std::move(groups[-1]));
    }
  }

  auto leaf_prob_sum = [&](const std::vector<int>& leaves) {
    Rat s = 0;
    for (int w : leaves) s += tree.node(tree.leaves()[static_cast<size_t>(w)]).path_prob;
    return s;
  };

  std::vector<NodeSpec> specs;
  std::vector<Rat> copy_prob;
  for (const Copy& c : copies) {
    const auto& base = tree.node(c.base);
    NodeSpec s;
    s.time = base.time;
    // Copies covering the whole base atom keep the base id, so the trivial
    // partition reproduces the input tree verbatim.
    bool full = c.leaves.size() == base.leaves.size();
    s.id = full ? base.id
                : base.id + "#" + (c.key >= 0 ? std::to_string(c.key) : std::string("*"));
    Rat p_here = leaf_prob_sum(c.leaves);
    copy_prob.push_back(p_here);
    if (base.parent < 0) {
      s.prob = p_here;
    } else {
      int pkey = c.key >= 0 && reveal_time[static_cast<size_t>(c.key)] <= base.time - 1 ? c.key : -1;
      const Copy& pc = copies[static_cast<size_t>(copy_index.at({base.parent, pkey}))];
      const auto& pbase = tree.node(base.parent);
      bool pfull = pc.leaves.size() == pbase.leaves.size();
      s.parent = pfull ? pbase.id
                       : pbase.id + "#" + (pkey >= 0 ? std::to_string(pkey) : std::string("*"));
      s.prob = p_here / leaf_prob_sum(pc.leaves);
    }
    specs.push_back(std::move(s));
  }

  Refinement out{EventTree::build_multi_root(specs, tree.horizon()), {}};
  out.map.to_base.resize(copies.size());
  out.map.weight.resize(copies.size());
  for (size_t i = 0; i < copies.size(); ++i) {
    int refined = out.tree.index_of(specs[i].id);
    out.map.to_base[static_cast<size_t>(refined)] = copies[i].base;
    out.map.weight[static_cast<size_t>(refined)] =
        copy_prob[i] / tree.node(copies[i].base).path_prob;
  }
  return out;
}

/// Lifts a base-tree process to the refined tree (value copied to all copies).
inline AdaptedProcess lift_process(const EventTree& refined, const NodeMap& map,
                                   const AdaptedProcess& x) {
  AdaptedProcess out(static_cast<size_t>(refined.size()));
  for (int i = 0; i < refined.size(); ++i)
    out[static_cast<size_t>(i)] = x.at(static_cast<size_t>(map.to_base[static_cast<size_t>(i)]));
  return out;
}

/// Optional projection back onto the base tree: per base node, the
/// NodeMap-weighted average over its copies.
inline AdaptedProcess optional_projection(const EventTree& base, const EventTree& refined,
                                          const NodeMap& map, const AdaptedProcess& y_plus) {
  refined.require_process(y_plus);
  if (map.to_base.size() != static_cast<size_t>(refined.size()))
    throw std::invalid_argument("node map inconsistent with refined tree");
  AdaptedProcess out(static_cast<size_t>(base.size()), Rat(0));
  std::vector<Rat> mass(static_cast<size_t>(base.size()), Rat(0));
  for (int i = 0; i < refined.size(); ++i) {
    int b = map.to_base[static_cast<size_t>(i)];
    if (b < 0 || b >= base.size())
      throw std::invalid_argument("node map inconsistent with base tree");
    out[static_cast<size_t>(b)] += map.weight[static_cast<size_t>(i)] * y_plus[static_cast<size_t>(i)];
    mass[static_cast<size_t>(b)] += map.weight[static_cast<size_t>(i)];
  }
  for (int b = 0; b < base.size(); ++b)
    if (mass[static_cast<size_t>(b)] != 1)
      throw std::invalid_argument("node map weights at '" + base.node(b).id + "' do not sum to 1");
  return out;
}

}  // namespace deftree
