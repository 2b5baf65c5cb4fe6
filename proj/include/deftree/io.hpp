#pragma once

#include "deftree/gsm.hpp"
#include "deftree/process_set.hpp"
#include "deftree/tree.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deftree {

using Json = nlohmann::ordered_json;

/// A full problem instance: tree, generators, and optional raw (possibly
/// non-adapted) processes for the gsm checks.
struct Instance {
  std::string name;
  EventTree tree;
  GeneratorSet gens;
  std::vector<std::pair<std::string, RawProcess>> raws;
};

namespace detail {

inline AdaptedProcess parse_node_values(const EventTree& tree, const Json& obj,
                                        const std::string& what) {
  AdaptedProcess x(static_cast<size_t>(tree.size()), Rat(0));
  std::vector<char> seen(static_cast<size_t>(tree.size()), 0);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    int i = tree.index_of(it.key());
    x[static_cast<size_t>(i)] = parse_rat(it.value().get<std::string>());
    seen[static_cast<size_t>(i)] = 1;
  }
  for (int i = 0; i < tree.size(); ++i)
    if (!seen[static_cast<size_t>(i)])
      throw std::invalid_argument(what + ": missing value for node '" + tree.node(i).id + "'");
  return x;
}

inline Json node_values_json(const EventTree& tree, const AdaptedProcess& x) {
  Json obj = Json::object();
  for (int i = 0; i < tree.size(); ++i)
    obj[tree.node(i).id] = format_rat(x[static_cast<size_t>(i)]);
  return obj;
}

}  // namespace detail

inline Instance parse_instance(const Json& j) {
  Instance inst;
  inst.name = j.value("name", std::string());
  if (!j.contains("horizon") || !j.contains("nodes"))
    throw std::invalid_argument("instance needs 'horizon' and 'nodes'");
  std::vector<NodeSpec> specs;
  for (const auto& nj : j.at("nodes")) {
    NodeSpec s;
    s.id = nj.at("id").get<std::string>();
    s.time = nj.at("time").get<int>();
    if (nj.contains("parent") && !nj.at("parent").is_null())
      s.parent = nj.at("parent").get<std::string>();
    s.prob = nj.contains("prob") ? parse_rat(nj.at("prob").get<std::string>()) : Rat(1);
    specs.push_back(std::move(s));
  }
  inst.tree = EventTree::build(specs, j.at("horizon").get<int>());

  if (j.contains("generators"))
    for (auto it = j.at("generators").begin(); it != j.at("generators").end(); ++it)
      inst.gens.singles.push_back(
          {it.key(), detail::parse_node_values(inst.tree, it.value(), "generator " + it.key())});
  if (j.contains("rays"))
    for (auto it = j.at("rays").begin(); it != j.at("rays").end(); ++it) {
      const Json& rj = it.value();
      Ray r{detail::parse_node_values(inst.tree, rj.at("A"), "ray " + it.key() + ".A"),
            detail::parse_node_values(inst.tree, rj.at("B"), "ray " + it.key() + ".B")};
      inst.gens.rays.push_back({it.key(), std::move(r)});
    }
  if (!inst.gens.singles.empty() || !inst.gens.rays.empty())
    validate_generator_set(inst.tree, inst.gens);

  if (j.contains("raw"))
    for (auto it = j.at("raw").begin(); it != j.at("raw").end(); ++it) {
      RawProcess z;
      z.by_leaf.resize(static_cast<size_t>(inst.tree.leaf_count()));
      std::vector<char> seen(static_cast<size_t>(inst.tree.leaf_count()), 0);
      for (auto lt = it.value().begin(); lt != it.value().end(); ++lt) {
        int node = inst.tree.index_of(lt.key());
        int w = -1;
        for (int k = 0; k < inst.tree.leaf_count(); ++k)
          if (inst.tree.leaves()[static_cast<size_t>(k)] == node) w = k;
        if (w < 0) throw std::invalid_argument("raw process keys must be leaves");
        std::vector<Rat> path;
        for (const auto& v : lt.value()) path.push_back(parse_rat(v.get<std::string>()));
        z.by_leaf[static_cast<size_t>(w)] = std::move(path);
        seen[static_cast<size_t>(w)] = 1;
      }
      for (char s : seen)
        if (!s) throw std::invalid_argument("raw process '" + it.key() + "' misses a leaf");
      require_raw(inst.tree, z);
      inst.raws.push_back({it.key(), std::move(z)});
    }
  return inst;
}

inline Instance parse_instance_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("instance parse error: ") + e.what());
  }
  return parse_instance(j);
}

inline Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open instance file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance_text(ss.str());
}

inline Json instance_json(const Instance& inst) {
  Json j = Json::object();
  if (!inst.name.empty()) j["name"] = inst.name;
  j["horizon"] = inst.tree.horizon();
  Json nodes = Json::array();
  for (int i = 0; i < inst.tree.size(); ++i) {
    const auto& n = inst.tree.node(i);
    Json nj = Json::object();
    nj["id"] = n.id;
    nj["time"] = n.time;
    if (n.parent < 0) nj["parent"] = nullptr;
    else nj["parent"] = inst.tree.node(n.parent).id;
    nj["prob"] = format_rat(n.prob);
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);
  if (!inst.gens.singles.empty()) {
    Json g = Json::object();
    for (const auto& [name, x] : inst.gens.singles)
      g[name] = detail::node_values_json(inst.tree, x);
    j["generators"] = std::move(g);
  }
  if (!inst.gens.rays.empty()) {
    Json g = Json::object();
    for (const auto& [name, r] : inst.gens.rays) {
      Json rj = Json::object();
      rj["A"] = detail::node_values_json(inst.tree, r.a);
      rj["B"] = detail::node_values_json(inst.tree, r.b);
      g[name] = std::move(rj);
    }
    j["rays"] = std::move(g);
  }
  if (!inst.raws.empty()) {
    Json g = Json::object();
    for (const auto& [name, z] : inst.raws) {
      Json zj = Json::object();
      for (int w = 0; w < inst.tree.leaf_count(); ++w) {
        Json path = Json::array();
        for (const Rat& v : z.by_leaf[static_cast<size_t>(w)]) path.push_back(format_rat(v));
        zj[inst.tree.node(inst.tree.leaves()[static_cast<size_t>(w)]).id] = std::move(path);
      }
      g[name] = std::move(zj);
    }
    j["raw"] = std::move(g);
  }
  return j;
}

inline std::string serialize_instance(const Instance& inst) { return instance_json(inst).dump(2); }

// Deflator files: node -> "p/q" plus margin and mode.
inline Json deflator_json(const EventTree& tree, const AdaptedProcess& y, const Rat& delta,
                          const std::string& mode) {
  Json j = Json::object();
  j["delta"] = format_rat(delta);
  j["mode"] = mode;
  j["Y"] = detail::node_values_json(tree, y);
  return j;
}

inline std::pair<AdaptedProcess, Rat> parse_deflator(const EventTree& tree, const Json& j) {
  return {detail::parse_node_values(tree, j.at("Y"), "deflator"),
          parse_rat(j.at("delta").get<std::string>())};
}

/// FNV-1a digest of the canonical serialization; reports pin instances by it.
inline std::string instance_digest(const Instance& inst) {
  std::string s = serialize_instance(inst);
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace deftree
