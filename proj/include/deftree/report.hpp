#pragma once

#include "deftree/io.hpp"

#include <string>
#include <utility>
#include <vector>

namespace deftree {

/// Deterministic run record; the human and machine renderings carry the same
/// exact strings (rationals are never rounded, decimals are advisory only).
struct RunReport {
  std::string command;
  std::string digest;
  int exit_status = 0;
  double seconds = 0;
  std::vector<std::pair<std::string, std::string>> fields;

  void set(std::string key, std::string value) { fields.push_back({std::move(key), std::move(value)}); }

  std::string render_human() const {
    std::string out = "== " + command + " ==\n";
    if (!digest.empty()) out += "instance digest: " + digest + "\n";
    for (const auto& [k, v] : fields) out += k + ": " + v + "\n";
    out += "exit status: " + std::to_string(exit_status) + "\n";
    return out;
  }

  std::string render_machine() const {
    Json j = Json::object();
    j["command"] = command;
    if (!digest.empty()) j["digest"] = digest;
    Json f = Json::object();
    for (const auto& [k, v] : fields) f[k] = v;
    j["fields"] = std::move(f);
    j["exit_status"] = exit_status;
    j["seconds"] = seconds;
    return j.dump(2) + "\n";
  }
};

}  // namespace deftree
