#include "deftree/boundedness.hpp"
#include "deftree/deflator.hpp"
#include "deftree/gsm.hpp"
#include "deftree/io.hpp"
#include "deftree/process_set.hpp"
#include "deftree/report.hpp"
#include "deftree/theorem_lab.hpp"
#include "deftree/tree.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace deftree;

Instance resolve_instance(const std::string& ref) {
  if (ref.rfind("gallery:", 0) == 0) return gallery(ref.substr(8));
  return load_instance(ref);
}

Json recipe_json(const EventTree& tree, const Recipe& r) {
  Json j = Json::object();
  switch (r.kind) {
    case Recipe::Kind::single:
      j["kind"] = "single";
      j["name"] = r.name;
      break;
    case Recipe::Kind::ray:
      j["kind"] = "ray";
      j["name"] = r.name;
      j["x"] = format_rat(r.x);
      break;
    case Recipe::Kind::cc:
      j["kind"] = "cc";
      j["alpha"] = format_rat(r.alpha);
      j["left"] = recipe_json(tree, *r.left);
      j["right"] = recipe_json(tree, *r.right);
      break;
    case Recipe::Kind::sw: {
      j["kind"] = "sw";
      j["t"] = r.t;
      Json atoms = Json::array();
      for (int a : r.atoms) atoms.push_back(tree.node(a).id);
      j["atoms"] = std::move(atoms);
      j["left"] = recipe_json(tree, *r.left);
      j["right"] = recipe_json(tree, *r.right);
      break;
    }
  }
  return j;
}

std::string join_values(const EventTree& tree, const AdaptedProcess& x) {
  std::string out;
  for (int i = 0; i < tree.size(); ++i) {
    if (i) out += " ";
    out += tree.node(i).id + "=" + format_rat(x[static_cast<size_t>(i)]);
  }
  return out;
}

struct Cli {
  std::string format = "human";
  bool machine() const { return format == "machine"; }

  void finish(RunReport& report, std::chrono::steady_clock::time_point start) {
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (machine() ? report.render_machine() : report.render_human());
  }
};

int consistency_sweep(Cli& cli, const std::vector<Instance>& instances, uint64_t sample_seed) {
  auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.command = "verify-theorems";
  int trips = 0;
  for (const auto& inst : instances) {
    std::string tag = inst.name.empty() ? instance_digest(inst) : inst.name;
    std::vector<std::string> bad;

    EquivalenceReport eq = check_theorem_equivalences(inst.tree, inst.gens);
    if (!eq.consistent) bad.push_back("equivalence: " + eq.inconsistency);

    Classification cls = classify(inst.tree, inst.gens);
    if (cls.cls != SetClass::SP) {
      DsvReport dsv = dsv_statistic_sup(inst.tree, inst.gens, cls.witness);
      SynthResult dual = synth_deflator_dsv(inst.tree, inst.gens, cls.witness);
      if (dsv.holds != dual.exists) bad.push_back("DSV duality mismatch");
    }

    SupProfile sup = closure_sup(inst.tree, inst.gens);
    auto samples = sample_closure(inst.tree, inst.gens, 3, sample_seed, {Rat(0), Rat(1), Rat(3)});
    for (const auto& el : samples.elements)
      for (int i = 0; i < inst.tree.size(); ++i)
        if (ExtReal(el.value[static_cast<size_t>(i)]) > sup.bound(i))
          bad.push_back("DP soundness violated at node " + inst.tree.node(i).id);

    if (is_absorbing(inst.tree, inst.gens)) {
      PipelineResult pipe = pasting_pipeline(inst.tree, inst.gens);
      SynthResult direct = synth_deflator_nupbr(inst.tree, inst.gens);
      if (pipe.ok != direct.exists) bad.push_back("pipeline/LP existence mismatch");
    }

    auto cem = cemetery_structure(inst.tree, inst.gens);
    CharTimeReport chart = verify_char_time(inst.tree, inst.gens, cem.t_tilde.at);
    if (!chart.consistent) bad.push_back("T-tilde characterization inconsistent");
    if (cem.absorbing && !(chart.hypotheses_hold && chart.equal))
      bad.push_back("T-tilde is not the characterization's fixed point");

    std::vector<std::vector<int>> singletons;
    for (int w = 0; w < inst.tree.leaf_count(); ++w) singletons.push_back({w});
    EnlargeReport enl = check_enlargement_stability(
        inst.tree, inst.gens, singletons, std::vector<int>(singletons.size(), 0), sample_seed);
    if (!enl.preserved || enl.base.holds != enl.refined.holds)
      bad.push_back("enlargement changed the NUPBR_loc verdict");
    if (!enl.decomposition_ok) bad.push_back("refined closure element failed to decompose");

    if (!bad.empty()) {
      ++trips;
      std::string detail;
      for (const auto& b : bad) detail += (detail.empty() ? "" : "; ") + b;
      report.set("TRIP " + tag, detail);
      Json ce = instance_json(inst);
      Json verdicts = Json::object();
      verdicts["failures"] = detail;
      ce["verdicts"] = std::move(verdicts);
      std::string path = "counterexample-" + instance_digest(inst) + ".json";
      std::ofstream(path) << ce.dump(2);
      report.set("counterexample", path);
    }
  }
  report.set("instances", std::to_string(instances.size()));
  report.set("trips", std::to_string(trips));
  report.exit_status = trips == 0 ? 0 : 1;
  cli.finish(report, start);
  return report.exit_status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification engine for fork-convex sets of nonnegative processes on event trees"};
  app.require_subcommand(1);
  Cli cli;
  app.add_option("--format", cli.format, "Report format")->check(CLI::IsMember({"human", "machine"}));

  std::string instance_ref, mode = "nupbr", process_name, deflator_path, out_path;
  bool emit_lp = false, emit = false;
  int depth = 2, fuzz = 0;
  uint64_t seed = 1;
  std::string ray_values_csv = "0,1,2";

  auto add_instance_arg = [&](CLI::App* cmd) {
    cmd->add_option("instance", instance_ref, "Instance file path or gallery:NAME")->required();
  };

  auto* c_classify = app.add_subcommand("classify", "Classify the instance as SP/SPD/SPP");
  add_instance_arg(c_classify);

  auto* c_nupbr = app.add_subcommand("check-nupbr", "Decide NUPBR_loc by closure DP");
  add_instance_arg(c_nupbr);

  auto* c_dsv = app.add_subcommand("check-dsv", "Decide DSV for the classify witness");
  add_instance_arg(c_dsv);

  auto* c_synth = app.add_subcommand("synth-deflator", "Synthesize a deflator by exact LP");
  add_instance_arg(c_synth);
  c_synth->add_option("--mode", mode, "nupbr or dsv")->check(CLI::IsMember({"nupbr", "dsv"}));
  c_synth->add_flag("--emit-lp", emit_lp, "Dump the LP in plain-text equation format");
  c_synth->add_option("--out", out_path, "Write the deflator as JSON");

  auto* c_verify = app.add_subcommand("verify-smd", "Verify a deflator file against the instance");
  add_instance_arg(c_verify);
  c_verify->add_option("--deflator", deflator_path, "Deflator JSON file")->required();
  c_verify->add_option("--mode", mode, "nupbr (strict) or dsv (boundary)")
      ->check(CLI::IsMember({"nupbr", "dsv"}));
  c_verify->add_option("--depth", depth, "Closure sample depth");
  c_verify->add_option("--seed", seed, "Sample seed");

  auto* c_sample = app.add_subcommand("closure-sample", "Sample the fork-convex closure");
  add_instance_arg(c_sample);
  c_sample->add_option("--depth", depth, "Nesting depth");
  c_sample->add_option("--seed", seed, "Seed");
  c_sample->add_option("--ray-values", ray_values_csv, "Comma-separated ray parameters");
  c_sample->add_flag("--emit", emit, "Emit recipes as JSON");

  auto* c_pipe = app.add_subcommand("pasting-pipeline", "Run the constructive pasting pipeline");
  add_instance_arg(c_pipe);

  auto* c_gsm = app.add_subcommand("gsm-check", "Generalized supermartingale checks");
  add_instance_arg(c_gsm);
  c_gsm->add_option("--process", process_name, "Check only the named raw process");

  auto* c_thm = app.add_subcommand("verify-theorems", "Cross-module consistency checks");
  c_thm->add_option("instance", instance_ref, "Instance file path or gallery:NAME");
  c_thm->add_option("--fuzz", fuzz, "Number of random instances");
  c_thm->add_option("--seed", seed, "Fuzz seed");

  auto* c_gallery = app.add_subcommand("gallery", "Print a gallery instance (or list names)");
  c_gallery->add_option("name", process_name, "Instance name");

  CLI11_PARSE(app, argc, argv);
  auto start = std::chrono::steady_clock::now();

  try {
    if (c_gallery->parsed()) {
      if (process_name.empty()) {
        for (const auto& n : gallery_names()) std::cout << n << "\n";
        return 0;
      }
      std::cout << serialize_instance(gallery(process_name)) << "\n";
      return 0;
    }

    if (c_thm->parsed()) {
      std::vector<Instance> instances;
      if (!instance_ref.empty()) {
        instances.push_back(resolve_instance(instance_ref));
      } else {
        for (const std::string n : {"binomial", "ex1", "xquestion", "ladder", "revival", "sec3",
                                    "ex3-3"})
          instances.push_back(gallery(n));
      }
      for (int k = 0; k < fuzz; ++k) {
        FuzzOptions opt;
        opt.force_absorbing = k % 2 == 0;
        instances.push_back(make_random_instance(seed + static_cast<uint64_t>(k), opt));
      }
      return consistency_sweep(cli, instances, seed);
    }

    Instance inst = resolve_instance(instance_ref);
    RunReport report;
    report.digest = instance_digest(inst);

    if (c_classify->parsed()) {
      report.command = "classify";
      Classification cls = classify(inst.tree, inst.gens);
      report.set("class", to_string(cls.cls));
      report.set("witness", join_values(inst.tree, cls.witness));
      report.exit_status = 0;
    } else if (c_nupbr->parsed()) {
      report.command = "check-nupbr";
      SupProfile sup = closure_sup(inst.tree, inst.gens);
      NupbrVerdict v = check_nupbr_loc(inst.tree, inst.gens);
      for (int t = 0; t <= inst.tree.horizon(); ++t) {
        std::string row;
        for (int n : inst.tree.at_time(t)) {
          if (!row.empty()) row += " ";
          row += inst.tree.node(n).id + "=" + sup.bound(n).str();
        }
        report.set("sup[t=" + std::to_string(t) + "]", row);
      }
      report.set("nupbr_loc", v.holds ? "holds" : "fails");
      if (!v.holds)
        report.set("witness", "t=" + std::to_string(v.witness_time) + " node=" +
                                  inst.tree.node(v.witness_node).id);
      report.exit_status = v.holds ? 0 : 1;
    } else if (c_dsv->parsed()) {
      report.command = "check-dsv";
      Classification cls = classify(inst.tree, inst.gens);
      DsvReport dsv = dsv_statistic_sup(inst.tree, inst.gens, cls.witness);
      for (int w = 0; w < inst.tree.leaf_count(); ++w)
        report.set(
            "anchor[" + inst.tree.node(inst.tree.leaves()[static_cast<size_t>(w)]).id + "]",
            inst.tree.node(dsv.anchor_node[static_cast<size_t>(w)]).id + " statistic=" +
                dsv.statistic[static_cast<size_t>(w)].str());
      report.set("dsv", dsv.holds ? "holds" : "fails");
      report.exit_status = dsv.holds ? 0 : 1;
    } else if (c_synth->parsed()) {
      report.command = "synth-deflator";
      SynthResult res;
      Classification cls = classify(inst.tree, inst.gens);
      if (mode == "nupbr") {
        res = synth_deflator_nupbr(inst.tree, inst.gens);
      } else {
        res = synth_deflator_dsv(inst.tree, inst.gens, cls.witness);
      }
      if (emit_lp) report.set("lp", "\n" + res.lp.render());
      report.set("delta", format_rat(res.delta));
      if (res.exists) {
        report.set("Y", join_values(inst.tree, res.deflator.y));
        report.set("mode", to_string(res.deflator.mode));
        if (!out_path.empty()) {
          std::ofstream(out_path) << deflator_json(inst.tree, res.deflator.y, res.deflator.delta,
                                                   to_string(res.deflator.mode))
                                         .dump(2);
          report.set("written", out_path);
        }
      } else {
        std::string cert;
        for (const auto& item : res.certificate.items)
          cert += (cert.empty() ? "" : ", ") + item.label + " x " + format_rat(item.weight);
        report.set("infeasibility_certificate", cert);
      }
      report.exit_status = res.exists ? 0 : 1;
    } else if (c_verify->parsed()) {
      report.command = "verify-smd";
      std::ifstream in(deflator_path);
      if (!in) throw std::invalid_argument("cannot open deflator file '" + deflator_path + "'");
      Json dj = Json::parse(in);
      auto [y, delta] = parse_deflator(inst.tree, dj);
      auto samples = sample_closure(inst.tree, inst.gens, depth, seed, {Rat(0), Rat(1), Rat(2)});
      Classification cls = classify(inst.tree, inst.gens);
      VerifyReport vr =
          mode == "dsv"
              ? verify_smd(inst.tree, inst.gens, y,
                           SupportMode::strict_before_that_with_boundary, samples.elements, delta,
                           &cls.witness)
              : verify_smd(inst.tree, inst.gens, y, SupportMode::strict_everywhere,
                           samples.elements, delta);
      report.set("checks", std::to_string(samples.elements.size()) + " closure samples");
      report.set("violations", std::to_string(vr.violations.size()));
      for (const auto& v : vr.violations) report.set("violation:" + v.kind, v.what);
      report.exit_status = vr.ok() ? 0 : 1;
    } else if (c_sample->parsed()) {
      report.command = "closure-sample";
      std::vector<Rat> ray_values;
      std::stringstream ss(ray_values_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) ray_values.push_back(parse_rat(tok));
      auto res = sample_closure(inst.tree, inst.gens, depth, seed, ray_values);
      report.set("elements", std::to_string(res.elements.size()));
      report.set("discarded", std::to_string(res.discarded));
      if (res.retry_cap_hit) report.set("retry_cap", "hit");
      if (emit) {
        Json arr = Json::array();
        for (const auto& el : res.elements) {
          Json e = Json::object();
          e["recipe"] = recipe_json(inst.tree, *el.recipe);
          e["value"] = detail::node_values_json(inst.tree, el.value);
          arr.push_back(std::move(e));
        }
        report.set("recipes", arr.dump(2));
      }
      report.exit_status = 0;
    } else if (c_pipe->parsed()) {
      report.command = "pasting-pipeline";
      PipelineResult res = pasting_pipeline(inst.tree, inst.gens);
      if (!res.ok) {
        report.set("failure", res.failure);
        report.exit_status = 1;
      } else {
        report.set("stages", std::to_string(res.stages.size()));
        for (size_t k = 0; k < res.stages.size(); ++k)
          report.set("rung[" + std::to_string(k) + "]", res.stages[k].rung);
        report.set("delta", format_rat(res.deflator.delta));
        report.set("Y", join_values(inst.tree, res.deflator.y));
        report.set("mode", to_string(res.deflator.mode));
        report.exit_status = 0;
      }
    } else if (c_gsm->parsed()) {
      report.command = "gsm-check";
      if (inst.raws.empty()) throw std::invalid_argument("instance has no raw processes");
      bool all_ok = true;
      bool matched = false;
      for (const auto& [name, z] : inst.raws) {
        if (!process_name.empty() && name != process_name) continue;
        matched = true;
        ProjectionComparison cmp = compare_projection(inst.tree, z);
        report.set(name + ".gsm", cmp.gsm ? "true" : "false");
        if (!cmp.gsm)
          report.set(name + ".witness",
                     "(s,t)=(" + std::to_string(cmp.gsm_verdict.s) + "," +
                         std::to_string(cmp.gsm_verdict.t) + ") atom=" +
                         inst.tree.node(cmp.gsm_verdict.atom).id + " E=" +
                         format_rat(cmp.gsm_verdict.lhs) + " P=" + format_rat(cmp.gsm_verdict.rhs));
        report.set(name + ".projection", join_values(inst.tree, cmp.projection));
        report.set(name + ".projection_supermartingale",
                   cmp.projection_supermartingale ? "true" : "false");
        // (s,t,atom) table of conditional ratio expectations.
        for (int s = 0; s < inst.tree.horizon(); ++s)
          for (int t = s + 1; t <= inst.tree.horizon(); ++t)
            for (int atom : inst.tree.at_time(s)) {
              Rat e = 0;
              bool defined = true;
              for (int w : inst.tree.node(atom).leaves) {
                const Rat& zs = z.by_leaf[static_cast<size_t>(w)][static_cast<size_t>(s)];
                const Rat& zt = z.by_leaf[static_cast<size_t>(w)][static_cast<size_t>(t)];
                if (zs == 0 && zt != 0) defined = false;
                else
                  e += inst.tree.node(inst.tree.leaves()[static_cast<size_t>(w)]).path_prob *
                       (zs == 0 ? Rat(1) : zt / zs);
              }
              report.set(name + ".E[Z" + std::to_string(t) + "/Z" + std::to_string(s) + ";" +
                             inst.tree.node(atom).id + "]",
                         defined ? format_rat(e) + " vs " + format_rat(inst.tree.node(atom).path_prob)
                                 : "undefined");
            }
        if (!cmp.gsm) all_ok = false;
      }
      if (!matched) throw std::invalid_argument("no raw process named '" + process_name + "'");
      report.exit_status = all_ok ? 0 : 1;
    }

    cli.finish(report, start);
    return report.exit_status;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
