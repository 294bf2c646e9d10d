// thick: experiment driver.
//
//   thick <kernel|sample|gmc|thick|check|compare> [config.json] [flags]
//   thick validate config.json
//
// Flags override the matching config fields. Exit codes: 0 ok, 2 config error,
// 3 feasibility refusal, 4 numerical failure.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "app/config.hpp"
#include "app/run.hpp"

using thick::app::Json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas, threads, N, efolds;
  std::optional<double> L;
  std::optional<std::string> family, output;
  std::vector<double> a;
  bool json = false;
};

void add_flags(CLI::App* cmd, Overrides& o, bool sampled) {
  cmd->add_option("config", o.config, "JSON experiment config");
  cmd->add_option("--seed", o.seed, "seed");
  cmd->add_option("--output", o.output, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads");
  cmd->add_option("--family", o.family, "cut-off family (single-cutoff configs)");
  cmd->add_option("--efolds", o.efolds, "scale list e^{-1}, ..., e^{-n}");
  cmd->add_flag("--json", o.json, "print the manifest as JSON");
  if (sampled) {
    cmd->add_option("--replicas", o.replicas, "replicas");
    cmd->add_option("--N", o.N, "lattice points per side");
    cmd->add_option("--L", o.L, "lattice side");
    cmd->add_option("--a", o.a, "thickness / coupling levels");
  }
}

Json build_document(const Overrides& o, const std::string& kind) {
  Json doc = o.config.empty() ? Json::object() : thick::app::load_document(o.config);
  if (!doc.is_object()) thick::usage_error("the config must be a JSON object");
  if (doc.contains("kind") && doc["kind"] != kind) {
    thick::usage_error("config kind '" + doc["kind"].dump() + "' does not match the subcommand (" + kind + ")");
  }
  doc["kind"] = kind;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.replicas) doc["replicas"] = *o.replicas;
  if (o.threads) doc["threads"] = *o.threads;
  if (o.output) doc["output"] = *o.output;
  if (o.family) {
    if (doc.contains("cutoffs")) thick::usage_error("--family applies to single-cutoff configs");
    doc["cutoff"]["family"] = *o.family;
  }
  if (o.N) doc["lattice"]["N"] = *o.N;
  if (o.L) doc["lattice"]["L"] = *o.L;
  if (o.efolds) doc["scales"] = {{"efolds", *o.efolds}};
  if (!o.a.empty()) doc["a"] = o.a;
  return doc;
}

int run_kind(const Overrides& o, const std::string& kind) {
  const Json doc = build_document(o, kind);
  thick::app::ExperimentConfig cfg;
  const auto report = thick::app::validate(doc, cfg);
  if (!report.ok()) {
    std::cerr << report.to_text();
    return report.exit_code();
  }
  const auto dir = thick::app::resolve_output(cfg);
  const auto manifest = thick::app::run(cfg, dir);
  if (o.json) {
    std::cout << manifest.to_json().dump(2) << "\n";
  } else {
    std::cout << manifest.kind << ": " << manifest.outputs.size() << " files in " << dir << "\n"
              << "config " << manifest.config_hash << "\nfingerprint " << manifest.fingerprint() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thick points, multiplicative chaos and cut-off audits for log-correlated fields"};
  app.require_subcommand(1);
  app.set_version_flag("--version", THICK_VERSION);

  const std::map<std::string, std::pair<std::string, bool>> kinds{
      {"kernel", {"kernel-table", false}},   {"sample", {"sample", true}},
      {"gmc", {"gmc-trace", true}},          {"thick", {"thick-spectrum", true}},
      {"check", {"check-conditions", false}}, {"compare", {"compare-cutoffs", true}}};
  std::map<std::string, Overrides> overrides;
  std::map<std::string, CLI::App*> commands;
  for (const auto& [name, kind] : kinds) {
    commands[name] = app.add_subcommand(name, "run a " + kind.first + " experiment");
    add_flags(commands[name], overrides[name], kind.second);
  }
  std::string validate_path;
  bool validate_json = false;
  auto* val = app.add_subcommand("validate", "schema and feasibility check without running");
  val->add_option("config", validate_path, "JSON experiment config")->required();
  val->add_flag("--json", validate_json, "print violations as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (val->parsed()) {
      thick::app::ExperimentConfig cfg;
      const auto report = thick::app::validate(thick::app::load_document(validate_path), cfg);
      if (validate_json) {
        std::cout << Json{{"violations", report.to_json()}, {"config_hash", cfg.hash}}.dump(2) << "\n";
      } else if (report.ok()) {
        std::cout << "ok: " << thick::app::to_string(cfg.kind) << ", config " << cfg.hash << "\n";
      } else {
        std::cout << report.to_text();
      }
      return report.exit_code();
    }
    for (const auto& [name, cmd] : commands) {
      if (cmd->parsed()) return run_kind(overrides[name], kinds.at(name).first);
    }
  } catch (const thick::Error& e) {
    std::cerr << "error [" << thick::to_string(e.category()) << "]: " << e.what() << "\n";
    return e.category() == thick::ErrorCategory::Domain ? 2 : e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error [numerical]: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
