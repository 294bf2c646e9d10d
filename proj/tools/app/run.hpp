#pragma once

// Experiment pipelines. run() executes one validated config and writes long-format CSV
// tables, JSON reports and a manifest with SHA-256 digests of every output file.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "config.hpp"

namespace thick::app {

struct StageTime {
  std::string name;
  double seconds = 0.0;
};

struct OutputFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string kind;
  std::string directory;
  std::vector<StageTime> stages;
  std::vector<OutputFile> outputs;
  Json summary;  // the key results, also written to summary.json

  Json to_json() const;
  /// Combined digest over the sorted output digests (the determinism fingerprint).
  std::string fingerprint() const;
};

/// Writes the files of one run. Every CSV starts with a '#' header block naming the
/// artifact version, the config hash and the experiment kind.
class OutputSet {
 public:
  OutputSet(std::string directory, std::string config_hash, std::string kind);

  const std::string& directory() const { return dir_; }
  std::string path(const std::string& name) const;
  std::ofstream csv(const std::string& name, const std::vector<std::string>& columns);
  void json(const std::string& name, Json value);
  /// Registers a file written by other code (binary snapshots).
  void add(const std::string& name);
  std::vector<OutputFile> digests() const;

 private:
  std::string dir_, hash_, kind_;
  std::vector<std::string> files_;
};

/// Shortest round-trip decimal form of a double.
std::string num(double x);

/// Output directory: explicit override, else cfg.output, else "<kind>-<hash prefix>";
/// relative paths are placed under THICK_OUTPUT_ROOT when it is set.
std::string resolve_output(const ExperimentConfig& cfg, const std::string& override_dir = {});

/// Worker count: cfg.threads, else THICK_THREADS, else the OpenMP default.
int resolve_threads(const ExperimentConfig& cfg);

/// Validates (throwing the first violation's category) and runs the pipeline.
RunManifest run(const ExperimentConfig& cfg, const std::string& output_dir);

}  // namespace thick::app
