#pragma once

// Experiment configuration: a single JSON document, schema version 1.
//
// Parsing never stops at the first problem. Every violated invariant is
// collected with the JSON path of the offending field, so `thick validate`
// can list them all at once.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "thick/conditions.hpp"
#include "thick/errors.hpp"
#include "thick/fields.hpp"
#include "thick/fractal.hpp"

namespace thick::app {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Kind { KernelTable, Sample, GmcTrace, ThickSpectrum, CheckConditions, CompareCutoffs };

std::string to_string(Kind k);
std::optional<Kind> kind_from_string(const std::string& s);

struct KernelOptions {
  std::vector<double> r;  // separations; 0 adds the diagonal row
};

struct SampleOptions {
  std::vector<std::array<int, 2>> probe;  // cell offsets from the centre cell
  int snapshots = 1;                      // replicas written as binary snapshots
  bool field_csv = false;
};

struct GmcOptions {
  bool l2 = true;
  bool rooted = false;
  bool trace = true;  // per-replica rows
  std::vector<double> alpha;
};

struct ThickRunOptions {
  ThickOptions cells{};
  CountMethod count = CountMethod::Net;
  int window_lo = 0, window_hi = 0;  // 0: default window
  bool lattice_normaliser = false;
  bool empty_check = false;
  double empty_a = 3.0;
  int empty_n = 0;
  ThickOptions empty_cells{};
};

struct CheckOptions {
  std::vector<std::string> conditions{"A", "B", "C", "D"};
  LogGrid eps{1e-4, 1e-1, 7};
  LogGrid r{1e-4, 1.0, 9};
  std::vector<int> N_list{1, 2, 3, 4};
  int n_max = 10;
  int d_sets = 10, d_points = 20;
  std::vector<double> b_eps{1e-1, 1e-2, 1e-3, 1e-4};
};

struct CompareOptions {
  LogGrid eps{1e-4, 1e-1, 7};
  LogGrid r{1e-4, 1.0, 9};
  double R = 0.5;
  bool max_scaling = true;
};

struct ExperimentConfig {
  Kind kind = Kind::KernelTable;
  std::vector<CutoffSpec> cutoffs;
  std::optional<LatticeSpec> lattice;
  std::vector<double> scales;
  std::vector<double> a;
  int replicas = 1;
  std::uint64_t seed = 0;
  std::string output;
  int threads = 0;
  Thresholds thresholds;
  KernelOptions kernel;
  SampleOptions sample;
  GmcOptions gmc;
  ThickRunOptions thick;
  CheckOptions check;
  CompareOptions compare;

  Json document;     // as read, after flag overrides
  std::string hash;  // SHA-256 of the canonical document without "output" and "threads"
};

struct Violation {
  std::string field;
  std::string message;
  ErrorCategory category = ErrorCategory::Usage;
};

struct SchemaReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  /// 0 when clean, 2 for any schema violation, 3 when only feasibility refusals remain.
  int exit_code() const;
  Json to_json() const;
  std::string to_text() const;
};

/// Reads and parses a JSON file; syntax errors name the line and column.
Json load_document(const std::string& path);

/// Schema and semantic checks. `out` is filled as far as the document allows.
SchemaReport parse_config(const Json& doc, ExperimentConfig& out);

/// Resolution and mode-budget refusals, with the suggested N or M. Cheap: no sampler is built.
void check_feasibility(const ExperimentConfig& cfg, SchemaReport& report);

/// parse_config followed by check_feasibility when the schema is clean.
SchemaReport validate(const Json& doc, ExperimentConfig& out);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace thick::app
