#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "app/config.hpp"
#include "app/run.hpp"
#include "doctest.h"
#include "thick/errors.hpp"

using namespace thick;
using app::Json;
namespace fs = std::filesystem;

namespace {

bool mentions(const app::SchemaReport& rep, const std::string& field) {
  for (const auto& v : rep.violations) {
    if (v.field.find(field) != std::string::npos) return true;
  }
  return false;
}

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("thick_test_" + name);
  fs::remove_all(dir);
  return dir.string();
}

Json sample_doc() {
  return Json::parse(R"({
    "schema_version": 1, "kind": "sample", "seed": 11, "replicas": 64, "threads": 1,
    "cutoff": {"family": "white-noise", "m": 1},
    "lattice": {"N": 32, "L": 4}, "scales": {"efolds": 2}
  })");
}

}  // namespace

TEST_CASE("a valid config has no violations") {
  app::ExperimentConfig cfg;
  const auto rep = app::validate(sample_doc(), cfg);
  CHECK(rep.ok());
  CHECK(rep.exit_code() == 0);
  CHECK(cfg.scales.size() == 2);
  CHECK(cfg.hash.size() == 64);
}

TEST_CASE("schema violations name their fields") {
  auto doc = sample_doc();
  doc.erase("seed");
  doc["lattice"]["N"] = 31;
  doc["bogus"] = 1;
  app::ExperimentConfig cfg;
  const auto rep = app::validate(doc, cfg);
  CHECK(mentions(rep, "seed"));
  CHECK(mentions(rep, "lattice.N"));
  CHECK(mentions(rep, "bogus"));
  CHECK(rep.exit_code() == 2);
}

TEST_CASE("scales must be given exactly once") {
  auto doc = sample_doc();
  doc["scales"]["values"] = {0.5, 0.1};
  app::ExperimentConfig cfg;
  CHECK(mentions(app::validate(doc, cfg), "scales"));
}

TEST_CASE("under-resolved white noise is refused with a suggested N") {
  auto doc = sample_doc();
  doc["lattice"] = {{"N", 8}, {"L", 1}};
  doc["scales"] = {{"efolds", 5}};
  app::ExperimentConfig cfg;
  const auto rep = app::validate(doc, cfg);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.exit_code() == 3);
  CHECK(rep.violations[0].message.find("needs N >=") != std::string::npos);
}

TEST_CASE("the config hash ignores output location and thread count") {
  auto a = sample_doc(), b = sample_doc();
  b["output"] = "elsewhere";
  b["threads"] = 4;
  app::ExperimentConfig ca, cb;
  app::validate(a, ca);
  app::validate(b, cb);
  CHECK(ca.hash == cb.hash);
  b["seed"] = 12;
  app::validate(b, cb);
  CHECK(ca.hash != cb.hash);
}

TEST_CASE("massive-integral kernel table is -log eps on the diagonal") {
  const auto doc = Json::parse(R"({
    "kind": "kernel-table", "seed": 1, "cutoff": {"family": "massive-integral"},
    "scales": {"values": [0.5, 0.01, 1e-5]}, "kernel": {"r_values": [0, 0.1, 1]}
  })");
  app::ExperimentConfig cfg;
  REQUIRE(app::validate(doc, cfg).ok());
  const auto m = app::run(cfg, scratch("kernel"));
  const auto& f = m.summary.at("families").at(0);
  CHECK(f.at("max_diagonal_deviation_from_neg_log_eps").get<double>() < 1e-12);
  CHECK(f.at("below_minus_1e-6").get<int>() == 0);
  CHECK(f.at("rows").get<int>() == 9);
}

TEST_CASE("thick-spectrum at a = 0 is full-dimensional") {
  const auto doc = Json::parse(R"({
    "kind": "thick-spectrum", "seed": 3, "replicas": 8, "threads": 1,
    "cutoff": {"family": "white-noise"}, "lattice": {"N": 512, "L": 1},
    "scales": {"efolds": 6}, "a": [0],
    "thick": {"delta": "none", "mode": "at-least", "count": "net", "window": [3, 6]}
  })");
  app::ExperimentConfig cfg;
  const auto rep = app::validate(doc, cfg);
  INFO(rep.to_text());
  REQUIRE(rep.ok());
  const auto m = app::run(cfg, scratch("spectrum"));
  CHECK(m.summary.at("spectrum").at(0).at("d_hat").get<double>() == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("reruns reproduce the output digests") {
  app::ExperimentConfig cfg;
  REQUIRE(app::validate(sample_doc(), cfg).ok());
  const auto a = app::run(cfg, scratch("rerun_a"));
  const auto b = app::run(cfg, scratch("rerun_b"));
  REQUIRE(!a.outputs.empty());
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.summary.at("nesting_holds").get<bool>());
}

TEST_CASE("malformed JSON reports its position") {
  const auto path = fs::temp_directory_path() / "thick_test_bad.json";
  {
    std::ofstream os(path);
    os << "{\n  \"kind\": \"sample\",\n  \"seed\": ,\n}\n";
  }
  try {
    app::load_document(path.string());
    FAIL("expected a usage error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Usage);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
