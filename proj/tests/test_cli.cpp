#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtw/cli.hpp"

using namespace gtw;
using namespace gtw::cli;
namespace fs = std::filesystem;

namespace {

Json base_config() {
  return Json::parse(R"({"command": "verify", "structure": {"family": "benney", "n": 2}, "seed": 3, "samples": 20})");
}

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / "gtw_test_cli";
  fs::create_directories(d);
  return d;
}

fs::path write_config(const Json& j, const std::string& name) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("complex numbers serialize as pairs") {
  CHECK(complex_json(kTwoPiI).dump() == "[0.0,6.283185307179586]");
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(parse_config(base_config()));
  auto j = base_config();
  j["tol"] = -1;
  CHECK_THROWS_AS(parse_config(j), SchemaError);
  j = base_config();
  j["bogus"] = 1;
  CHECK_THROWS_AS(parse_config(j), SchemaError);
  j = base_config();
  j.erase("seed");
  CHECK_THROWS_AS(parse_config(j), SchemaError);
  CHECK(parse_config(j, 9).seed == 9);
  j = base_config();
  j["samples"] = 1.5;
  CHECK_THROWS_AS(parse_config(j), SchemaError);
  j = base_config();
  j["command"] = "launch";
  CHECK_THROWS_AS(parse_config(j), SchemaError);
  j = base_config();
  j["structure"]["family"] = "genus9";
  CHECK_THROWS_AS(parse_config(j), SchemaError);
}

TEST_CASE("degenerate moduli are a schema violation") {
  const auto j = Json::parse(R"({"command": "rauch", "seed": 1, "moduli": {"a": [2, 0], "b": [2, 0], "c": [3, 0]}})");
  CHECK_THROWS_AS(parse_config(j), SchemaError);
}

TEST_CASE("indices are one-based in the file") {
  auto j = Json::parse(R"({"command": "hydro", "structure": {"family": "genus0"}, "seed": 1,
                          "hydro": {"i": 3, "j": 1, "k": 2}})");
  const JobConfig c = parse_config(j);
  CHECK(c.hydro.i == 2);
  CHECK(c.hydro.j == 0);
  CHECK(c.structure.n == 2);
  j["hydro"]["i"] = 0;
  CHECK_THROWS_AS(parse_config(j), SchemaError);
}

TEST_CASE("echo fills every default") {
  const Json e = echo(parse_config(base_config()));
  for (const char* k : {"command", "structure", "seed", "samples", "tol", "nodes", "output"}) CHECK(e.contains(k));
  CHECK(e["samples"] == 20);
}

TEST_CASE("reports are deterministic and carry no timing") {
  const JobConfig c = parse_config(base_config());
  const std::string a = to_json(run(c)).dump();
  const std::string b = to_json(run(c)).dump();
  CHECK(a == b);
  CHECK(a.find("seconds") == std::string::npos);
  const Json r = Json::parse(a);
  CHECK(r["pass"] == true);
  CHECK(r["reports"].size() == 4);
}

TEST_CASE("numeric failures are recorded, not thrown") {
  auto j = Json::parse(R"({"command": "gtsys", "structure": {"family": "benney"}, "seed": 2,
                          "reduction": {"h": 5.0, "scale": 50.0}})");
  const RunReport r = run(parse_config(j));
  CHECK_FALSE(r.pass);
  REQUIRE(r.error.has_value());
}

TEST_CASE("execute maps outcomes to exit codes") {
  std::ostringstream err;
  auto j = base_config();
  j["output"] = (scratch_dir() / "ok.json").string();
  CHECK(execute(write_config(j, "ok_cfg.json").string(), std::nullopt, std::nullopt, err) == kPass);
  CHECK(fs::exists(scratch_dir() / "ok.json"));
  CHECK(fs::exists(scratch_dir() / "ok.txt"));
  const std::string first = slurp(scratch_dir() / "ok.json");
  CHECK(execute(write_config(j, "ok_cfg.json").string(), std::nullopt, std::nullopt, err) == kPass);
  CHECK(slurp(scratch_dir() / "ok.json") == first);

  j["tol"] = -1;
  CHECK(execute(write_config(j, "bad_cfg.json").string(), std::nullopt, std::nullopt, err) == kSchemaViolation);

  const fs::path broken = scratch_dir() / "broken.json";
  std::ofstream(broken) << "{ not json";
  CHECK(execute(broken.string(), std::nullopt, std::nullopt, err) == kSchemaViolation);

  CHECK(execute((scratch_dir() / "missing.json").string(), std::nullopt, std::nullopt, err) == kIoFailure);

  j = base_config();
  CHECK(execute(write_config(j, "io_cfg.json").string(), std::string("/nonexistent/dir/r.json"), std::nullopt, err) ==
        kIoFailure);
}

TEST_CASE("summary path") {
  CHECK(summary_path("a/b/report.json") == "a/b/report.txt");
  CHECK(summary_path("report") == "report.txt");
}
