#pragma once

// Batch jobs: JSON config in, JSON report plus a text summary out.
//
// Exit codes: 0 every check passed, 1 a check failed or a numeric error
// stopped the job (a report is still written), 2 the config is invalid
// (no report), 3 reading the config or writing the report failed.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtw/catalog.hpp"
#include "gtw/gt_core.hpp"
#include "json.hpp"

namespace gtw::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kPass = 0, kNumericFailure = 1, kSchemaViolation = 2, kIoFailure = 3 };

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& commands();

struct CollideConfig {
  std::vector<CollisionGroup> groups;  // base_index is 0-based here, 1-based in the file
  std::vector<double> ladder;
};

struct ReductionConfig {
  int M = 2;
  int steps = 10;
  double h = 0.05;
  double scale = 1e-2;
  bool present = false;
};

struct HydroConfig {
  int i = 0, j = 1, k = 2;  // 0-based here, 1-based in the file
  int z_samples = 40;
  double svd_tol = 1e-8;
};

struct JobConfig {
  std::string command;
  StructureSpec structure;
  std::uint64_t seed = 0;
  int samples = 100;
  double tol = 1e-8;
  int nodes = 32;
  int panels = 8;
  double delta = 1e-4;
  double min_separation = 0.1;
  CollideConfig collide;
  std::string mu = "quad";
  std::optional<CurveModuli> moduli;
  ReductionConfig reduction;
  HydroConfig hydro;
  std::string output = "gtw_report.json";
};

/// Throws SchemaError on unknown keys, wrong types, non-positive numbers, a
/// missing seed or degenerate moduli. `seed_override` replaces the file's seed.
JobConfig parse_config(const Json& j, std::optional<std::uint64_t> seed_override = std::nullopt);

/// The config with every default filled in, keys in a fixed order.
Json echo(const JobConfig& c);

struct RunReport {
  Json config;
  std::vector<VerificationReport> reports;
  Json results = Json::object();
  std::optional<std::string> error;  // numeric error that stopped the job
  double seconds = 0.0;              // summary only, never in the JSON
  bool pass = false;
};

/// Runs the job. Numeric errors are caught and recorded in the report.
RunReport run(const JobConfig& c);

Json to_json(const VerificationReport& r);
/// Deterministic: contains no timing.
Json to_json(const RunReport& r);
std::string summary(const RunReport& r);

/// Writes `path` and the summary next to it (".json" replaced by ".txt"),
/// each through a temporary file and a rename. Throws IoError.
void emit_report(const RunReport& r, const std::string& path);
std::string summary_path(const std::string& path);

/// Complex number as [re, im].
Json complex_json(cplx z);

/// Reads the config, runs, writes; returns the exit code. Messages go to err.
int execute(const std::string& config_path, const std::optional<std::string>& out,
            std::optional<std::uint64_t> seed, std::ostream& err);

}  // namespace gtw::cli
