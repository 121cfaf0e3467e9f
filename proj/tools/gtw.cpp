#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "gtw/catalog.hpp"
#include "gtw/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical checks for GT structures and their hierarchies"};
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool list = false;
  app.add_option("--config", config, "JSON job configuration");
  app.add_option("--out", out, "report path (overrides the config)");
  app.add_option("--seed", seed, "seed (overrides the config)");
  app.add_flag("--list-structures", list, "print the builtin structure families and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gtw::cli::kSchemaViolation;
  }
  if (list) {
    for (const auto& id : gtw::family_ids()) std::cout << id << "\n";
    return gtw::cli::kPass;
  }
  if (config.empty()) {
    std::cerr << "error: --config is required\n";
    return gtw::cli::kSchemaViolation;
  }
  return gtw::cli::execute(config, out, seed, std::cerr);
}
