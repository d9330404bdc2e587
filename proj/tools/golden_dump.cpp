// Regenerates the golden fixtures under tests/golden: one EpochMetrics JSON
// object per line for a fixed configuration. Run with --help for options.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "swarm/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Dump per-epoch metrics as JSON lines for golden-file tests"};
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  std::string out_path;
  app.add_option("--config", config_path, "Flat key = value config file");
  app.add_option("--set", overrides, "Config override KEY=VALUE (repeatable)")
      ->type_name("KEY=VALUE");
  app.add_option("--seed", seed, "Simulation seed")->capture_default_str();
  app.add_option("--out", out_path, "Output path (default: stdout)");
  CLI11_PARSE(app, argc, argv);

  try {
    swarm::SwarmConfig config;
    if (!config_path.empty()) swarm::apply_config_file(config, config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw swarm::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      }
      swarm::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.seed = seed;

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw std::runtime_error("cannot open output file: " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    for (const auto& metrics : swarm::run_simulation(config)) {
      out << nlohmann::json(metrics).dump() << "\n";
    }
    if (!out.good()) throw std::runtime_error("failed writing output");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
