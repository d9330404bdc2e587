#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "swarm/experiment.hpp"

namespace {

struct ModeOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // KEY=VALUE
  std::uint64_t seed = 1;
  int runs = 1;
  std::string out_path;
  std::string format;
  bool no_trust = false;
  int epochs = -1;           // <0 keeps the config value
  int snapshot_epoch = -1;   // <0 disables the snapshot
  std::string fractions_text = "0,0.1,0.2,0.3,0.4,0.5";
  int jobs = 0;  // 0 = as many as the run count allows
};

void add_common_options(CLI::App& sub, ModeOptions& opt, const std::string& default_out,
                        int default_runs, const std::string& default_format) {
  opt.runs = default_runs;
  opt.out_path = default_out;
  opt.format = default_format;
  sub.add_option("--config", opt.config_path, "Flat key = value config file");
  sub.add_option("--set", opt.overrides, "Config override KEY=VALUE (repeatable)")
      ->type_name("KEY=VALUE");
  sub.add_option("--seed", opt.seed, "Base seed; runs use seed, seed+1, ...")
      ->capture_default_str();
  sub.add_option("--runs", opt.runs, "Number of seeds to aggregate over")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub.add_option("--out", opt.out_path, "Output file path")->capture_default_str();
  sub.add_option("--format", opt.format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sub.add_flag("--no-trust", opt.no_trust, "Disable trust weighting (weights = link quality)");
  sub.add_option("--epochs", opt.epochs, "Override the number of epochs")
      ->check(CLI::NonNegativeNumber);
  sub.add_option("--snapshot-epoch", opt.snapshot_epoch,
                 "Also write a per-UAV world snapshot for this epoch (first seed)")
      ->check(CLI::NonNegativeNumber);
  sub.add_option("--jobs", opt.jobs, "Parallel worker cap (also capped by SWARM_REFINE_THREADS)")
      ->check(CLI::NonNegativeNumber);
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw swarm::ConfigError("invalid value for field fractions: '" + item + "'");
    }
  }
  if (out.empty()) throw swarm::ConfigError("invalid value for field fractions: empty list");
  return out;
}

swarm::ExperimentSpec build_spec(const ModeOptions& opt, bool is_sweep) {
  swarm::SwarmConfig config;
  if (!opt.config_path.empty()) swarm::apply_config_file(config, opt.config_path);
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw swarm::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    }
    swarm::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opt.epochs >= 0) config.n_epochs = opt.epochs;
  if (opt.no_trust) config.trust_enabled = false;

  swarm::ExperimentSpec spec;
  spec.config = config;
  spec.seeds.clear();
  for (int k = 0; k < opt.runs; ++k) spec.seeds.push_back(opt.seed + static_cast<std::uint64_t>(k));
  spec.out_path = opt.out_path;
  spec.format = opt.format == "json" ? swarm::OutputFormat::kJson : swarm::OutputFormat::kCsv;
  if (opt.snapshot_epoch >= 0) spec.snapshot_epoch = opt.snapshot_epoch;
  if (is_sweep) spec.fractions = parse_fractions(opt.fractions_text);

  int jobs = static_cast<int>(spec.seeds.size());
  if (is_sweep) jobs *= 2 * static_cast<int>(spec.fractions.size());
  int requested = opt.jobs > 0 ? std::min(opt.jobs, jobs) : jobs;
  std::optional<std::string> env;
  if (const char* raw = std::getenv("SWARM_REFINE_THREADS")) env = std::string(raw);
  spec.threads = swarm::effective_threads(requested, std::thread::hardware_concurrency(), env);
  return spec;
}

std::string config_footer() {
  std::ostringstream out;
  out << "Config fields (file keys, --set keys) and their defaults:\n";
  for (const auto& [key, value] : swarm::config_to_kv(swarm::SwarmConfig{})) {
    out << "  " << key << " = " << value << "\n";
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized UAV swarm position refinement experiments"};
  app.require_subcommand(1);
  app.footer(config_footer());

  ModeOptions single_opt, cohort_opt, sweep_opt;

  CLI::App* single = app.add_subcommand(
      "single", "Per-epoch error table for one configuration (CSV or JSON)");
  add_common_options(*single, single_opt, "single.csv", 1, "csv");

  CLI::App* cohort = app.add_subcommand(
      "cohort", "Cold-start cohort study across seeds (JSON summary)");
  add_common_options(*cohort, cohort_opt, "cohort.json", 100, "json");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Malicious-fraction sweep, trust on vs off, paired seeds");
  add_common_options(*sweep, sweep_opt, "sweep.csv", 100, "csv");
  sweep->add_option("--fractions", sweep_opt.fractions_text,
                    "Comma-separated malicious fractions")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (single->parsed()) {
      swarm::run_single(build_spec(single_opt, false));
    } else if (cohort->parsed()) {
      if (cohort_opt.format == "csv") {
        throw swarm::ConfigError("the cohort summary is JSON only; use --format json");
      }
      swarm::run_cohort(build_spec(cohort_opt, false));
    } else if (sweep->parsed()) {
      swarm::run_sweep(build_spec(sweep_opt, true));
    }
  } catch (const swarm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
