#pragma once

// Experiment drivers behind the command-line tool: seed expansion, parallel
// run execution with deterministic collection, and CSV/JSON emission.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swarm/sim.hpp"

namespace swarm {

enum class OutputFormat { kCsv, kJson };

struct ExperimentSpec {
  SwarmConfig config;  // base configuration; seed is overridden per run
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};  // sweep only
  std::string out_path;
  OutputFormat format = OutputFormat::kCsv;
  std::optional<int> snapshot_epoch;  // single mode only
  int threads = 1;
};

// Every configuration field as (name, value) text, in a stable order. Used
// for the "# key = value" header comments and the JSON config echo.
std::vector<std::pair<std::string, std::string>> config_to_kv(const SwarmConfig& config);

// Applies "key = value" lines from a flat config file. Unknown keys and
// malformed values raise ConfigError naming the field.
void apply_config_file(SwarmConfig& config, const std::string& path);
void apply_override(SwarmConfig& config, const std::string& key,
                    const std::string& value);

// Worker count: min(jobs, hardware), further capped by the environment
// override when it parses as a positive integer.
int effective_threads(int jobs, unsigned hardware,
                      const std::optional<std::string>& env_value);

// One simulation per seed, executed on up to spec.threads workers; results
// are ordered by seed index regardless of scheduling.
std::vector<std::vector<EpochMetrics>> run_seeds(const SwarmConfig& config,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 int threads);

// Per-epoch error table aggregated over seeds (CSV or JSON), plus an
// optional single-epoch snapshot of the first seed's world.
void run_single(const ExperimentSpec& spec);

// Cold-start cohort experiment: window statistics, win rates, and recovery
// distributions across seeds, as JSON.
void run_cohort(const ExperimentSpec& spec);

// Adversary sweep: for every (malicious fraction, trust on/off) pair, the
// final-epoch honest error across paired seeds (CSV or JSON).
void run_sweep(const ExperimentSpec& spec);

}  // namespace swarm
