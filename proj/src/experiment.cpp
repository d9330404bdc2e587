#include "swarm/experiment.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace swarm {

namespace {

std::string fmt_double(double v) {
  // shortest round-trip representation, locale independent
  return nlohmann::json(v).dump();
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string fmt_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for field " + key + ": '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for field " + key + ": '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for field " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("invalid value for field " + key + ": '" + value + "'");
}

Vec3 parse_triple(const std::string& key, const std::string& value) {
  std::vector<double> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(parse_double(key, trim(item)));
  if (parts.size() != 3) {
    throw ConfigError("invalid value for field " + key + ": expected x,y,z");
  }
  return Vec3(parts[0], parts[1], parts[2]);
}

std::string triple_to_string(const Vec3& v) {
  return fmt_double(v.x()) + "," + fmt_double(v.y()) + "," + fmt_double(v.z());
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out.good()) throw std::runtime_error("failed writing output file: " + path);
}

void write_header_comments(std::ofstream& out, const std::string& mode,
                           const ExperimentSpec& spec) {
  out << "# mode = " << mode << "\n";
  for (const auto& [key, value] : config_to_kv(spec.config)) {
    out << "# " << key << " = " << value << "\n";
  }
  out << "# seeds =";
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
    out << (i == 0 ? " " : ",") << spec.seeds[i];
  }
  out << "\n";
}

nlohmann::json config_echo_json(const SwarmConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : config_to_kv(config)) j[key] = value;
  return j;
}

nlohmann::json window_json(const WindowStats& w) {
  return nlohmann::json{{"local_mean_m", w.local_mean},
                        {"refined_mean_m", w.refined_mean},
                        {"win_rate", w.win_rate},
                        {"local_p10_m", w.local_p10},
                        {"local_p90_m", w.local_p90},
                        {"refined_p10_m", w.refined_p10},
                        {"refined_p90_m", w.refined_p90}};
}

nlohmann::json recovery_json(const RecoveryStats& r) {
  nlohmann::json per_run = nlohmann::json::array();
  for (const auto& e : r.per_run) {
    if (e.has_value()) {
      per_run.push_back(*e);
    } else {
      per_run.push_back(nullptr);
    }
  }
  return nlohmann::json{{"recovered_runs", r.recovered_runs},
                        {"median_epoch", r.median_epoch},
                        {"p90_epoch", r.p90_epoch},
                        {"per_run", per_run}};
}

void run_indexed(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min(threads, jobs);
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_to_kv(const SwarmConfig& c) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("n_uavs", std::to_string(c.n_uavs));
  kv.emplace_back("n_epochs", std::to_string(c.n_epochs));
  kv.emplace_back("bounds_min", triple_to_string(c.bounds.min));
  kv.emplace_back("bounds_max", triple_to_string(c.bounds.max));
  kv.emplace_back("step_scale", fmt_double(c.step_scale));
  kv.emplace_back("comm_radius", fmt_double(c.comm_radius));
  kv.emplace_back("noise_scale_min", fmt_double(c.noise_scale_min));
  kv.emplace_back("noise_scale_max", fmt_double(c.noise_scale_max));
  kv.emplace_back("vertical_factor", fmt_double(c.vertical_factor));
  kv.emplace_back("cold_start_epochs", std::to_string(c.cold_start_epochs));
  kv.emplace_back("cold_start_inflation", fmt_double(c.cold_start_inflation));
  kv.emplace_back("loss_prob", fmt_double(c.loss_prob));
  kv.emplace_back("cohort_size", std::to_string(c.cohort_size));
  kv.emplace_back("malicious_fraction", fmt_double(c.malicious_fraction));
  kv.emplace_back("range_noise_base", fmt_double(c.range_noise_base));
  kv.emplace_back("range_noise_slope", fmt_double(c.range_noise_slope));
  kv.emplace_back("spoof_min", fmt_double(c.spoof_min));
  kv.emplace_back("spoof_max", fmt_double(c.spoof_max));
  kv.emplace_back("seed", std::to_string(c.seed));
  kv.emplace_back("trust_enabled", c.trust_enabled ? "true" : "false");
  kv.emplace_back("alpha", fmt_double(c.link.alpha));
  kv.emplace_back("budget", std::to_string(c.link.budget));
  kv.emplace_back("q_min", fmt_double(c.link.q_min));
  kv.emplace_back("max_age", std::to_string(c.link.max_age));
  kv.emplace_back("lambda", fmt_double(c.trust.lambda));
  kv.emplace_back("eta", fmt_double(c.trust.eta));
  kv.emplace_back("s_min", fmt_double(c.trust.s_min));
  kv.emplace_back("s_init", fmt_double(c.trust.s_init));
  kv.emplace_back("sigma_max", fmt_double(c.recovery.sigma_max));
  kv.emplace_back("gamma_boot", fmt_double(c.recovery.gamma_boot));
  kv.emplace_back("gamma_loss", fmt_double(c.recovery.gamma_loss));
  kv.emplace_back("max_iters", std::to_string(c.solver.max_iters));
  kv.emplace_back("damping", fmt_double(c.solver.damping));
  kv.emplace_back("step_tol", fmt_double(c.solver.step_tol));
  kv.emplace_back("min_dist", fmt_double(c.solver.min_dist));
  return kv;
}

void apply_override(SwarmConfig& c, const std::string& key, const std::string& value) {
  if (key == "n_uavs") c.n_uavs = static_cast<int>(parse_int(key, value));
  else if (key == "n_epochs") c.n_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "bounds_min") c.bounds.min = parse_triple(key, value);
  else if (key == "bounds_max") c.bounds.max = parse_triple(key, value);
  else if (key == "step_scale") c.step_scale = parse_double(key, value);
  else if (key == "comm_radius") c.comm_radius = parse_double(key, value);
  else if (key == "noise_scale_min") c.noise_scale_min = parse_double(key, value);
  else if (key == "noise_scale_max") c.noise_scale_max = parse_double(key, value);
  else if (key == "vertical_factor") c.vertical_factor = parse_double(key, value);
  else if (key == "cold_start_epochs") c.cold_start_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "cold_start_inflation") c.cold_start_inflation = parse_double(key, value);
  else if (key == "loss_prob") c.loss_prob = parse_double(key, value);
  else if (key == "cohort_size") c.cohort_size = static_cast<int>(parse_int(key, value));
  else if (key == "malicious_fraction") c.malicious_fraction = parse_double(key, value);
  else if (key == "range_noise_base") c.range_noise_base = parse_double(key, value);
  else if (key == "range_noise_slope") c.range_noise_slope = parse_double(key, value);
  else if (key == "spoof_min") c.spoof_min = parse_double(key, value);
  else if (key == "spoof_max") c.spoof_max = parse_double(key, value);
  else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "trust_enabled") c.trust_enabled = parse_bool(key, value);
  else if (key == "alpha") c.link.alpha = parse_double(key, value);
  else if (key == "budget") c.link.budget = static_cast<int>(parse_int(key, value));
  else if (key == "q_min") c.link.q_min = parse_double(key, value);
  else if (key == "max_age") c.link.max_age = static_cast<int>(parse_int(key, value));
  else if (key == "lambda") c.trust.lambda = parse_double(key, value);
  else if (key == "eta") c.trust.eta = parse_double(key, value);
  else if (key == "s_min") c.trust.s_min = parse_double(key, value);
  else if (key == "s_init") c.trust.s_init = parse_double(key, value);
  else if (key == "sigma_max") c.recovery.sigma_max = parse_double(key, value);
  else if (key == "gamma_boot") c.recovery.gamma_boot = parse_double(key, value);
  else if (key == "gamma_loss") c.recovery.gamma_loss = parse_double(key, value);
  else if (key == "max_iters") c.solver.max_iters = static_cast<int>(parse_int(key, value));
  else if (key == "damping") c.solver.damping = parse_double(key, value);
  else if (key == "step_tol") c.solver.step_tol = parse_double(key, value);
  else if (key == "min_dist") c.solver.min_dist = parse_double(key, value);
  else throw ConfigError("unknown config field: " + key);
}

void apply_config_file(SwarmConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file " + path + " line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    apply_override(config, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

int effective_threads(int jobs, unsigned hardware,
                      const std::optional<std::string>& env_value) {
  int cap = hardware == 0 ? 1 : static_cast<int>(hardware);
  if (env_value.has_value()) {
    int parsed = 0;
    const auto* first = env_value->data();
    const auto* last = first + env_value->size();
    const auto [ptr, ec] = std::from_chars(first, last, parsed);
    if (ec == std::errc() && ptr == last && parsed >= 1) cap = std::min(cap, parsed);
  }
  return std::max(1, std::min(jobs, cap));
}

std::vector<std::vector<EpochMetrics>> run_seeds(const SwarmConfig& config,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 int threads) {
  std::vector<std::vector<EpochMetrics>> results(seeds.size());
  run_indexed(static_cast<int>(seeds.size()), threads, [&](int i) {
    SwarmConfig c = config;
    c.seed = seeds[static_cast<std::size_t>(i)];
    results[static_cast<std::size_t>(i)] = run_simulation(c);
  });
  return results;
}

namespace {

void write_snapshot(const ExperimentSpec& spec) {
  const int epoch = *spec.snapshot_epoch;
  if (epoch < 0 || epoch >= spec.config.n_epochs) {
    throw ConfigError("snapshot epoch must lie in [0, n_epochs)");
  }
  SwarmConfig c = spec.config;
  c.seed = spec.seeds.front();
  Simulator sim(c);
  while (sim.epoch() <= epoch) sim.step();

  nlohmann::json uavs = nlohmann::json::array();
  for (const auto& s : sim.snapshot()) {
    nlohmann::json u{{"uav_id", s.uav_id},
                     {"role", s.malicious ? "malicious" : "honest"},
                     {"cohort", s.cohort},
                     {"noise_scale_m", s.noise_scale},
                     {"truth", s.truth},
                     {"refined", s.refined},
                     {"refined_error_m", (s.refined - s.truth).norm()}};
    if (s.local.has_value()) {
      u["local"] = *s.local;
      u["local_error_m"] = (*s.local - s.truth).norm();
    } else {
      u["local"] = nullptr;
      u["local_error_m"] = nullptr;
    }
    uavs.push_back(u);
  }
  nlohmann::json doc{{"config", config_echo_json(c)},
                     {"seed", c.seed},
                     {"epoch", epoch},
                     {"uavs", uavs}};

  const std::string path = spec.out_path + ".snapshot.json";
  auto out = open_output(path);
  out << doc.dump(2) << "\n";
  finish_output(out, path);
}

}  // namespace

void run_single(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("at least one seed is required");
  const auto runs = run_seeds(spec.config, spec.seeds, spec.threads);
  const bool empty = spec.config.n_epochs == 0;
  AggregateSummary agg;
  if (!empty) agg = aggregate_runs(runs, spec.config.cold_start_epochs);

  if (spec.format == OutputFormat::kCsv) {
    auto out = open_output(spec.out_path);
    write_header_comments(out, "single", spec);
    out << "epoch,mean_local_error_m,mean_refined_error_m,p10_refined,p90_refined,"
           "n_flagged\n";
    for (int t = 0; t < spec.config.n_epochs; ++t) {
      const auto i = static_cast<std::size_t>(t);
      out << t << ',' << fmt_fixed(agg.mean_local[i]) << ','
          << fmt_fixed(agg.mean_refined[i]) << ',' << fmt_fixed(agg.p10_refined[i])
          << ',' << fmt_fixed(agg.p90_refined[i]) << ','
          << fmt_fixed(agg.mean_flagged[i]) << "\n";
    }
    finish_output(out, spec.out_path);
  } else {
    nlohmann::json epochs = nlohmann::json::array();
    for (int t = 0; t < spec.config.n_epochs; ++t) {
      const auto i = static_cast<std::size_t>(t);
      epochs.push_back(nlohmann::json{{"epoch", t},
                                      {"mean_local_error_m", agg.mean_local[i]},
                                      {"mean_refined_error_m", agg.mean_refined[i]},
                                      {"p10_refined", agg.p10_refined[i]},
                                      {"p90_refined", agg.p90_refined[i]},
                                      {"n_flagged", agg.mean_flagged[i]}});
    }
    nlohmann::json doc{{"mode", "single"},
                       {"config", config_echo_json(spec.config)},
                       {"seeds", spec.seeds},
                       {"epochs", epochs}};
    auto out = open_output(spec.out_path);
    out << doc.dump(2) << "\n";
    finish_output(out, spec.out_path);
  }

  if (spec.snapshot_epoch.has_value()) write_snapshot(spec);
}

void run_cohort(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("at least one seed is required");
  if (spec.config.n_epochs < 1) {
    throw ConfigError("n_epochs must be >= 1 for the cohort experiment");
  }
  const auto runs = run_seeds(spec.config, spec.seeds, spec.threads);
  const AggregateSummary agg = aggregate_runs(runs, spec.config.cold_start_epochs);

  nlohmann::json doc{
      {"mode", "cohort"},
      {"config", config_echo_json(spec.config)},
      {"seeds", spec.seeds},
      {"cold_window", window_json(agg.cold_window)},
      {"post_window", window_json(agg.post_window)},
      {"recovery",
       {{"threshold_m", kRecoveryThresholdM},
        {"consecutive_epochs", kRecoveryConsecutiveEpochs},
        {"refined", recovery_json(agg.recovery_refined)},
        {"local", recovery_json(agg.recovery_local)}}},
      {"per_epoch",
       {{"mean_local_error_m", agg.mean_local},
        {"mean_refined_error_m", agg.mean_refined},
        {"p10_refined", agg.p10_refined},
        {"p90_refined", agg.p90_refined},
        {"mean_flagged", agg.mean_flagged}}}};

  auto out = open_output(spec.out_path);
  out << doc.dump(2) << "\n";
  finish_output(out, spec.out_path);

  if (spec.snapshot_epoch.has_value()) write_snapshot(spec);
}

void run_sweep(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("at least one seed is required");
  if (spec.config.n_epochs < 1) {
    throw ConfigError("n_epochs must be >= 1 for the sweep experiment");
  }
  if (spec.fractions.empty()) throw ConfigError("at least one fraction is required");
  for (double f : spec.fractions) {
    if (!(f >= 0.0 && f <= 0.5)) {
      throw ConfigError("malicious_fraction must lie in [0, 0.5]");
    }
  }

  struct Job {
    double fraction;
    bool trust_on;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double f : spec.fractions) {
    for (bool trust_on : {false, true}) {
      for (std::uint64_t s : spec.seeds) jobs.push_back({f, trust_on, s});
    }
  }

  std::vector<double> final_errors(jobs.size());
  run_indexed(static_cast<int>(jobs.size()), spec.threads, [&](int i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    SwarmConfig c = spec.config;
    c.malicious_fraction = job.fraction;
    c.trust_enabled = job.trust_on;
    c.seed = job.seed;
    const auto metrics = run_simulation(c);
    final_errors[static_cast<std::size_t>(i)] = metrics.back().mean_refined_error_m;
  });

  struct Row {
    double fraction;
    bool trust_on;
    double mean, p10, p90;
  };
  std::vector<Row> rows;
  const std::size_t per_mode = spec.seeds.size();
  std::size_t cursor = 0;
  for (double f : spec.fractions) {
    for (bool trust_on : {false, true}) {
      std::vector<double> errs(final_errors.begin() + static_cast<std::ptrdiff_t>(cursor),
                               final_errors.begin() +
                                   static_cast<std::ptrdiff_t>(cursor + per_mode));
      cursor += per_mode;
      Row row{f, trust_on, mean_of(errs), percentile(errs, 0.10), percentile(errs, 0.90)};
      rows.push_back(row);
    }
  }

  if (spec.format == OutputFormat::kCsv) {
    auto out = open_output(spec.out_path);
    write_header_comments(out, "sweep", spec);
    out << "fraction,trust,final_epoch_mean_error_m,p10,p90\n";
    for (const auto& r : rows) {
      out << fmt_double(r.fraction) << ',' << (r.trust_on ? "on" : "off") << ','
          << fmt_fixed(r.mean) << ',' << fmt_fixed(r.p10) << ',' << fmt_fixed(r.p90)
          << "\n";
    }
    finish_output(out, spec.out_path);
  } else {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
      rows_json.push_back(nlohmann::json{{"fraction", r.fraction},
                                         {"trust", r.trust_on ? "on" : "off"},
                                         {"final_epoch_mean_error_m", r.mean},
                                         {"p10", r.p10},
                                         {"p90", r.p90}});
    }
    nlohmann::json doc{{"mode", "sweep"},
                       {"config", config_echo_json(spec.config)},
                       {"seeds", spec.seeds},
                       {"rows", rows_json}};
    auto out = open_output(spec.out_path);
    out << doc.dump(2) << "\n";
    finish_output(out, spec.out_path);
  }

  if (spec.snapshot_epoch.has_value()) write_snapshot(spec);
}

}  // namespace swarm
