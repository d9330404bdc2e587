#include "swarm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace swarm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream purposes; values are part of the reproducibility contract.
enum Purpose : std::uint64_t {
  kInitPosition = 1,
  kNoiseScale = 2,
  kRoles = 3,
  kCohort = 4,
  kMotion = 5,
  kSense = 6,
  kLoss = 7,
  kRange = 8,
  kSpoof = 9,
};

double mean_ignoring_nan(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? kNaN : sum / n;
}

}  // namespace

void validate_config(const SwarmConfig& c) {
  std::vector<std::string> bad;
  auto check = [&bad](bool ok, const std::string& msg) {
    if (!ok) bad.push_back(msg);
  };

  check(c.n_uavs >= 1, "n_uavs must be >= 1");
  check(c.n_epochs >= 0, "n_epochs must be >= 0");
  bool bounds_ok = true;
  for (int a = 0; a < 3; ++a) {
    bounds_ok = bounds_ok && std::isfinite(c.bounds.min[a]) &&
                std::isfinite(c.bounds.max[a]) && c.bounds.max[a] > c.bounds.min[a];
  }
  check(bounds_ok, "bounds must satisfy max > min on every axis");
  check(c.step_scale >= 0.0 && std::isfinite(c.step_scale),
        "step_scale must be >= 0");
  check(c.comm_radius > 0.0 && std::isfinite(c.comm_radius),
        "comm_radius must be > 0");
  check(c.noise_scale_min >= 0.0 && c.noise_scale_max >= c.noise_scale_min &&
            std::isfinite(c.noise_scale_max),
        "noise_scale_min/noise_scale_max must satisfy 0 <= min <= max");
  check(c.noise_scale_min > 0.0 || c.noise_scale_min == c.noise_scale_max,
        "noise_scale_min must be > 0 unless equal to noise_scale_max");
  check(c.vertical_factor > 0.0 && std::isfinite(c.vertical_factor),
        "vertical_factor must be > 0");
  check(c.cold_start_epochs >= 0, "cold_start_epochs must be >= 0");
  check(c.cold_start_inflation >= 1.0 && std::isfinite(c.cold_start_inflation),
        "cold_start_inflation must be >= 1");
  check(c.loss_prob >= 0.0 && c.loss_prob <= 1.0, "loss_prob must lie in [0, 1]");
  check(c.cohort_size >= 0 && c.cohort_size <= c.n_uavs,
        "cohort_size must lie in [0, n_uavs]");
  check(c.malicious_fraction >= 0.0 && c.malicious_fraction <= 0.5,
        "malicious_fraction must lie in [0, 0.5]");
  check(c.range_noise_base >= 0.0 && std::isfinite(c.range_noise_base),
        "range_noise_base must be >= 0");
  check(c.range_noise_slope >= 0.0 && std::isfinite(c.range_noise_slope),
        "range_noise_slope must be >= 0");
  check(c.spoof_min >= 0.0 && c.spoof_max >= c.spoof_min && std::isfinite(c.spoof_max),
        "spoof_min/spoof_max must satisfy 0 <= min <= max");

  check(c.link.alpha >= 0.0 && c.link.alpha <= 1.0, "alpha must lie in [0, 1]");
  check(c.link.budget >= 1, "budget must be >= 1");
  check(c.link.q_min >= 0.0 && c.link.q_min < 1.0, "q_min must lie in [0, 1)");
  check(c.link.max_age >= 0, "max_age must be >= 0");

  check(c.trust.lambda > 0.0 && std::isfinite(c.trust.lambda), "lambda must be > 0");
  check(c.trust.eta >= 0.0 && c.trust.eta <= 1.0, "eta must lie in [0, 1]");
  check(c.trust.s_min > 0.0 && c.trust.s_min < 1.0, "s_min must lie in (0, 1)");
  check(c.trust.s_init > 0.0 && c.trust.s_init <= 1.0, "s_init must lie in (0, 1]");

  check(c.recovery.sigma_max > 0.0 && std::isfinite(c.recovery.sigma_max),
        "sigma_max must be > 0");
  check(c.recovery.gamma_boot >= 1.0 && std::isfinite(c.recovery.gamma_boot),
        "gamma_boot must be >= 1");
  check(c.recovery.gamma_loss >= 1.0 && std::isfinite(c.recovery.gamma_loss),
        "gamma_loss must be >= 1");

  check(c.solver.max_iters >= 1, "max_iters must be >= 1");
  check(c.solver.damping > 0.0 && std::isfinite(c.solver.damping),
        "damping must be > 0");
  check(c.solver.step_tol > 0.0, "step_tol must be > 0");
  check(c.solver.min_dist > 0.0, "min_dist must be > 0");

  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "invalid config: ";
    for (std::size_t i = 0; i < bad.size(); ++i) {
      if (i > 0) msg << "; ";
      msg << bad[i];
    }
    throw ConfigError(msg.str());
  }
}

void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = nlohmann::json{{"epoch", m.epoch},
                     {"mean_local_error_m", m.mean_local_error_m},
                     {"mean_refined_error_m", m.mean_refined_error_m},
                     {"local_errors_m", m.local_errors_m},
                     {"refined_errors_m", m.refined_errors_m},
                     {"loss_flags", m.loss_flags},
                     {"flagged_count", m.flagged_count},
                     {"trust_mean", m.trust_mean}};
}

Vec3 reflect_into(const Box& bounds, Vec3 p) {
  if (!is_finite(p)) throw std::invalid_argument("position must be finite");
  for (int a = 0; a < 3; ++a) {
    double x = p[a];
    const double lo = bounds.min[a];
    const double hi = bounds.max[a];
    while (x < lo || x > hi) {
      if (x < lo) x = 2.0 * lo - x;
      if (x > hi) x = 2.0 * hi - x;
    }
    p[a] = x;
  }
  return p;
}

Vec3 step_motion(const Vec3& p, double step_scale, const Box& bounds, RngStream& rng) {
  const Vec3 step(step_scale * rng.gaussian(), step_scale * rng.gaussian(),
                  step_scale * rng.gaussian());
  return reflect_into(bounds, p + step);
}

StateSummary sense_local(UavId uav_id, int epoch, const Vec3& truth, double h_std,
                         double vertical_factor, RngStream& rng) {
  if (!(h_std >= 0.0) || !std::isfinite(h_std)) {
    throw std::invalid_argument("sensing std must be >= 0");
  }
  const double v_std = h_std * vertical_factor;
  const Vec3 noisy(truth.x() + h_std * rng.gaussian(),
                   truth.y() + h_std * rng.gaussian(),
                   truth.z() + v_std * rng.gaussian());
  const double rep_h = std::max(h_std, kMinSensingStd);
  const double rep_v = std::max(v_std, kMinSensingStd);
  return StateSummary::fix(uav_id, epoch, noisy,
                           make_cov_diag(rep_h * rep_h, rep_h * rep_h, rep_v * rep_v));
}

RangeObservation measure_range(double true_dist, double base, double slope,
                               RngStream& rng) {
  if (!(true_dist >= 0.0)) throw std::invalid_argument("distance must be >= 0");
  const double sigma = base + slope * true_dist;
  const double d_hat = std::max(0.0, true_dist + sigma * rng.gaussian());
  return RangeObservation(d_hat, std::max(sigma, kMinSensingStd));
}

LinkObservables link_observables_from_distance(double dist, double comm_radius) {
  const double v = std::clamp(1.0 - dist / comm_radius, 0.0, 1.0);
  return LinkObservables{v, v};
}

Vec3 spoof_report(const Vec3& truth, double spoof_min, double spoof_max,
                  RngStream& rng) {
  Vec3 dir;
  double norm = 0.0;
  do {
    dir = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
    norm = dir.norm();
  } while (norm < 1e-12);
  const double magnitude = rng.uniform(spoof_min, spoof_max);
  return truth + (magnitude / norm) * dir;
}

RngStream Simulator::stream(std::uint64_t purpose, std::uint64_t entity) const {
  return RngStream(derive_seed(config_.seed, purpose, entity,
                               static_cast<std::uint64_t>(epoch_)));
}

Simulator::Simulator(const SwarmConfig& config) : config_(config) {
  validate_config(config_);

  const Vec3 center = 0.5 * (config_.bounds.min + config_.bounds.max);
  const Vec3 half = 0.5 * (config_.bounds.max - config_.bounds.min);
  pipeline_params_ = PipelineParams{
      config_.link,
      config_.trust,
      config_.recovery,
      config_.solver,
      Prior{center, make_cov_diag(half.x() * half.x(), half.y() * half.y(),
                                  half.z() * half.z())},
      config_.trust_enabled};

  const int n = config_.n_uavs;
  uavs_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& uav = uavs_[static_cast<std::size_t>(i)];
    RngStream pos_rng(derive_seed(config_.seed, kInitPosition, static_cast<std::uint64_t>(i)));
    for (int a = 0; a < 3; ++a) {
      uav.truth[a] = pos_rng.uniform(config_.bounds.min[a], config_.bounds.max[a]);
    }
    RngStream noise_rng(derive_seed(config_.seed, kNoiseScale, static_cast<std::uint64_t>(i)));
    uav.noise_scale = noise_rng.log_uniform(config_.noise_scale_min, config_.noise_scale_max);
  }

  const int n_malicious =
      static_cast<int>(std::lround(config_.malicious_fraction * n));
  RngStream role_rng(derive_seed(config_.seed, kRoles));
  for (int id : role_rng.sample(n, n_malicious)) {
    uavs_[static_cast<std::size_t>(id)].malicious = true;
  }
  RngStream cohort_rng(derive_seed(config_.seed, kCohort));
  for (int id : cohort_rng.sample(n, config_.cohort_size)) {
    uavs_[static_cast<std::size_t>(id)].cohort = true;
  }
}

EpochMetrics Simulator::step() {
  if (done()) throw std::logic_error("simulation already finished");
  const int t = epoch_;
  const int n = config_.n_uavs;

  for (int i = 0; i < n; ++i) {
    auto& uav = uavs_[static_cast<std::size_t>(i)];
    RngStream rng = stream(kMotion, static_cast<std::uint64_t>(i));
    uav.truth = step_motion(uav.truth, config_.step_scale, config_.bounds, rng);
  }

  const bool cold = t < config_.cold_start_epochs;
  std::vector<StateSummary> locals;
  locals.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& uav = uavs_[static_cast<std::size_t>(i)];
    bool missing = cold && uav.cohort;
    if (!cold && config_.loss_prob > 0.0) {
      RngStream loss_rng = stream(kLoss, static_cast<std::uint64_t>(i));
      missing = loss_rng.bernoulli(config_.loss_prob);
    }
    if (missing) {
      locals.push_back(StateSummary::missing(i, t));
      continue;
    }
    const double inflation = cold ? config_.cold_start_inflation : 1.0;
    RngStream sense_rng = stream(kSense, static_cast<std::uint64_t>(i));
    locals.push_back(sense_local(i, t, uav.truth, uav.noise_scale * inflation,
                                 config_.vertical_factor, sense_rng));
  }

  // What each UAV broadcasts this epoch: its previous refined state if it
  // has one, otherwise its current fix. Malicious senders substitute a
  // spoofed position for wherever they actually are.
  std::vector<std::optional<std::pair<Vec3, Cov3>>> reports(
      static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const auto& uav = uavs_[static_cast<std::size_t>(j)];
    std::optional<std::pair<Vec3, Cov3>> honest;
    if (uav.pipeline.last_refined.has_value()) {
      honest = {uav.pipeline.last_refined->position,
                uav.pipeline.last_refined->covariance};
    } else if (locals[static_cast<std::size_t>(j)].has_fix()) {
      honest = {*locals[static_cast<std::size_t>(j)].position(),
                *locals[static_cast<std::size_t>(j)].covariance()};
    }
    if (uav.malicious) {
      RngStream spoof_rng = stream(kSpoof, static_cast<std::uint64_t>(j));
      const Vec3 spoofed =
          spoof_report(uav.truth, config_.spoof_min, config_.spoof_max, spoof_rng);
      const Cov3 cov =
          honest ? honest->second : make_cov_diag(1.0, 1.0, 1.0);
      reports[static_cast<std::size_t>(j)] = {spoofed, cov};
    } else {
      reports[static_cast<std::size_t>(j)] = honest;
    }
  }

  // Proximity graph with one shared range observation per pair.
  std::vector<std::vector<std::pair<int, double>>> adjacency(
      static_cast<std::size_t>(n));
  std::map<std::pair<int, int>, RangeObservation> pair_ranges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dist = (uavs_[static_cast<std::size_t>(i)].truth -
                           uavs_[static_cast<std::size_t>(j)].truth)
                              .norm();
      if (dist > config_.comm_radius) continue;
      RngStream range_rng =
          stream(kRange, static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) +
                             static_cast<std::uint64_t>(j));
      pair_ranges.emplace(std::make_pair(i, j),
                          measure_range(dist, config_.range_noise_base,
                                        config_.range_noise_slope, range_rng));
      adjacency[static_cast<std::size_t>(i)].push_back({j, dist});
      adjacency[static_cast<std::size_t>(j)].push_back({i, dist});
    }
  }

  std::vector<RefinedState> refined;
  refined.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<NeighborMessage> inbox;
    std::map<UavId, RangeObservation> ranges;
    auto& neighbors = adjacency[static_cast<std::size_t>(i)];
    std::sort(neighbors.begin(), neighbors.end());
    for (const auto& [j, dist] : neighbors) {
      const auto& report = reports[static_cast<std::size_t>(j)];
      if (!report.has_value()) continue;
      inbox.push_back(NeighborMessage{
          j, StateSummary::fix(j, t, report->first, report->second), t,
          link_observables_from_distance(dist, config_.comm_radius)});
      ranges.emplace(j, pair_ranges.at(std::minmax(i, j)));
    }
    auto& uav = uavs_[static_cast<std::size_t>(i)];
    refined.push_back(refine_epoch(locals[static_cast<std::size_t>(i)], inbox, ranges,
                                   uav.pipeline, pipeline_params_, t));
  }

  EpochMetrics metrics;
  metrics.epoch = t;
  metrics.local_errors_m.resize(static_cast<std::size_t>(n), kNaN);
  metrics.refined_errors_m.resize(static_cast<std::size_t>(n), 0.0);
  metrics.loss_flags.resize(static_cast<std::size_t>(n), false);
  std::vector<double> honest_local;
  std::vector<double> honest_refined;
  double trust_sum = 0.0;
  int trust_count = 0;
  for (int i = 0; i < n; ++i) {
    const auto& uav = uavs_[static_cast<std::size_t>(i)];
    const auto& local = locals[static_cast<std::size_t>(i)];
    metrics.loss_flags[static_cast<std::size_t>(i)] = !local.has_fix();
    if (local.has_fix()) {
      metrics.local_errors_m[static_cast<std::size_t>(i)] =
          (*local.position() - uav.truth).norm();
    }
    metrics.refined_errors_m[static_cast<std::size_t>(i)] =
        (refined[static_cast<std::size_t>(i)].position - uav.truth).norm();
    if (uav.malicious) continue;
    // The local-vs-refined comparison is paired: both means cover exactly the
    // honest UAVs holding a local fix this epoch, so the two curves describe
    // the same population. UAVs riding out an outage still appear in the
    // per-UAV refined error array.
    if (local.has_fix()) {
      honest_local.push_back(metrics.local_errors_m[static_cast<std::size_t>(i)]);
      honest_refined.push_back(metrics.refined_errors_m[static_cast<std::size_t>(i)]);
    }
    metrics.flagged_count += static_cast<int>(uav.pipeline.trust.flagged.size());
    for (const auto& [id, s] : uav.pipeline.trust.smoothed) {
      trust_sum += s;
      ++trust_count;
    }
  }
  metrics.mean_local_error_m = mean_ignoring_nan(honest_local);
  metrics.mean_refined_error_m = mean_ignoring_nan(honest_refined);
  metrics.trust_mean = trust_count == 0 ? kNaN : trust_sum / trust_count;

  last_locals_ = std::move(locals);
  last_refined_ = std::move(refined);
  epoch_ = t + 1;
  return metrics;
}

std::vector<UavSnapshot> Simulator::snapshot() const {
  if (last_refined_.empty()) {
    throw std::logic_error("no epoch has run yet");
  }
  std::vector<UavSnapshot> out;
  out.reserve(uavs_.size());
  for (std::size_t i = 0; i < uavs_.size(); ++i) {
    const auto& uav = uavs_[i];
    UavSnapshot snap{static_cast<UavId>(i), uav.malicious,   uav.cohort,
                     uav.noise_scale,       uav.truth,       std::nullopt,
                     last_refined_[i].position};
    if (last_locals_[i].has_fix()) snap.local = *last_locals_[i].position();
    out.push_back(snap);
  }
  return out;
}

std::vector<EpochMetrics> run_simulation(const SwarmConfig& config) {
  Simulator sim(config);
  std::vector<EpochMetrics> metrics;
  metrics.reserve(static_cast<std::size_t>(config.n_epochs));
  while (!sim.done()) metrics.push_back(sim.step());
  return metrics;
}

double percentile(std::vector<double> values, double q) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return kNaN;
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

namespace {

// Mean of a per-epoch series over [begin, end), NaN entries skipped.
double window_mean(const std::vector<double>& series, int begin, int end) {
  std::vector<double> slice;
  for (int t = begin; t < end && t < static_cast<int>(series.size()); ++t) {
    slice.push_back(series[static_cast<std::size_t>(t)]);
  }
  return mean_ignoring_nan(slice);
}

std::optional<int> recovery_epoch(const std::vector<double>& series, int from) {
  const int n = static_cast<int>(series.size());
  for (int e = from; e + kRecoveryConsecutiveEpochs <= n; ++e) {
    bool ok = true;
    for (int k = 0; k < kRecoveryConsecutiveEpochs; ++k) {
      const double v = series[static_cast<std::size_t>(e + k)];
      if (!(v <= kRecoveryThresholdM)) {
        ok = false;
        break;
      }
    }
    if (ok) return e;
  }
  return std::nullopt;
}

WindowStats window_stats(const std::vector<double>& local_means,
                         const std::vector<double>& refined_means) {
  WindowStats w;
  w.local_mean = mean_ignoring_nan(local_means);
  w.refined_mean = mean_ignoring_nan(refined_means);
  int wins = 0;
  int considered = 0;
  for (std::size_t r = 0; r < local_means.size(); ++r) {
    if (std::isnan(local_means[r]) || std::isnan(refined_means[r])) continue;
    ++considered;
    if (refined_means[r] < local_means[r]) ++wins;
  }
  w.win_rate = considered == 0 ? kNaN : static_cast<double>(wins) / considered;
  w.local_p10 = percentile(local_means, 0.10);
  w.local_p90 = percentile(local_means, 0.90);
  w.refined_p10 = percentile(refined_means, 0.10);
  w.refined_p90 = percentile(refined_means, 0.90);
  return w;
}

RecoveryStats recovery_stats(const std::vector<std::vector<double>>& series_per_run,
                             int from) {
  RecoveryStats stats;
  std::vector<double> epochs;
  for (const auto& series : series_per_run) {
    const auto e = recovery_epoch(series, from);
    stats.per_run.push_back(e);
    if (e.has_value()) {
      ++stats.recovered_runs;
      epochs.push_back(static_cast<double>(*e));
    }
  }
  stats.median_epoch = percentile(epochs, 0.5);
  stats.p90_epoch = percentile(epochs, 0.9);
  return stats;
}

}  // namespace

AggregateSummary aggregate_runs(const std::vector<std::vector<EpochMetrics>>& runs,
                                int cold_start_epochs) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  const std::size_t n_epochs = runs.front().size();
  for (const auto& run : runs) {
    if (run.size() != n_epochs) {
      throw std::invalid_argument("runs have differing epoch counts");
    }
  }

  AggregateSummary out;
  out.n_runs = static_cast<int>(runs.size());
  out.n_epochs = static_cast<int>(n_epochs);

  std::vector<std::vector<double>> local_series(runs.size());
  std::vector<std::vector<double>> refined_series(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& m : runs[r]) {
      local_series[r].push_back(m.mean_local_error_m);
      refined_series[r].push_back(m.mean_refined_error_m);
    }
  }

  for (std::size_t t = 0; t < n_epochs; ++t) {
    std::vector<double> locals, refineds, flags;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      locals.push_back(local_series[r][t]);
      refineds.push_back(refined_series[r][t]);
      flags.push_back(static_cast<double>(runs[r][t].flagged_count));
    }
    out.mean_local.push_back(mean_ignoring_nan(locals));
    out.mean_refined.push_back(mean_ignoring_nan(refineds));
    out.p10_refined.push_back(percentile(refineds, 0.10));
    out.p90_refined.push_back(percentile(refineds, 0.90));
    out.mean_flagged.push_back(mean_ignoring_nan(flags));
  }

  const int t_total = static_cast<int>(n_epochs);
  const int cold_end = std::min(std::max(cold_start_epochs, 0), t_total);

  std::vector<double> cold_local, cold_refined, post_local, post_refined;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    cold_local.push_back(window_mean(local_series[r], 0, cold_end));
    cold_refined.push_back(window_mean(refined_series[r], 0, cold_end));
    post_local.push_back(window_mean(local_series[r], cold_end, t_total));
    post_refined.push_back(window_mean(refined_series[r], cold_end, t_total));
  }
  out.cold_window = window_stats(cold_local, cold_refined);
  out.post_window = window_stats(post_local, post_refined);

  out.recovery_refined = recovery_stats(refined_series, cold_end);
  out.recovery_local = recovery_stats(local_series, cold_end);
  return out;
}

}  // namespace swarm
