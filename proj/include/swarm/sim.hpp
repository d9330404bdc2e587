#pragma once

// Swarm Monte-Carlo harness: seeded world evolution (random-walk motion,
// heterogeneous sensing, ranging, spoofing adversaries), the per-epoch
// message exchange, and aggregation across runs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swarm/recovery.hpp"
#include "swarm/rng.hpp"
#include "swarm/types.hpp"

namespace swarm {

struct Box {
  Vec3 min{0.0, 0.0, 0.0};
  Vec3 max{50.0, 50.0, 50.0};
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SwarmConfig {
  int n_uavs = 10;
  int n_epochs = 30;
  Box bounds;
  double step_scale = 1.0;    // per-epoch random-walk std, meters
  double comm_radius = 30.0;  // meters

  // Per-UAV horizontal sensing std is drawn log-uniformly from this range
  // once per run; vertical std is vertical_factor times larger.
  double noise_scale_min = 0.5;
  double noise_scale_max = 4.0;
  double vertical_factor = 2.0;

  // During the first cold_start_epochs epochs, cohort members produce no
  // fix at all and everyone else senses with std scaled by
  // cold_start_inflation. Afterwards fixes drop out independently with
  // probability loss_prob per epoch.
  int cold_start_epochs = 10;
  double cold_start_inflation = 4.0;
  double loss_prob = 0.05;
  int cohort_size = 4;

  double malicious_fraction = 0.0;  // in [0, 0.5]; count = round(fraction * n)
  double range_noise_base = 1.75;   // sigma_d = base + slope * distance
  double range_noise_slope = 0.05;
  double spoof_min = 15.0;  // spoofed-report offset magnitude range, meters
  double spoof_max = 30.0;

  std::uint64_t seed = 1;
  bool trust_enabled = true;

  LinkParams link;
  TrustParams trust;
  RecoveryParams recovery;
  SolverParams solver;
};

// Throws ConfigError naming every violated field.
void validate_config(const SwarmConfig& config);

// Mean reported-covariance floor so degenerate zero-noise configurations
// still produce valid (positive definite) uncertainties.
inline constexpr double kMinSensingStd = 0.01;

struct EpochMetrics {
  int epoch = 0;
  // Paired means over the honest UAVs holding a local fix this epoch, so the
  // local and refined curves describe the same population; NaN when none.
  // Fixless UAVs (outages, cold-start cohort) still appear in the per-UAV
  // refined array below.
  double mean_local_error_m = 0.0;
  double mean_refined_error_m = 0.0;
  std::vector<double> local_errors_m;    // per UAV, NaN when no fix
  std::vector<double> refined_errors_m;  // per UAV
  std::vector<bool> loss_flags;          // per UAV: true when no local fix
  int flagged_count = 0;  // flagged neighbors summed over honest receivers
  double trust_mean = 0.0;  // mean smoothed trust across honest ledgers
};

void to_json(nlohmann::json& j, const EpochMetrics& m);

// World-evolution pieces, exposed for direct testing.

// Reflects p into the box, axis by axis.
Vec3 reflect_into(const Box& bounds, Vec3 p);

// Gaussian random-walk step with reflective boundaries.
Vec3 step_motion(const Vec3& p, double step_scale, const Box& bounds, RngStream& rng);

// Noisy local fix: truth plus axis-wise Gaussian noise with horizontal std
// h_std and vertical std h_std * vertical_factor. The reported covariance is
// the generating one, floored at kMinSensingStd per axis.
StateSummary sense_local(UavId uav_id, int epoch, const Vec3& truth, double h_std,
                         double vertical_factor, RngStream& rng);

// sigma_d = base + slope * true_dist; measurement clamped at zero.
RangeObservation measure_range(double true_dist, double base, double slope,
                               RngStream& rng);

// Both observables fall off linearly with distance: clamp(1 - d/R, 0, 1).
LinkObservables link_observables_from_distance(double dist, double comm_radius);

// Truth plus an offset in a uniformly random direction with magnitude drawn
// uniformly from [spoof_min, spoof_max].
Vec3 spoof_report(const Vec3& truth, double spoof_min, double spoof_max,
                  RngStream& rng);

struct UavSnapshot {
  UavId uav_id;
  bool malicious;
  bool cohort;
  double noise_scale;
  Vec3 truth;
  std::optional<Vec3> local;
  Vec3 refined;
};

// One seeded world. step() advances motion, sensing, message exchange and
// every UAV's refinement pipeline by one epoch, returning that epoch's
// metrics. All randomness comes from streams keyed by (seed, purpose,
// entity, epoch), so any two configurations sharing a seed see identical
// worlds wherever their stochastic inputs coincide.
class Simulator {
 public:
  explicit Simulator(const SwarmConfig& config);

  const SwarmConfig& config() const { return config_; }
  int epoch() const { return epoch_; }
  bool done() const { return epoch_ >= config_.n_epochs; }

  EpochMetrics step();

  // State after the most recent step.
  std::vector<UavSnapshot> snapshot() const;

  const Vec3& truth(int i) const { return uavs_.at(static_cast<std::size_t>(i)).truth; }
  bool is_malicious(int i) const {
    return uavs_.at(static_cast<std::size_t>(i)).malicious;
  }
  bool in_cohort(int i) const { return uavs_.at(static_cast<std::size_t>(i)).cohort; }
  double noise_scale(int i) const {
    return uavs_.at(static_cast<std::size_t>(i)).noise_scale;
  }
  const UavPipelineState& pipeline(int i) const {
    return uavs_.at(static_cast<std::size_t>(i)).pipeline;
  }

 private:
  struct Uav {
    Vec3 truth;
    double noise_scale = 1.0;
    bool malicious = false;
    bool cohort = false;
    UavPipelineState pipeline;
  };

  RngStream stream(std::uint64_t purpose, std::uint64_t entity) const;

  SwarmConfig config_;
  PipelineParams pipeline_params_;
  std::vector<Uav> uavs_;
  int epoch_ = 0;
  std::vector<StateSummary> last_locals_;
  std::vector<RefinedState> last_refined_;
};

// Runs all epochs and returns per-epoch metrics.
std::vector<EpochMetrics> run_simulation(const SwarmConfig& config);

// Cross-run aggregation.

inline constexpr double kRecoveryThresholdM = 5.0;
inline constexpr int kRecoveryConsecutiveEpochs = 3;

// Linear-interpolation percentile of the finite entries; NaN when empty.
double percentile(std::vector<double> values, double q);

struct WindowStats {
  double local_mean = 0.0;
  double refined_mean = 0.0;
  double win_rate = 0.0;  // fraction of runs where refined beats local
  double local_p10 = 0.0, local_p90 = 0.0;
  double refined_p10 = 0.0, refined_p90 = 0.0;
};

struct RecoveryStats {
  std::vector<std::optional<int>> per_run;
  int recovered_runs = 0;
  double median_epoch = 0.0;  // over recovered runs; NaN when none
  double p90_epoch = 0.0;
};

struct AggregateSummary {
  int n_runs = 0;
  int n_epochs = 0;
  std::vector<double> mean_local;
  std::vector<double> mean_refined;
  std::vector<double> p10_refined;
  std::vector<double> p90_refined;
  std::vector<double> mean_flagged;
  WindowStats cold_window;  // epochs [0, cold_start); NaNs when empty
  WindowStats post_window;  // epochs [cold_start, n_epochs)
  RecoveryStats recovery_refined;  // error <= 5 m for 3 consecutive epochs
  RecoveryStats recovery_local;
};

// Throws std::invalid_argument on empty or ragged input.
AggregateSummary aggregate_runs(const std::vector<std::vector<EpochMetrics>>& runs,
                                int cold_start_epochs);

}  // namespace swarm
