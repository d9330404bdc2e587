// Acceptance gate for the refinement stack. Each criterion prints exactly one
// "A# <name>: PASS|FAIL (<measurements>)" line; the process exits nonzero if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "swarm/experiment.hpp"

namespace {

int g_failures = 0;

void report(const char* line, bool pass, const std::string& detail) {
  std::printf("%s: %s (%s)\n", line, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

int worker_count() {
  return swarm::effective_threads(8, std::thread::hardware_concurrency(),
                                  std::nullopt);
}

double mean_finite(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Independent closed-form check: subtracting the first sphere equation from
// the others linearizes the system exactly for consistent ranges, so an
// ordinary least-squares solve recovers the position without iteration.
swarm::Vec3 trilaterate(const std::vector<swarm::Vec3>& anchors,
                        const std::vector<double>& dists) {
  const int n = static_cast<int>(anchors.size());
  Eigen::MatrixXd a(n - 1, 3);
  Eigen::VectorXd b(n - 1);
  for (int i = 1; i < n; ++i) {
    a.row(i - 1) = 2.0 * (anchors[static_cast<std::size_t>(i)] - anchors[0]).transpose();
    b(i - 1) = anchors[static_cast<std::size_t>(i)].squaredNorm() -
               anchors[0].squaredNorm() -
               dists[static_cast<std::size_t>(i)] * dists[static_cast<std::size_t>(i)] +
               dists[0] * dists[0];
  }
  return a.colPivHouseholderQr().solve(b);
}

// --------------------------------------------------------------------------
// A1: the solver agrees with the closed-form solution on randomized noiseless
// instances with a weak prior and well-conditioned anchor geometry.
void check_a1() {
  const auto t0 = std::chrono::steady_clock::now();
  swarm::RngStream rng(1001);
  swarm::SolverParams params;  // correctness check: let the solve converge
  params.max_iters = 30;
  params.step_tol = 1e-9;

  int ok = 0, attempted = 0, guard = 0;
  while (attempted < 200 && ++guard < 4000) {
    const swarm::Vec3 truth(rng.uniform(5, 45), rng.uniform(5, 45),
                            rng.uniform(5, 45));
    const int n = 4 + static_cast<int>(rng.below(5));
    std::vector<swarm::Vec3> anchors;
    std::vector<double> dists;
    std::vector<swarm::NeighborConstraint> constraints;
    while (static_cast<int>(anchors.size()) < n) {
      const swarm::Vec3 a(rng.uniform(0, 50), rng.uniform(0, 50),
                          rng.uniform(0, 50));
      if ((a - truth).norm() < 2.0) continue;
      anchors.push_back(a);
      const double d = (truth - a).norm();
      dists.push_back(d);
      constraints.push_back({a, swarm::RangeObservation(d, 0.5), 1.0});
    }
    // Exclude ill-conditioned (nearly coplanar) geometry before judging.
    Eigen::MatrixXd rel(n - 1, 3);
    for (int i = 1; i < n; ++i) {
      rel.row(i - 1) = (anchors[static_cast<std::size_t>(i)] - anchors[0]).transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rel);
    if (svd.singularValues().minCoeff() < 3.0) continue;
    ++attempted;

    const swarm::Vec3 oracle = trilaterate(anchors, dists);
    const swarm::Vec3 prior =
        truth + swarm::Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const auto refined = swarm::refine_position(
        prior, swarm::make_cov_diag(1e6, 1e6, 1e6), constraints, params, 0);
    if ((refined.position - oracle).norm() <= 1e-3) ++ok;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const bool pass = attempted == 200 && ok >= 198 && seconds < 5.0;
  report("A1 solver matches an independent trilateration oracle", pass,
         fmt("%d/%d instances within 1e-3 m, %.2f s", ok, attempted, seconds));
}

// --------------------------------------------------------------------------
// A2 + A3: cold-start benefit and post-window win rate over 100 seeded runs
// of the default cohort scenario.
void check_a2_a3() {
  swarm::SwarmConfig config;  // shipped defaults
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 100; ++s) seeds.push_back(s);
  const auto runs = swarm::run_seeds(config, seeds, worker_count());
  const auto agg = swarm::aggregate_runs(runs, config.cold_start_epochs);

  const auto& cold = agg.cold_window;
  const auto& post = agg.post_window;
  const double cold_gain = 1.0 - cold.refined_mean / cold.local_mean;
  const bool a2 = cold.refined_mean <= 0.85 * cold.local_mean &&
                  cold.local_mean >= 8.0 && cold.local_mean <= 20.0 &&
                  post.local_mean >= 1.5 && post.local_mean <= 6.0;
  report("A2 cold-start refinement benefit", a2,
         fmt("boot window refined %.2f m vs local %.2f m (%.1f%% better), "
             "post-window local %.2f m",
             cold.refined_mean, cold.local_mean, 100.0 * cold_gain,
             post.local_mean));

  const double post_gain = 1.0 - post.refined_mean / post.local_mean;
  const bool a3 = post.win_rate >= 0.85 && post_gain >= 0.05 &&
                  agg.recovery_refined.recovered_runs >=
                      agg.recovery_local.recovered_runs;
  report("A3 post-window win rate and recovery", a3,
         fmt("win rate %.2f, refined %.2f m vs local %.2f m (%.1f%% better), "
             "recoveries %d refined vs %d local of %d runs",
             post.win_rate, post.refined_mean, post.local_mean,
             100.0 * post_gain, agg.recovery_refined.recovered_runs,
             agg.recovery_local.recovered_runs, agg.n_runs));
}

// --------------------------------------------------------------------------
// A4: adversary sweep over paired seeds; the damage without mitigation, the
// reduction with it, and dominance at every fraction from 0.2 up.
void check_a4() {
  const std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 100; ++s) seeds.push_back(s);
  const int threads = worker_count();

  std::map<double, double> off_mean, on_mean;
  for (double f : fractions) {
    for (bool trust_on : {false, true}) {
      swarm::SwarmConfig config;
      config.malicious_fraction = f;
      config.trust_enabled = trust_on;
      const auto runs = swarm::run_seeds(config, seeds, threads);
      std::vector<double> finals;
      for (const auto& run : runs) finals.push_back(run.back().mean_refined_error_m);
      (trust_on ? on_mean : off_mean)[f] = mean_finite(finals);
    }
  }

  const bool degradation = off_mean[0.4] >= 1.25 * off_mean[0.0];
  const bool mitigation = on_mean[0.4] <= 0.85 * off_mean[0.4];
  bool dominance = true;
  for (double f : fractions) {
    if (f >= 0.2 && !(on_mean[f] <= off_mean[f])) dominance = false;
  }
  report("A4 adversarial degradation and mitigation", degradation && mitigation && dominance,
         fmt("untrusted 0%%: %.2f m, untrusted 40%%: %.2f m (x%.2f), "
             "trusted 40%%: %.2f m (ratio %.2f), trusted never worse from 20%%: %s",
             off_mean[0.0], off_mean[0.4], off_mean[0.4] / off_mean[0.0],
             on_mean[0.4], on_mean[0.4] / off_mean[0.4], dominance ? "yes" : "no"));
}

// --------------------------------------------------------------------------
// A5: bit-exactness properties of the weighted solve and the per-epoch
// pipeline, over 1000 randomized cases each.
void check_a5() {
  swarm::RngStream rng(5005);
  const swarm::SolverParams params;
  int fixed_point_ok = 0, deletion_ok = 0, isolated_ok = 0;
  const int cases = 1000;

  auto random_position = [&rng] {
    return swarm::Vec3(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 50));
  };
  auto random_constraint = [&](double omega) {
    return swarm::NeighborConstraint{
        random_position(),
        swarm::RangeObservation(rng.uniform(0.0, 40.0), rng.uniform(0.1, 2.0)),
        omega};
  };

  for (int i = 0; i < cases; ++i) {
    // (i) zero total weight: the prior is a bit-exact fixed point.
    const swarm::Vec3 prior = random_position();
    const auto cov = swarm::make_cov_diag(rng.uniform(0.1, 100.0),
                                          rng.uniform(0.1, 100.0),
                                          rng.uniform(0.1, 100.0));
    std::vector<swarm::NeighborConstraint> zeroed;
    const int k0 = static_cast<int>(rng.below(6));
    for (int j = 0; j < k0; ++j) zeroed.push_back(random_constraint(0.0));
    const auto held = swarm::refine_position(prior, cov, zeroed, params, i);
    if (held.position.x() == prior.x() && held.position.y() == prior.y() &&
        held.position.z() == prior.z()) {
      ++fixed_point_ok;
    }

    // (ii) deleting zero-weight neighbors leaves the output bit-identical.
    std::vector<swarm::NeighborConstraint> mixed;
    const int k1 = 1 + static_cast<int>(rng.below(8));
    for (int j = 0; j < k1; ++j) {
      const double omega = rng.bernoulli(0.4) ? 0.0 : rng.uniform(0.05, 1.0);
      mixed.push_back(random_constraint(omega));
    }
    mixed[rng.below(static_cast<std::uint64_t>(mixed.size()))].omega = 0.0;
    std::vector<swarm::NeighborConstraint> pruned;
    for (const auto& c : mixed) {
      if (c.omega != 0.0) pruned.push_back(c);
    }
    const auto all = swarm::refine_position(prior, cov, mixed, params, i);
    const auto few = swarm::refine_position(prior, cov, pruned, params, i);
    if (all.position.x() == few.position.x() &&
        all.position.y() == few.position.y() &&
        all.position.z() == few.position.z() &&
        all.covariance.matrix() == few.covariance.matrix()) {
      ++deletion_ok;
    }

    // (iii) an isolated vehicle passes its local estimate through unchanged.
    swarm::PipelineParams pipeline;
    pipeline.default_prior.position = swarm::Vec3(25, 25, 25);
    pipeline.default_prior.covariance = swarm::make_cov_diag(625, 625, 625);
    swarm::UavPipelineState state;
    const swarm::Vec3 p = random_position();
    const auto local = swarm::StateSummary::fix(
        7, i, p,
        swarm::make_cov_diag(rng.uniform(0.1, 20.0), rng.uniform(0.1, 20.0),
                             rng.uniform(0.1, 20.0)));
    const auto out = swarm::refine_epoch(local, {}, {}, state, pipeline, i);
    if (out.position.x() == p.x() && out.position.y() == p.y() &&
        out.position.z() == p.z()) {
      ++isolated_ok;
    }
  }

  const bool pass =
      fixed_point_ok == cases && deletion_ok == cases && isolated_ok == cases;
  report("A5 exclusion and fixed-point invariants", pass,
         fmt("zero-weight fixed point %d/%d, deletion invariance %d/%d, "
             "isolated pass-through %d/%d, all bit-exact",
             fixed_point_ok, cases, deletion_ok, cases, isolated_ok, cases));
}

// --------------------------------------------------------------------------
// A6: trust kernel values, smoothing endpoints, and flagging latency for a
// grossly inconsistent neighbor, checked against an independently computed
// scalar recurrence.
void check_a6() {
  bool kernel_ok = swarm::instantaneous_trust(0.0, 3.0) == 1.0 &&
                   swarm::instantaneous_trust(0.0, 0.7) == 1.0;
  for (double lambda : {0.5, 1.0, 3.0, 8.0}) {
    if (std::abs(swarm::instantaneous_trust(lambda, lambda) - std::exp(-0.5)) >
        1e-12) {
      kernel_ok = false;
    }
  }

  bool ema_ok = true;
  for (double prev : {0.0, 0.25, 0.8, 1.0}) {
    for (double cur : {0.0, 0.4, 1.0}) {
      if (swarm::update_trust(prev, cur, 1.0) != prev) ema_ok = false;
      if (swarm::update_trust(prev, cur, 0.0) != cur) ema_ok = false;
    }
  }

  // A neighbor whose reported position sits 10 sigma away from the measured
  // range, every epoch, at default parameters.
  const swarm::TrustParams params;
  swarm::TrustLedger ledger;
  const swarm::Vec3 reference = swarm::Vec3::Zero();
  const swarm::NeighborReport liar{
      7, swarm::Vec3(20, 0, 0), swarm::RangeObservation(10.0, 1.0), 1.0};

  double expected = params.s_init;
  bool recurrence_ok = true;
  int flagged_at = -1, expected_at = -1;
  for (int epoch = 1; epoch <= 6; ++epoch) {
    const double inst = std::exp(-(10.0 * 10.0) / (2.0 * params.lambda * params.lambda));
    expected = params.eta * expected + (1.0 - params.eta) * inst;
    if (expected_at < 0 && expected < params.s_min) expected_at = epoch;

    swarm::evaluate_neighbors(reference, {liar}, ledger, params);
    if (std::abs(ledger.smoothed.at(7) - expected) > 1e-12) recurrence_ok = false;
    if (flagged_at < 0 && ledger.flagged.count(7) > 0) flagged_at = epoch;
  }
  const bool latency_ok = flagged_at > 0 && flagged_at <= 3 && flagged_at == expected_at;

  report("A6 trust kernel values and flagging latency", kernel_ok && ema_ok &&
             recurrence_ok && latency_ok,
         fmt("kernel %s, smoothing endpoints %s, recurrence match %s, "
             "10-sigma neighbor flagged at epoch %d (predicted %d)",
             kernel_ok ? "exact" : "off", ema_ok ? "exact" : "off",
             recurrence_ok ? "within 1e-12" : "diverged", flagged_at, expected_at));
}

// --------------------------------------------------------------------------
// A7: the sweep experiment writes byte-identical files no matter how many
// workers execute it.
void check_a7() {
  const auto dir = std::filesystem::temp_directory_path();
  swarm::ExperimentSpec spec;
  spec.seeds.clear();
  for (std::uint64_t s = 1; s <= 100; ++s) spec.seeds.push_back(s);

  spec.threads = 1;
  spec.out_path = (dir / "swarm_acceptance_sweep_serial.csv").string();
  swarm::run_sweep(spec);
  const std::string serial = read_file(spec.out_path);

  swarm::ExperimentSpec wide = spec;
  wide.threads = worker_count() > 1 ? worker_count() : 4;
  wide.out_path = (dir / "swarm_acceptance_sweep_parallel.csv").string();
  swarm::run_sweep(wide);
  const std::string parallel = read_file(wide.out_path);

  const bool pass = !serial.empty() && serial == parallel;
  report("A7 parallel runs are byte-identical", pass,
         fmt("%zu bytes, 1 worker vs %d workers %s", serial.size(), wide.threads,
             pass ? "identical" : "differ"));
}

}  // namespace

int main() {
  check_a1();
  check_a2_a3();
  check_a4();
  check_a5();
  check_a6();
  check_a7();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
