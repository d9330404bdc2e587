#pragma once

// Range-consistency trust: per-neighbor scores that decay when a neighbor's
// reported position disagrees with the range actually measured to it, with
// exponential smoothing so one noisy epoch neither convicts nor acquits.

#include <map>
#include <set>
#include <vector>

#include "swarm/types.hpp"

namespace swarm {

// A range measurement to one neighbor.
struct RangeObservation {
  RangeObservation(double d_hat_in, double sigma_d_in);

  double d_hat;    // measured distance, meters, >= 0
  double sigma_d;  // 1-sigma range uncertainty, meters, > 0
};

struct TrustParams {
  double lambda = 3.0;  // mismatch scale, in units of sigma_d
  double eta = 0.7;     // smoothing memory; weight on the previous score
  double s_min = 0.2;   // flag threshold on the smoothed score
  double s_init = 0.5;  // score assumed for a first-contact neighbor
};

// Smoothed trust per neighbor plus the current flag set. Flags are rebuilt
// from scratch every evaluation epoch, so a neighbor that becomes consistent
// again is automatically unflagged once its smoothed score recovers.
struct TrustLedger {
  std::map<UavId, double> smoothed;
  std::set<UavId> flagged;
};

// |  ||p_ref - p_j|| - d_hat  | / sigma_d
double range_mismatch(const Vec3& p_ref, const Vec3& p_j, const RangeObservation& obs);

// exp(-eps^2 / (2 lambda^2)), in (0, 1]
double instantaneous_trust(double eps, double lambda);

// eta * previous + (1 - eta) * current
double update_trust(double previous, double current, double eta);

struct NeighborReport {
  UavId id;
  Vec3 position;
  RangeObservation range;
  double link_quality;
};

// Runs the consistency check for every report against the reference
// position, updates the ledger's smoothed scores, rebuilds the flag set, and
// returns fusion weights: omega = q * smoothed, forced to 0 for flagged
// neighbors. Reports are processed in ascending id order, so the result is
// independent of input permutation. Ledger entries for absent neighbors are
// retained untouched.
std::map<UavId, double> evaluate_neighbors(const Vec3& p_ref,
                                           const std::vector<NeighborReport>& reports,
                                           TrustLedger& ledger,
                                           const TrustParams& params);

}  // namespace swarm
