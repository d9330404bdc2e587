#pragma once

// Prior preparation across fix loss and cold start, and the per-epoch
// refinement pipeline a single vehicle runs over its inbox.

#include <map>
#include <optional>
#include <vector>

#include "swarm/link.hpp"
#include "swarm/refine.hpp"
#include "swarm/trust.hpp"
#include "swarm/types.hpp"

namespace swarm {

struct RecoveryParams {
  double sigma_max = 75.0;  // covariance-trace threshold for low confidence
  double gamma_boot = 10.0; // inflation applied to low-confidence local priors
  double gamma_loss = 4.0;  // inflation applied per epoch of missing fixes
};

struct Prior {
  Vec3 position = Vec3::Zero();
  Cov3 covariance{Eigen::Matrix3d::Identity()};
};

// Everything a vehicle carries across epochs.
struct UavPipelineState {
  std::optional<RefinedState> last_refined;
  TrustLedger trust;
};

// Chooses the solver prior:
//   healthy local fix            -> local position and covariance unchanged
//   low-confidence local fix     -> local position, covariance * gamma_boot
//   missing fix, history exists  -> last refined, covariance * gamma_loss
//   missing fix, no history      -> nullopt; caller substitutes a broad
//                                   default prior for its operating volume
// Repeated missing epochs compound gamma_loss because each refined output
// feeds the next epoch's inflation.
std::optional<Prior> prepare_prior(const StateSummary& local,
                                   const UavPipelineState& state,
                                   const RecoveryParams& params);

struct PipelineParams {
  LinkParams link;
  TrustParams trust;
  RecoveryParams recovery;
  SolverParams solver;
  Prior default_prior;  // used when there is neither a fix nor history
  bool trust_enabled = true;
};

// One full epoch for one vehicle: prior preparation, staleness filtering,
// range pairing (messages without a matching range are dropped, as are
// messages that carry no position), budgeted neighbor selection, trust
// evaluation against the prior position, and the weighted solve. Updates
// state.last_refined and the trust ledger in place. With trust disabled the
// ledger is left untouched and weights fall back to raw link quality.
RefinedState refine_epoch(const StateSummary& local,
                          const std::vector<NeighborMessage>& messages,
                          const std::map<UavId, RangeObservation>& ranges,
                          UavPipelineState& state, const PipelineParams& params,
                          int epoch);

}  // namespace swarm
