#include "swarm/trust.hpp"

#include <algorithm>
#include <cmath>

namespace swarm {

RangeObservation::RangeObservation(double d_hat_in, double sigma_d_in)
    : d_hat(d_hat_in), sigma_d(sigma_d_in) {
  if (!std::isfinite(d_hat) || d_hat < 0.0) {
    throw std::invalid_argument("measured range must be finite and non-negative");
  }
  if (!std::isfinite(sigma_d) || !(sigma_d > 0.0)) {
    throw std::invalid_argument("range sigma must be finite and positive");
  }
}

double range_mismatch(const Vec3& p_ref, const Vec3& p_j, const RangeObservation& obs) {
  return std::abs((p_ref - p_j).norm() - obs.d_hat) / obs.sigma_d;
}

double instantaneous_trust(double eps, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be positive and finite");
  }
  const double z = eps / lambda;
  return std::exp(-0.5 * z * z);
}

double update_trust(double previous, double current, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in [0, 1]");
  }
  return eta * previous + (1.0 - eta) * current;
}

std::map<UavId, double> evaluate_neighbors(const Vec3& p_ref,
                                           const std::vector<NeighborReport>& reports,
                                           TrustLedger& ledger,
                                           const TrustParams& params) {
  std::vector<const NeighborReport*> ordered;
  ordered.reserve(reports.size());
  for (const auto& r : reports) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const NeighborReport* a, const NeighborReport* b) { return a->id < b->id; });

  ledger.flagged.clear();
  std::map<UavId, double> weights;
  for (const NeighborReport* r : ordered) {
    const double eps = range_mismatch(p_ref, r->position, r->range);
    const double inst = instantaneous_trust(eps, params.lambda);
    const auto it = ledger.smoothed.find(r->id);
    const double previous = it == ledger.smoothed.end() ? params.s_init : it->second;
    const double smoothed = update_trust(previous, inst, params.eta);
    ledger.smoothed[r->id] = smoothed;
    if (smoothed < params.s_min) {
      ledger.flagged.insert(r->id);
      weights[r->id] = 0.0;
    } else {
      weights[r->id] = r->link_quality * smoothed;
    }
  }
  return weights;
}

}  // namespace swarm
