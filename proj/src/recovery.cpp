#include "swarm/recovery.hpp"

#include <algorithm>
#include <cmath>

namespace swarm {

namespace {

void validate_params(const RecoveryParams& params) {
  if (!(params.sigma_max > 0.0) || !std::isfinite(params.sigma_max)) {
    throw std::invalid_argument("sigma_max must be positive and finite");
  }
  if (!(params.gamma_boot >= 1.0) || !std::isfinite(params.gamma_boot)) {
    throw std::invalid_argument("gamma_boot must be >= 1");
  }
  if (!(params.gamma_loss >= 1.0) || !std::isfinite(params.gamma_loss)) {
    throw std::invalid_argument("gamma_loss must be >= 1");
  }
}

}  // namespace

std::optional<Prior> prepare_prior(const StateSummary& local,
                                   const UavPipelineState& state,
                                   const RecoveryParams& params) {
  validate_params(params);
  if (local.has_fix()) {
    const Cov3& cov = *local.covariance();
    if (cov_trace(cov) > params.sigma_max) {
      return Prior{*local.position(), inflate_cov(cov, params.gamma_boot)};
    }
    return Prior{*local.position(), cov};
  }
  if (state.last_refined.has_value()) {
    return Prior{state.last_refined->position,
                 inflate_cov(state.last_refined->covariance, params.gamma_loss)};
  }
  return std::nullopt;
}

RefinedState refine_epoch(const StateSummary& local,
                          const std::vector<NeighborMessage>& messages,
                          const std::map<UavId, RangeObservation>& ranges,
                          UavPipelineState& state, const PipelineParams& params,
                          int epoch) {
  const Prior prior =
      prepare_prior(local, state, params.recovery).value_or(params.default_prior);

  const std::vector<NeighborMessage> fresh =
      filter_stale(messages, epoch, params.link.max_age);

  // A usable message carries a position and pairs with a range observation.
  std::vector<NeighborMessage> usable;
  usable.reserve(fresh.size());
  for (const auto& m : fresh) {
    if (!m.state.has_fix()) continue;
    if (ranges.find(m.sender) == ranges.end()) continue;
    usable.push_back(m);
  }

  const std::vector<NeighborMessage> selected = select_neighbors(usable, params.link);

  std::vector<NeighborReport> reports;
  reports.reserve(selected.size());
  for (const auto& m : selected) {
    reports.push_back(NeighborReport{m.sender, *m.state.position(),
                                     ranges.at(m.sender),
                                     link_quality(m.link, params.link.alpha)});
  }

  std::map<UavId, double> weights;
  if (params.trust_enabled) {
    weights = evaluate_neighbors(prior.position, reports, state.trust, params.trust);
  } else {
    for (const auto& r : reports) weights[r.id] = r.link_quality;
  }

  std::sort(reports.begin(), reports.end(),
            [](const NeighborReport& a, const NeighborReport& b) { return a.id < b.id; });
  std::vector<NeighborConstraint> constraints;
  constraints.reserve(reports.size());
  for (const auto& r : reports) {
    constraints.push_back(NeighborConstraint{r.position, r.range, weights.at(r.id)});
  }

  const RefinedState refined =
      refine_position(prior.position, prior.covariance, constraints, params.solver, epoch);
  state.last_refined = refined;
  return refined;
}

}  // namespace swarm
