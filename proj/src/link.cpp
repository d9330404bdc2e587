#include "swarm/link.hpp"

#include <algorithm>
#include <cmath>

namespace swarm {

bool link_observables_valid(const LinkObservables& obs) {
  return std::isfinite(obs.rssi_score) && std::isfinite(obs.prr) &&
         obs.rssi_score >= 0.0 && obs.rssi_score <= 1.0 && obs.prr >= 0.0 &&
         obs.prr <= 1.0;
}

double link_quality(const LinkObservables& obs, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
  if (!link_observables_valid(obs)) {
    throw std::invalid_argument("link observables must lie in [0, 1]");
  }
  // std::pow(0, 0) == 1, which is exactly the convention needed here.
  return std::pow(obs.rssi_score, alpha) * std::pow(obs.prr, 1.0 - alpha);
}

std::vector<NeighborMessage> filter_stale(const std::vector<NeighborMessage>& messages,
                                          int now, int max_age) {
  std::vector<NeighborMessage> fresh;
  fresh.reserve(messages.size());
  for (const auto& m : messages) {
    if (now - m.sent_epoch <= max_age) fresh.push_back(m);
  }
  return fresh;
}

std::vector<NeighborMessage> select_neighbors(const std::vector<NeighborMessage>& messages,
                                              const LinkParams& params) {
  struct Scored {
    double quality;
    NeighborMessage message;
  };
  std::vector<Scored> scored;
  scored.reserve(messages.size());
  for (const auto& m : messages) {
    const double q = link_quality(m.link, params.alpha);
    if (q < params.q_min) continue;
    scored.push_back({q, m});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.quality != b.quality) return a.quality > b.quality;
    return a.message.sender < b.message.sender;
  });
  const std::size_t keep =
      std::min(scored.size(), static_cast<std::size_t>(std::max(params.budget, 0)));
  std::vector<NeighborMessage> selected;
  selected.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) selected.push_back(scored[i].message);
  return selected;
}

}  // namespace swarm
