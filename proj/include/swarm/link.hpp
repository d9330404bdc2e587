#pragma once

// Link quality scoring and neighbor admission: which broadcast messages a
// vehicle actually spends its per-epoch fusion budget on.

#include <vector>

#include "swarm/types.hpp"

namespace swarm {

// Radio observables normalized to [0, 1].
struct LinkObservables {
  double rssi_score = 0.0;
  double prr = 0.0;
};

bool link_observables_valid(const LinkObservables& obs);

struct NeighborMessage {
  UavId sender;
  StateSummary state;
  int sent_epoch;
  LinkObservables link;
};

struct LinkParams {
  double alpha = 0.5;  // geometric blend between rssi_score and prr
  int budget = 5;      // max neighbors fused per epoch
  double q_min = 0.05; // minimum admissible link quality
  int max_age = 2;     // epochs before a message counts as stale
};

// q = rssi^alpha * prr^(1-alpha), with 0^0 treated as 1 so a zeroed
// observable drops out of the blend when its exponent is zero.
double link_quality(const LinkObservables& obs, double alpha);

// Keeps messages with now - sent_epoch <= max_age, preserving input order.
std::vector<NeighborMessage> filter_stale(const std::vector<NeighborMessage>& messages,
                                          int now, int max_age);

// Drops messages below q_min, then keeps the best `budget` by link quality.
// Ties break toward the smaller sender id; the result is sorted by
// descending quality so admission order is deterministic.
std::vector<NeighborMessage> select_neighbors(const std::vector<NeighborMessage>& messages,
                                              const LinkParams& params);

}  // namespace swarm
