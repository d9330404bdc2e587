#pragma once

// Weighted least-squares position refinement: fuse a Gaussian prior with
// weighted range constraints to neighbors via damped Gauss-Newton on the
// 3x3 normal equations.

#include <span>
#include <stdexcept>

#include "swarm/trust.hpp"
#include "swarm/types.hpp"

namespace swarm {

struct NeighborConstraint {
  Vec3 position;          // neighbor's reported position
  RangeObservation range; // measured range to that neighbor
  double omega;           // fusion weight, >= 0; 0 removes the constraint
};

struct SolverParams {
  int max_iters = 5;
  double damping = 1e-6;   // added to the normal matrix diagonal
  double step_tol = 1e-4;  // stop once |delta| drops below this
  double min_dist = 1e-6;  // linearization guard near coincident positions
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, const Eigen::Matrix3d& normal_matrix)
      : std::runtime_error(what), normal_matrix(normal_matrix) {}

  Eigen::Matrix3d normal_matrix;
};

// Signed range residual ||p - neighbor|| - d_hat.
double residual(const Vec3& p, const NeighborConstraint& c);

struct GaussNewtonStep {
  Vec3 delta;
  Eigen::Matrix3d normal_matrix;  // H, without damping
};

// One damped step of the normal equations
//   H = prior_info + sum_j w_j u_j u_j^T,   w_j = omega_j / sigma_d_j^2
//   g = prior_info (prior_pos - p) - sum_j w_j r_j u_j
//   (H + damping I) delta = g
// Constraints with omega == 0 are skipped outright so their presence can
// never perturb the arithmetic. The unit direction u_j divides by
// max(||p - p_j||, min_dist) and falls back to +x at exact coincidence.
GaussNewtonStep gauss_newton_step(const Vec3& p, const Vec3& prior_pos,
                                  const Eigen::Matrix3d& prior_info,
                                  std::span<const NeighborConstraint> constraints,
                                  const SolverParams& params);

// Iterates gauss_newton_step from the prior position and returns the refined
// position with covariance (H_final + damping I)^-1.
RefinedState refine_position(const Vec3& prior_pos, const Cov3& prior_cov,
                             std::span<const NeighborConstraint> constraints,
                             const SolverParams& params, int epoch);

}  // namespace swarm
