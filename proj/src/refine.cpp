#include "swarm/refine.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace swarm {

namespace {

void validate_params(const SolverParams& params) {
  if (params.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(params.damping > 0.0) || !std::isfinite(params.damping)) {
    throw std::invalid_argument("damping must be positive and finite");
  }
  if (!(params.step_tol > 0.0)) throw std::invalid_argument("step_tol must be positive");
  if (!(params.min_dist > 0.0)) throw std::invalid_argument("min_dist must be positive");
}

void validate_constraints(std::span<const NeighborConstraint> constraints) {
  for (const auto& c : constraints) {
    if (!is_finite(c.position)) {
      throw std::invalid_argument("constraint position has non-finite components");
    }
    if (!std::isfinite(c.omega) || c.omega < 0.0) {
      throw std::invalid_argument("constraint weight must be finite and non-negative");
    }
  }
}

Eigen::Matrix3d damped(const Eigen::Matrix3d& h, double damping) {
  Eigen::Matrix3d m = h;
  m.diagonal().array() += damping;
  return m;
}

Eigen::Vector3d solve_spd(const Eigen::Matrix3d& a, const Eigen::Vector3d& rhs) {
  Eigen::LLT<Eigen::Matrix3d> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SolverError("normal equations not positive definite despite damping", a);
  }
  return llt.solve(rhs);
}

}  // namespace

double residual(const Vec3& p, const NeighborConstraint& c) {
  return (p - c.position).norm() - c.range.d_hat;
}

GaussNewtonStep gauss_newton_step(const Vec3& p, const Vec3& prior_pos,
                                  const Eigen::Matrix3d& prior_info,
                                  std::span<const NeighborConstraint> constraints,
                                  const SolverParams& params) {
  Eigen::Matrix3d h = prior_info;
  Eigen::Vector3d g = prior_info * (prior_pos - p);
  for (const auto& c : constraints) {
    if (c.omega == 0.0) continue;
    const Vec3 diff = p - c.position;
    const double dist = diff.norm();
    Vec3 u;
    if (dist == 0.0) {
      u = Vec3(1.0, 0.0, 0.0);
    } else {
      u = diff / std::max(dist, params.min_dist);
    }
    const double r = dist - c.range.d_hat;
    const double w = c.omega / (c.range.sigma_d * c.range.sigma_d);
    h.noalias() += w * u * u.transpose();
    g.noalias() -= w * r * u;
  }
  const Vec3 delta = solve_spd(damped(h, params.damping), g);
  return {delta, h};
}

RefinedState refine_position(const Vec3& prior_pos, const Cov3& prior_cov,
                             std::span<const NeighborConstraint> constraints,
                             const SolverParams& params, int epoch) {
  validate_params(params);
  validate_constraints(constraints);
  if (!is_finite(prior_pos)) {
    throw std::invalid_argument("prior position has non-finite components");
  }

  const Eigen::Matrix3d prior_info = prior_cov.inverse();
  Vec3 p = prior_pos;
  Eigen::Matrix3d h_final = prior_info;
  for (int iter = 0; iter < params.max_iters; ++iter) {
    const GaussNewtonStep step =
        gauss_newton_step(p, prior_pos, prior_info, constraints, params);
    h_final = step.normal_matrix;
    p += step.delta;
    if (step.delta.norm() < params.step_tol) break;
  }
  if (!is_finite(p)) {
    throw SolverError("refinement diverged to a non-finite position", h_final);
  }

  const Eigen::Matrix3d a = damped(h_final, params.damping);
  Eigen::LLT<Eigen::Matrix3d> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SolverError("final normal matrix not positive definite despite damping", a);
  }
  Eigen::Matrix3d cov = llt.solve(Eigen::Matrix3d::Identity());
  // the solve is symmetric only up to rounding
  cov = 0.5 * (cov + cov.transpose()).eval();
  return RefinedState{p, Cov3(cov), epoch};
}

}  // namespace swarm
