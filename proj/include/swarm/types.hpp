#pragma once

// Shared geometric state types: positions, validated 3x3 covariances, and
// the state summaries exchanged between vehicles.

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

#include "json.hpp"

namespace swarm {

// ENU coordinates, meters.
using Vec3 = Eigen::Vector3d;

using UavId = int;

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

// Position covariance. Construction enforces symmetry (within an absolute
// tolerance, after which the matrix is symmetrized) and positive definiteness
// (Cholesky factorization must succeed), so a Cov3 held anywhere in the
// system is always a usable uncertainty.
class Cov3 {
 public:
  static constexpr double kSymmetryTol = 1e-9;

  explicit Cov3(const Eigen::Matrix3d& m);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double trace() const { return m_.trace(); }

  // SPD inverse via the Cholesky factor.
  Eigen::Matrix3d inverse() const;

  bool operator==(const Cov3& other) const { return m_ == other.m_; }

 private:
  Eigen::Matrix3d m_;
};

Cov3 make_cov_diag(double var_x, double var_y, double var_z);

// Scales a covariance by gamma > 0.
Cov3 inflate_cov(const Cov3& cov, double gamma);

double cov_trace(const Cov3& cov);

// What a vehicle knows (or reports) about one position at one epoch. A
// summary without a position carries no covariance either.
class StateSummary {
 public:
  static StateSummary fix(UavId uav_id, int epoch, const Vec3& position,
                          const Cov3& covariance);
  static StateSummary missing(UavId uav_id, int epoch);

  UavId uav_id() const { return uav_id_; }
  int epoch() const { return epoch_; }
  bool has_fix() const { return position_.has_value(); }
  const std::optional<Vec3>& position() const { return position_; }
  const std::optional<Cov3>& covariance() const { return covariance_; }

 private:
  StateSummary(UavId uav_id, int epoch, std::optional<Vec3> position,
               std::optional<Cov3> covariance);

  UavId uav_id_;
  int epoch_;
  std::optional<Vec3> position_;
  std::optional<Cov3> covariance_;
};

struct RefinedState {
  Vec3 position;
  Cov3 covariance;
  int epoch;
};

// JSON shapes: Vec3 as [x,y,z]; Cov3 as a row-major 9-element array;
// StateSummary with "position": null when there is no fix.
void to_json(nlohmann::json& j, const RefinedState& r);

nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json cov3_to_json(const Cov3& c);
Cov3 cov3_from_json(const nlohmann::json& j);
nlohmann::json summary_to_json(const StateSummary& s);
StateSummary summary_from_json(const nlohmann::json& j);

}  // namespace swarm

namespace nlohmann {
template <>
struct adl_serializer<Eigen::Vector3d> {
  static void to_json(json& j, const Eigen::Vector3d& v) {
    j = swarm::vec3_to_json(v);
  }
  static void from_json(const json& j, Eigen::Vector3d& v) {
    v = swarm::vec3_from_json(j);
  }
};

template <>
struct adl_serializer<swarm::Cov3> {
  static void to_json(json& j, const swarm::Cov3& c) {
    j = swarm::cov3_to_json(c);
  }
  static swarm::Cov3 from_json(const json& j) { return swarm::cov3_from_json(j); }
};

template <>
struct adl_serializer<swarm::StateSummary> {
  static void to_json(json& j, const swarm::StateSummary& s) {
    j = swarm::summary_to_json(s);
  }
  static swarm::StateSummary from_json(const json& j) {
    return swarm::summary_from_json(j);
  }
};
}  // namespace nlohmann
