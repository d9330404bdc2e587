#include "swarm/types.hpp"

#include <Eigen/Cholesky>

namespace swarm {

namespace {

void require_finite(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("covariance has non-finite entries");
  }
}

}  // namespace

Cov3::Cov3(const Eigen::Matrix3d& m) {
  require_finite(m);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    throw std::invalid_argument("covariance is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
  Eigen::LLT<Eigen::Matrix3d> llt(m_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("covariance is not positive definite");
  }
}

Eigen::Matrix3d Cov3::inverse() const {
  Eigen::LLT<Eigen::Matrix3d> llt(m_);
  return llt.solve(Eigen::Matrix3d::Identity());
}

Cov3 make_cov_diag(double var_x, double var_y, double var_z) {
  for (double v : {var_x, var_y, var_z}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("diagonal covariance needs positive finite variances");
    }
  }
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = var_x;
  m(1, 1) = var_y;
  m(2, 2) = var_z;
  return Cov3(m);
}

Cov3 inflate_cov(const Cov3& cov, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("inflation factor must be positive and finite");
  }
  return Cov3(gamma * cov.matrix());
}

double cov_trace(const Cov3& cov) { return cov.trace(); }

StateSummary::StateSummary(UavId uav_id, int epoch, std::optional<Vec3> position,
                           std::optional<Cov3> covariance)
    : uav_id_(uav_id),
      epoch_(epoch),
      position_(std::move(position)),
      covariance_(std::move(covariance)) {}

StateSummary StateSummary::fix(UavId uav_id, int epoch, const Vec3& position,
                               const Cov3& covariance) {
  if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
  if (!is_finite(position)) {
    throw std::invalid_argument("position has non-finite components");
  }
  return StateSummary(uav_id, epoch, position, covariance);
}

StateSummary StateSummary::missing(UavId uav_id, int epoch) {
  if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
  return StateSummary(uav_id, epoch, std::nullopt, std::nullopt);
}

nlohmann::json vec3_to_json(const Vec3& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("position must be a 3-element array");
  }
  Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!is_finite(v)) {
    throw std::invalid_argument("position has non-finite components");
  }
  return v;
}

nlohmann::json cov3_to_json(const Cov3& c) {
  auto j = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) j.push_back(c.matrix()(r, col));
  return j;
}

Cov3 cov3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 9) {
    throw std::invalid_argument("covariance must be a 9-element row-major array");
  }
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col)
      m(r, col) = j[static_cast<std::size_t>(3 * r + col)].get<double>();
  return Cov3(m);
}

nlohmann::json summary_to_json(const StateSummary& s) {
  nlohmann::json j{{"uav_id", s.uav_id()}, {"epoch", s.epoch()}};
  if (s.has_fix()) {
    j["position"] = *s.position();
    j["covariance"] = *s.covariance();
  } else {
    j["position"] = nullptr;
  }
  return j;
}

StateSummary summary_from_json(const nlohmann::json& j) {
  const UavId id = j.at("uav_id").get<UavId>();
  const int epoch = j.at("epoch").get<int>();
  if (j.contains("position") && !j.at("position").is_null()) {
    const Vec3 p = j.at("position").get<Vec3>();
    const Cov3 c = j.at("covariance").get<Cov3>();
    return StateSummary::fix(id, epoch, p, c);
  }
  if (j.contains("covariance") && !j.at("covariance").is_null()) {
    throw std::invalid_argument("covariance given without a position");
  }
  return StateSummary::missing(id, epoch);
}

void to_json(nlohmann::json& j, const RefinedState& r) {
  j = nlohmann::json{
      {"epoch", r.epoch}, {"position", r.position}, {"covariance", r.covariance}};
}

}  // namespace swarm
