#include "d2k/dynamics/kinematics.hpp"

#include <cmath>

#include "d2k/common/error.hpp"

namespace d2k::dynamics {
namespace {

void check_q(const RobotModel& model, const Eigen::VectorXd& q) {
  if (static_cast<std::size_t>(q.size()) != model.n_joints()) {
    throw DimensionError("q has " + std::to_string(q.size()) + " entries, model has " +
                         std::to_string(model.n_joints()) + " joints");
  }
  if (!q.allFinite()) throw NonFiniteError("q contains non-finite values");
}

}  // namespace

Eigen::Isometry3d joint_transform(const RobotModel& model, std::size_t i, double q) {
  const double ca = std::cos(model.alpha[i]);
  const double sa = std::sin(model.alpha[i]);
  const double th = q + model.theta_offset[i];
  const double ct = std::cos(th);
  const double st = std::sin(th);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  auto r = t.matrix();
  // RotX(alpha) * TransX(a) * RotZ(theta) * TransZ(d)
  r(0, 0) = ct;       r(0, 1) = -st;      r(0, 2) = 0.0;  r(0, 3) = model.a[i];
  r(1, 0) = st * ca;  r(1, 1) = ct * ca;  r(1, 2) = -sa;  r(1, 3) = -sa * model.d[i];
  r(2, 0) = st * sa;  r(2, 1) = ct * sa;  r(2, 2) = ca;   r(2, 3) = ca * model.d[i];
  t.matrix() = r;
  return t;
}

std::vector<Eigen::Isometry3d> link_frames(const RobotModel& model, const Eigen::VectorXd& q) {
  check_q(model, q);
  std::vector<Eigen::Isometry3d> frames;
  frames.reserve(model.n_joints());
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (std::size_t i = 0; i < model.n_joints(); ++i) {
    t = t * joint_transform(model, i, q[static_cast<Eigen::Index>(i)]);
    frames.push_back(t);
  }
  return frames;
}

Eigen::Isometry3d flange_transform(const RobotModel& model, const Eigen::VectorXd& q) {
  const auto frames = link_frames(model, q);
  return frames.back() * Eigen::Translation3d(model.flange_offset);
}

Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q) {
  const auto t = flange_transform(model, q);
  Eigen::Quaterniond quat(t.rotation());
  quat.normalize();
  return {t.translation(), quat};
}

Jacobian jacobian(const RobotModel& model, const Eigen::VectorXd& q) {
  const auto frames = link_frames(model, q);
  const Eigen::Vector3d p_flange = (frames.back() * Eigen::Translation3d(model.flange_offset)).translation();
  Jacobian j(6, static_cast<Eigen::Index>(model.n_joints()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::Vector3d z = frames[i].linear().col(2);
    const Eigen::Vector3d p = frames[i].translation();
    const auto c = static_cast<Eigen::Index>(i);
    j.block<3, 1>(0, c) = z.cross(p_flange - p);
    j.block<3, 1>(3, c) = z;
  }
  return j;
}

}  // namespace d2k::dynamics
