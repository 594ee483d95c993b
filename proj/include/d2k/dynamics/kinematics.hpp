#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "d2k/dynamics/robot_model.hpp"

namespace d2k::dynamics {

struct Pose {
  Eigen::Vector3d position;
  Eigen::Quaterniond orientation;
};

using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Transform from frame i-1 to frame i for joint i at angle q.
Eigen::Isometry3d joint_transform(const RobotModel& model, std::size_t i, double q);

/// Base-to-link transforms for every link frame (size n).
std::vector<Eigen::Isometry3d> link_frames(const RobotModel& model, const Eigen::VectorXd& q);

Eigen::Isometry3d flange_transform(const RobotModel& model, const Eigen::VectorXd& q);

/// Flange pose in the base frame; the quaternion is normalized.
Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q);

/// Geometric Jacobian of the flange: rows 0-2 linear velocity, rows 3-5
/// angular velocity, both in the base frame.
Jacobian jacobian(const RobotModel& model, const Eigen::VectorXd& q);

}  // namespace d2k::dynamics
