#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace d2k::dynamics {

/**
 * Kinematic and inertial description of an N-joint serial arm with revolute
 * joints.
 *
 * Kinematics follow the modified (proximal) Denavit-Hartenberg convention:
 *   T_{i-1,i} = RotX(alpha_i) * TransX(a_i) * RotZ(q_i + theta_offset_i) * TransZ(d_i)
 * so a_i / alpha_i describe the link *preceding* joint i.
 *
 * Inertial parameters are expressed in the link frame: `com[i]` is the
 * center of mass and `inertia[i]` the rotational inertia about that center.
 * The flange frame is the last link frame translated by `flange_offset`.
 * Units are SI, angles in radians.
 */
struct RobotModel {
  std::string name = "robot";

  Eigen::VectorXd a;
  Eigen::VectorXd d;
  Eigen::VectorXd alpha;
  Eigen::VectorXd theta_offset;

  Eigen::VectorXd mass;
  std::vector<Eigen::Vector3d> com;
  std::vector<Eigen::Matrix3d> inertia;

  Eigen::VectorXd q_min;
  Eigen::VectorXd q_max;
  Eigen::VectorXd qd_max;
  Eigen::VectorXd qdd_max;
  Eigen::VectorXd tau_max;

  Eigen::Vector3d gravity{0.0, 0.0, -9.81};
  /// Viscous friction coefficient per joint [N m s / rad].
  Eigen::VectorXd friction;

  Eigen::Vector3d flange_offset = Eigen::Vector3d::Zero();
  /// Seed configuration for differential IK. Defaults to mid-range.
  Eigen::VectorXd home;

  std::size_t n_joints() const { return static_cast<std::size_t>(a.size()); }

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  bool operator==(const RobotModel& other) const;
};

/// Allocate an n-joint model with zero geometry, unit masses, tiny isotropic
/// inertia, symmetric +-pi limits and default rate limits.
RobotModel make_blank_model(std::size_t n_joints);

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;

  static JointState zero(std::size_t n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  }
};

/// Per-instance deviation of a physical robot from the nominal model.
struct InstancePerturbation {
  std::string instance_id;
  /// One factor per link; empty means all 1.
  std::vector<double> mass_scales;
  double payload_mass = 0.0;
  Eigen::Vector3d payload_offset = Eigen::Vector3d::Zero();
  double friction_scale = 1.0;
};

/// Scale inertial and friction values; fold a point payload into the last
/// link by parallel-axis composition. Kinematics are left untouched.
RobotModel apply_perturbation(const RobotModel& model, const InstancePerturbation& p);

/// Throws DimensionError / NonFiniteError.
void check_state(const RobotModel& model, const JointState& state);

}  // namespace d2k::dynamics
