#pragma once

#include <Eigen/Dense>

#include "d2k/dynamics/robot_model.hpp"

namespace d2k::dynamics {

/**
 * Joint torques realizing `state` under gravity and viscous friction,
 * computed with the recursive Newton-Euler algorithm (outward velocity /
 * acceleration pass, inward force pass, both in link frames).
 *
 * tau = M(q) qdd + C(q, qd) qd + g(q) + diag(friction) qd
 *
 * Deterministic and free of shared state; safe to call concurrently.
 */
Eigen::VectorXd inverse_dynamics(const RobotModel& model, const JointState& state);

struct Energy {
  double kinetic = 0.0;
  /// Zero when every link's center of mass sits at the base frame origin.
  double potential = 0.0;

  double total() const { return kinetic + potential; }
};

Energy total_energy(const RobotModel& model, const JointState& state);

/// Power dissipated by viscous friction, sum_i b_i qd_i^2.
double friction_dissipation(const RobotModel& model, const Eigen::VectorXd& qd);

}  // namespace d2k::dynamics
