#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d2k/dynamics/robot_model.hpp"

namespace d2k::trajectory {

struct ProfileParams {
  double velocity_scaling = 1.0;      ///< fraction of qd_max, in (0, 1]
  double acceleration_scaling = 1.0;  ///< fraction of qdd_max, in (0, 1]
  double sample_dt = 0.01;            ///< [s]
  int n_waypoints = 2;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class MotionSource { random_motion, iso_path };

std::string to_string(MotionSource s);

struct JointTrajectory {
  double dt = 0.01;
  std::vector<dynamics::JointState> samples;
  MotionSource source = MotionSource::random_motion;

  double duration() const { return dt * static_cast<double>(samples.empty() ? 0 : samples.size() - 1); }
};

/// Throws ValidationError if any sample leaves the position limits or the
/// scaled velocity / acceleration limits (tolerance 1e-9).
void check_limits(const dynamics::RobotModel& model, const JointTrajectory& traj, const ProfileParams& params);

/**
 * Minimum-jerk rest-to-rest profile s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5
 * for tau = t / T, applied to a joint-space displacement.
 */
class QuinticSegment {
 public:
  QuinticSegment(Eigen::VectorXd start, Eigen::VectorXd goal, double duration);

  double duration() const { return duration_; }
  dynamics::JointState at(double t) const;

  static constexpr double kPeakVelocityFactor = 1.875;  // max ds/dtau
  /// max |d2s/dtau2| = 10 / sqrt(3), attained at tau = (3 -+ sqrt(3)) / 6
  static double peak_acceleration_factor();

  /// Shortest duration keeping |qd| <= vmax and |qdd| <= amax for a move of `delta`.
  static double min_duration(double delta, double vmax, double amax);

 private:
  Eigen::VectorXd start_;
  Eigen::VectorXd delta_;
  double duration_;
};

/// Optional per-joint waypoint bounds, used to steer collection toward
/// under-covered regions. Unset joints use the model's joint limits.
struct WaypointBounds {
  std::vector<std::optional<std::pair<double, double>>> per_joint;
};

/**
 * Random point-to-point motion: waypoints uniform within the joint limits,
 * joined by synchronized quintic segments whose duration is the smallest
 * multiple of sample_dt satisfying the scaled limits of every joint.
 * Deterministic given params.rng_seed.
 */
JointTrajectory sample_random_motion(const dynamics::RobotModel& model, const ProfileParams& params,
                                     const WaypointBounds& bounds = {});

struct NoiseModel {
  double torque_noise_sigma = 0.05;  ///< [N m] per joint
  std::uint64_t rng_seed = 0;
};

struct LabeledSample {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;
  Eigen::VectorXd tau;
};

using LabeledSequence = std::vector<LabeledSample>;

/// tau = inverse_dynamics(model, state) + N(0, sigma^2) per joint.
LabeledSequence label_with_dynamics(const dynamics::RobotModel& model, const JointTrajectory& traj,
                                    const NoiseModel& noise);

}  // namespace d2k::trajectory
