#include <cmath>
#include <random>

#include "d2k/common/error.hpp"
#include "d2k/trajectory/trajectory.hpp"

namespace d2k::trajectory {

JointTrajectory sample_random_motion(const dynamics::RobotModel& model, const ProfileParams& params,
                                     const WaypointBounds& bounds) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(model.n_joints());
  if (!bounds.per_joint.empty() && bounds.per_joint.size() != model.n_joints()) {
    throw DimensionError("waypoint bounds must cover every joint");
  }

  Eigen::VectorXd lo = model.q_min;
  Eigen::VectorXd hi = model.q_max;
  for (std::size_t j = 0; j < bounds.per_joint.size(); ++j) {
    if (const auto& b = bounds.per_joint[j]) {
      const auto k = static_cast<Eigen::Index>(j);
      if (!(b->first < b->second) || b->first < model.q_min[k] || b->second > model.q_max[k]) {
        throw ValidationError("waypoint_bounds[" + std::to_string(j) + "]", "interval must lie inside joint limits");
      }
      lo[k] = b->first;
      hi[k] = b->second;
    }
  }

  std::mt19937_64 rng(params.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> waypoints;
  for (int w = 0; w < params.n_waypoints; ++w) {
    Eigen::VectorXd q(n);
    for (Eigen::Index j = 0; j < n; ++j) q[j] = lo[j] + (hi[j] - lo[j]) * unit(rng);
    waypoints.push_back(std::move(q));
  }

  const Eigen::VectorXd vmax = params.velocity_scaling * model.qd_max;
  const Eigen::VectorXd amax = params.acceleration_scaling * model.qdd_max;
  const double dt = params.sample_dt;

  JointTrajectory traj;
  traj.dt = dt;
  traj.source = MotionSource::random_motion;
  for (std::size_t w = 0; w + 1 < waypoints.size(); ++w) {
    double t_min = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      t_min = std::max(t_min, QuinticSegment::min_duration(waypoints[w + 1][j] - waypoints[w][j], vmax[j], amax[j]));
    }
    // snap to the sample grid so that waypoints land exactly on samples
    const auto steps = std::max<long>(1, static_cast<long>(std::ceil(t_min / dt - 1e-9)));
    const double duration = static_cast<double>(steps) * dt;
    const QuinticSegment seg(waypoints[w], waypoints[w + 1], duration);
    const long first = traj.samples.empty() ? 0 : 1;
    for (long k = first; k <= steps; ++k) {
      traj.samples.push_back(seg.at(duration * static_cast<double>(k) / static_cast<double>(steps)));
    }
  }
  return traj;
}

}  // namespace d2k::trajectory
