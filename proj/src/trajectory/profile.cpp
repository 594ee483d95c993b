#include <cmath>

#include "d2k/common/error.hpp"
#include "d2k/trajectory/trajectory.hpp"

namespace d2k::trajectory {

void ProfileParams::validate() const {
  if (!(velocity_scaling > 0.0 && velocity_scaling <= 1.0)) {
    throw ValidationError("velocity_scaling", "must be in (0, 1]");
  }
  if (!(acceleration_scaling > 0.0 && acceleration_scaling <= 1.0)) {
    throw ValidationError("acceleration_scaling", "must be in (0, 1]");
  }
  if (!(sample_dt > 0.0) || !std::isfinite(sample_dt)) throw ValidationError("sample_dt", "must be > 0");
  if (n_waypoints < 2) throw ValidationError("n_waypoints", "must be >= 2");
}

std::string to_string(MotionSource s) { return s == MotionSource::iso_path ? "iso_path" : "random_motion"; }

void check_limits(const dynamics::RobotModel& model, const JointTrajectory& traj, const ProfileParams& params) {
  constexpr double tol = 1e-9;
  if (traj.samples.size() < 2) throw ValidationError("samples", "trajectory needs at least 2 samples");
  const auto n = static_cast<Eigen::Index>(model.n_joints());
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    dynamics::check_state(model, s);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto where = "sample " + std::to_string(k) + ", joint " + std::to_string(j);
      if (s.q[j] < model.q_min[j] - tol || s.q[j] > model.q_max[j] + tol) {
        throw ValidationError("q", where + " outside joint limits");
      }
      if (std::abs(s.qd[j]) > params.velocity_scaling * model.qd_max[j] + tol) {
        throw ValidationError("qd", where + " exceeds scaled velocity limit");
      }
      if (std::abs(s.qdd[j]) > params.acceleration_scaling * model.qdd_max[j] + tol) {
        throw ValidationError("qdd", where + " exceeds scaled acceleration limit");
      }
    }
  }
}

QuinticSegment::QuinticSegment(Eigen::VectorXd start, Eigen::VectorXd goal, double duration)
    : start_(std::move(start)), delta_(goal - start_), duration_(duration) {
  if (!(duration_ > 0.0)) throw ValidationError("duration", "must be > 0");
}

dynamics::JointState QuinticSegment::at(double t) const {
  const double T = duration_;
  const double u = std::clamp(t / T, 0.0, 1.0);
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double s = u3 * (10.0 - 15.0 * u + 6.0 * u2);
  const double ds = 30.0 * u2 * (1.0 - 2.0 * u + u2) / T;
  const double dds = 60.0 * u * (1.0 - 3.0 * u + 2.0 * u2) / (T * T);
  return {start_ + s * delta_, ds * delta_, dds * delta_};
}

double QuinticSegment::peak_acceleration_factor() { return 10.0 / std::sqrt(3.0); }

double QuinticSegment::min_duration(double delta, double vmax, double amax) {
  const double d = std::abs(delta);
  if (d == 0.0) return 0.0;
  return std::max(kPeakVelocityFactor * d / vmax, std::sqrt(peak_acceleration_factor() * d / amax));
}

}  // namespace d2k::trajectory
