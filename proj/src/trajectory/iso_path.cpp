#include "d2k/trajectory/iso_path.hpp"

#include <cmath>
#include <numbers>

#include "d2k/common/error.hpp"
#include "d2k/dynamics/kinematics.hpp"

namespace d2k::trajectory {
namespace {

// Speed ramp S(u) = 35u^4 - 84u^5 + 70u^6 - 20u^7: first three derivatives
// vanish at both ends, so the Cartesian snap stays continuous.
double ramp(double u) {
  const double u4 = u * u * u * u;
  return u4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)));
}
double ramp_integral(double u) {
  const double u5 = u * u * u * u * u;
  return u5 * (7.0 + u * (-14.0 + u * (10.0 - 2.5 * u)));
}
double ramp_slope(double u) {
  const double w = u * (1.0 - u);
  return 140.0 * w * w * w;
}
constexpr double kRampPeakSlope = 2.1875;  // S'(1/2)

struct ArcState {
  double s, sd, sdd;
};

ArcState arc_length(const PathPrimitive& p, double t) {
  const double v = p.cruise_speed;
  const double tr = p.ramp_time;
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= p.duration()) return {p.length, 0.0, 0.0};
  if (t < tr) {
    const double u = t / tr;
    return {v * tr * ramp_integral(u), v * ramp(u), v / tr * ramp_slope(u)};
  }
  if (t < tr + p.cruise_time) return {0.5 * v * tr + v * (t - tr), v, 0.0};
  const double u = (t - tr - p.cruise_time) / tr;
  const double s_cruise_end = 0.5 * v * tr + v * p.cruise_time;
  return {s_cruise_end + v * tr * (u - ramp_integral(u)), v * (1.0 - ramp(u)), -v / tr * ramp_slope(u)};
}

double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

using Matrix3Xd = Eigen::Matrix<double, 3, Eigen::Dynamic>;

Eigen::VectorXd dls_solve(const Matrix3Xd& j, const Eigen::Vector3d& rhs, double damping) {
  const Eigen::Matrix3d jjt = j * j.transpose() + damping * damping * Eigen::Matrix3d::Identity();
  return j.transpose() * jjt.ldlt().solve(rhs);
}

}  // namespace

void IsoFigure::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) throw ValidationError("figure", "width and height must be > 0");
  if (std::abs(u_axis.norm() - 1.0) > 1e-9 || std::abs(v_axis.norm() - 1.0) > 1e-9 ||
      std::abs(u_axis.dot(v_axis)) > 1e-9) {
    throw ValidationError("figure", "u_axis and v_axis must be orthonormal");
  }
}

IsoFigurePath::IsoFigurePath(const IsoFigure& figure, double max_speed, double max_accel)
    : figure_(figure), max_speed_(max_speed), max_accel_(max_accel) {
  figure_.validate();
  if (!(max_speed > 0.0) || !(max_accel > 0.0)) {
    throw ValidationError("cartesian_limits", "speed and acceleration must be > 0");
  }
  const auto& f = figure_;
  auto plane = [&](double x, double y) -> Eigen::Vector3d { return f.center + x * f.u_axis + y * f.v_axis; };
  const double hw = 0.5 * f.width;
  const double hh = 0.5 * f.height;
  const Eigen::Vector3d p1 = plane(-hw, -hh), p2 = plane(hw, -hh), p3 = plane(hw, hh), p4 = plane(-hw, hh);

  // perimeter, first diagonal, edge back, second diagonal, edge back
  add_line(p1, p2);
  add_line(p2, p3);
  add_line(p3, p4);
  add_line(p4, p1);
  add_line(p1, p3);
  add_line(p3, p2);
  add_line(p2, p4);
  add_line(p4, p1);
  // along an edge to where the inscribed circle touches it, then one full turn
  if (f.height <= f.width) {
    add_line(p1, plane(0.0, -hh));
    add_arc(f.center, hh, -0.5 * std::numbers::pi, 2.0 * std::numbers::pi);
  } else {
    add_line(p1, plane(-hw, 0.0));
    add_arc(f.center, hw, std::numbers::pi, 2.0 * std::numbers::pi);
  }
}

void IsoFigurePath::time_primitive(PathPrimitive& p) {
  double v = max_speed_;
  // full ramps need kRampPeakSlope v^2 / a of path; lower the cruise speed otherwise
  if (kRampPeakSlope * v * v / max_accel_ > p.length) v = std::sqrt(p.length * max_accel_ / kRampPeakSlope);
  if (p.kind == PathPrimitive::Kind::arc) {
    // keep centripetal acceleration within the same budget
    v = std::min(v, std::sqrt(0.5 * max_accel_ * p.radius));
  }
  p.cruise_speed = v;
  p.ramp_time = kRampPeakSlope * v / max_accel_;
  p.cruise_time = std::max(0.0, (p.length - v * p.ramp_time) / v);
  p.t0 = primitives_.empty() ? 0.0 : primitives_.back().t0 + primitives_.back().duration();
}

void IsoFigurePath::add_line(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  PathPrimitive p;
  p.kind = PathPrimitive::Kind::line;
  p.start = a;
  p.end = b;
  p.length = (b - a).norm();
  time_primitive(p);
  primitives_.push_back(p);
}

void IsoFigurePath::add_arc(const Eigen::Vector3d& center, double radius, double start_angle, double sweep) {
  PathPrimitive p;
  p.kind = PathPrimitive::Kind::arc;
  p.center = center;
  p.radius = radius;
  p.start_angle = start_angle;
  p.sweep = sweep;
  p.start = center + radius * (std::cos(start_angle) * figure_.u_axis + std::sin(start_angle) * figure_.v_axis);
  p.length = radius * std::abs(sweep);
  time_primitive(p);
  primitives_.push_back(p);
}

double IsoFigurePath::duration() const { return primitives_.back().t0 + primitives_.back().duration(); }

CartesianSample IsoFigurePath::at(double t) const {
  std::size_t idx = 0;
  while (idx + 1 < primitives_.size() && t >= primitives_[idx + 1].t0) ++idx;
  const auto& p = primitives_[idx];
  const auto [s, sd, sdd] = arc_length(p, t - p.t0);
  CartesianSample out;
  out.primitive = idx;
  if (p.kind == PathPrimitive::Kind::line) {
    const Eigen::Vector3d dir = (p.end - p.start) / p.length;
    out.position = p.start + s * dir;
    out.velocity = sd * dir;
    out.acceleration = sdd * dir;
  } else {
    const double sign = p.sweep >= 0.0 ? 1.0 : -1.0;
    const double th = p.start_angle + sign * s / p.radius;
    const double thd = sign * sd / p.radius;
    const double thdd = sign * sdd / p.radius;
    const Eigen::Vector3d radial = std::cos(th) * figure_.u_axis + std::sin(th) * figure_.v_axis;
    const Eigen::Vector3d tangent = -std::sin(th) * figure_.u_axis + std::cos(th) * figure_.v_axis;
    out.position = p.center + p.radius * radial;
    out.velocity = p.radius * thd * tangent;
    out.acceleration = p.radius * thdd * tangent - p.radius * thd * thd * radial;
  }
  return out;
}

double IsoFigurePath::distance_to_figure(const Eigen::Vector3d& x) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : primitives_) {
    if (p.kind == PathPrimitive::Kind::line) {
      best = std::min(best, point_segment_distance(x, p.start, p.end));
    } else {
      const Eigen::Vector3d n = figure_.u_axis.cross(figure_.v_axis);
      const Eigen::Vector3d rel = x - p.center;
      const double off_plane = rel.dot(n);
      const double in_plane = (rel - off_plane * n).norm();
      best = std::min(best, std::hypot(off_plane, in_plane - p.radius));
    }
  }
  return best;
}

IsoPathResult track_iso_path(const dynamics::RobotModel& model, const ProfileParams& params,
                             const IsoPathConfig& config) {
  params.validate();
  if (config.substeps < 1) throw ValidationError("substeps", "must be >= 1");
  const IsoFigurePath path(config.figure, params.velocity_scaling * config.max_cartesian_speed,
                           params.acceleration_scaling * config.max_cartesian_accel);
  const double lambda = config.ik_damping;
  const double gain = config.feedback_gain;

  auto clamp_limits = [&](Eigen::VectorXd& q) { q = q.cwiseMax(model.q_min).cwiseMin(model.q_max); };
  auto position_jacobian = [&](const Eigen::VectorXd& q) -> Matrix3Xd {
    return dynamics::jacobian(model, q).topRows<3>();
  };
  auto field = [&](double t, const Eigen::VectorXd& q) -> Eigen::VectorXd {
    const auto ref = path.at(t);
    const Eigen::Vector3d err = ref.position - dynamics::forward_kinematics(model, q).position;
    return dls_solve(position_jacobian(q), ref.velocity + gain * err, lambda);
  };

  // position IK for the figure start, seeded at home
  Eigen::VectorXd q = model.home;
  const Eigen::Vector3d start = path.at(0.0).position;
  for (int it = 0; it < 500; ++it) {
    const Eigen::Vector3d err = start - dynamics::forward_kinematics(model, q).position;
    if (err.norm() < 1e-12) break;
    q += dls_solve(position_jacobian(q), err, lambda);
    clamp_limits(q);
  }
  if ((start - dynamics::forward_kinematics(model, q).position).norm() > config.residual_bound) {
    throw Error("unreachable", "flange cannot reach the start of the test figure");
  }

  const double dt = params.sample_dt;
  const auto n_steps = static_cast<long>(std::ceil(path.duration() / dt - 1e-9));
  const double h = dt / config.substeps;
  constexpr double eps = 1e-5;

  IsoPathResult result;
  result.trajectory.dt = dt;
  result.trajectory.source = MotionSource::iso_path;
  result.trajectory.samples.reserve(static_cast<std::size_t>(n_steps + 1));
  for (long k = 0; k <= n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eigen::VectorXd qd = field(t, q);
    const Eigen::VectorXd qdd = (field(t + eps, q + eps * qd) - field(t - eps, q - eps * qd)) / (2.0 * eps);
    result.trajectory.samples.push_back({q, qd, qdd});
    const auto ref = path.at(t);
    result.max_residual =
        std::max(result.max_residual, (dynamics::forward_kinematics(model, q).position - ref.position).norm());
    result.commanded.push_back(ref);
    if (k == n_steps) break;
    for (int sub = 0; sub < config.substeps; ++sub) {
      const double ts = t + sub * h;
      const Eigen::VectorXd k1 = field(ts, q);
      const Eigen::VectorXd k2 = field(ts + 0.5 * h, q + 0.5 * h * k1);
      const Eigen::VectorXd k3 = field(ts + 0.5 * h, q + 0.5 * h * k2);
      const Eigen::VectorXd k4 = field(ts + h, q + h * k3);
      q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      clamp_limits(q);
    }
  }
  if (result.max_residual > config.residual_bound) {
    throw Error("ik_divergence", "tracking residual " + std::to_string(result.max_residual) + " m exceeds bound");
  }
  check_limits(model, result.trajectory, params);
  return result;
}

JointTrajectory iso_path(const dynamics::RobotModel& model, const ProfileParams& params,
                         const IsoPathConfig& config) {
  return track_iso_path(model, params, config).trajectory;
}

}  // namespace d2k::trajectory
