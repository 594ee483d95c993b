#pragma once

#include <vector>

#include <Eigen/Dense>

#include "d2k/trajectory/trajectory.hpp"

namespace d2k::trajectory {

/// Planar test figure in the style of the ISO 9283 path tests: rectangle
/// perimeter, both diagonals and the inscribed circle. The plane is spanned
/// by the orthonormal `u_axis` / `v_axis` through `center`.
///
/// Defaults suit the shipped 7-joint arm: a vertical 0.3 m square facing the
/// robot 0.45 m in front of the base.
struct IsoFigure {
  Eigen::Vector3d center{0.45, 0.0, 0.45};
  Eigen::Vector3d u_axis{0.0, 1.0, 0.0};
  Eigen::Vector3d v_axis{0.0, 0.0, 1.0};
  double width = 0.3;
  double height = 0.3;

  void validate() const;
  double circle_radius() const { return 0.5 * std::min(width, height); }
};

struct IsoPathConfig {
  IsoFigure figure;
  /// Cartesian speed / acceleration at scaling 1; the profile scalings
  /// multiply these.
  double max_cartesian_speed = 0.5;   ///< [m/s]
  double max_cartesian_accel = 1.0;   ///< [m/s^2]
  double ik_damping = 1e-2;
  double feedback_gain = 20.0;        ///< [1/s], closes the tracking loop
  int substeps = 10;                  ///< integrator steps per sample
  double residual_bound = 1e-3;       ///< [m]
};

/// One straight or circular piece of the figure, traversed rest-to-rest:
/// a smooth speed ramp, a constant-speed cruise, a symmetric ramp down.
struct PathPrimitive {
  enum class Kind { line, arc } kind = Kind::line;
  Eigen::Vector3d start;
  Eigen::Vector3d end;        // line only
  Eigen::Vector3d center;     // arc only
  double radius = 0.0;        // arc only
  double start_angle = 0.0;   // arc only, in (u, v) plane coordinates
  double sweep = 0.0;         // arc only, signed

  double length = 0.0;
  double cruise_speed = 0.0;
  double ramp_time = 0.0;
  double cruise_time = 0.0;
  double t0 = 0.0;            // start time within the whole path

  double duration() const { return 2.0 * ramp_time + cruise_time; }
};

struct CartesianSample {
  Eigen::Vector3d position;
  Eigen::Vector3d velocity;
  Eigen::Vector3d acceleration;
  std::size_t primitive = 0;
};

class IsoFigurePath {
 public:
  IsoFigurePath(const IsoFigure& figure, double max_speed, double max_accel);

  double duration() const;
  CartesianSample at(double t) const;
  const std::vector<PathPrimitive>& primitives() const { return primitives_; }
  const IsoFigure& figure() const { return figure_; }

  /// Distance from p to the nearest point of the figure (segments and circle).
  double distance_to_figure(const Eigen::Vector3d& p) const;

 private:
  void add_line(const Eigen::Vector3d& a, const Eigen::Vector3d& b);
  void add_arc(const Eigen::Vector3d& center, double radius, double start_angle, double sweep);
  void time_primitive(PathPrimitive& prim);

  IsoFigure figure_;
  double max_speed_;
  double max_accel_;
  std::vector<PathPrimitive> primitives_;
};

struct IsoPathResult {
  JointTrajectory trajectory;
  std::vector<CartesianSample> commanded;  ///< one per joint sample
  double max_residual = 0.0;               ///< max |fk(q_k) - commanded_k| [m]
};

/**
 * Track the figure with damped-least-squares differential IK on the flange
 * position. The joint path integrates
 *   qd = J^T (J J^T + lambda^2 I)^{-1} (xd_dot + K (xd - fk(q)))
 * from an IK solution at the figure start seeded at the model's home
 * configuration; qd and qdd are evaluated from this velocity field, so they
 * are exact derivatives of the integrated path up to integrator error.
 *
 * Throws Error("unreachable") if the start cannot be reached, and
 * Error("ik_divergence") if any sample's residual exceeds the bound.
 */
IsoPathResult track_iso_path(const dynamics::RobotModel& model, const ProfileParams& params,
                             const IsoPathConfig& config = {});

/// Evaluation motion with the default figure; see track_iso_path.
JointTrajectory iso_path(const dynamics::RobotModel& model, const ProfileParams& params,
                         const IsoPathConfig& config = {});

/// Scalings used for evaluation data.
inline constexpr double kIsoScaling = 0.25;

}  // namespace d2k::trajectory
