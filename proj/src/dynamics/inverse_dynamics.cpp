#include "d2k/dynamics/inverse_dynamics.hpp"

#include <vector>

#include "d2k/dynamics/kinematics.hpp"

namespace d2k::dynamics {

Eigen::VectorXd inverse_dynamics(const RobotModel& model, const JointState& s) {
  check_state(model, s);
  const std::size_t n = model.n_joints();
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();

  std::vector<Eigen::Matrix3d> rot(n);      // R_{i-1,i}
  std::vector<Eigen::Vector3d> origin(n);   // origin of i in frame i-1
  std::vector<Eigen::Vector3d> force(n);    // net force on link i
  std::vector<Eigen::Vector3d> moment(n);   // net moment on link i about its com

  // Base acceleration of -g folds gravity into the outward pass.
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  Eigen::Vector3d wd = Eigen::Vector3d::Zero();
  Eigen::Vector3d vd = -model.gravity;

  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const auto t = joint_transform(model, i, s.q[k]);
    rot[i] = t.linear();
    origin[i] = t.translation();
    const Eigen::Matrix3d rt = rot[i].transpose();

    const Eigen::Vector3d w_prev = w;
    vd = rt * (wd.cross(origin[i]) + w_prev.cross(w_prev.cross(origin[i])) + vd);
    w = rt * w_prev + s.qd[k] * z;
    wd = rt * wd + (rt * w_prev).cross(s.qd[k] * z) + s.qdd[k] * z;

    const Eigen::Vector3d& c = model.com[i];
    const Eigen::Vector3d vcd = wd.cross(c) + w.cross(w.cross(c)) + vd;
    force[i] = model.mass[k] * vcd;
    moment[i] = model.inertia[i] * wd + w.cross(model.inertia[i] * w);
  }

  Eigen::VectorXd tau(n);
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
  Eigen::Vector3d nm = Eigen::Vector3d::Zero();
  for (std::size_t ii = n; ii-- > 0;) {
    const auto k = static_cast<Eigen::Index>(ii);
    Eigen::Vector3d f_child = Eigen::Vector3d::Zero();
    Eigen::Vector3d n_child = Eigen::Vector3d::Zero();
    if (ii + 1 < n) {
      f_child = rot[ii + 1] * f;
      n_child = rot[ii + 1] * nm + origin[ii + 1].cross(f_child);
    }
    nm = moment[ii] + n_child + model.com[ii].cross(force[ii]);
    f = force[ii] + f_child;
    tau[k] = nm.dot(z) + model.friction[k] * s.qd[k];
  }
  return tau;
}

Energy total_energy(const RobotModel& model, const JointState& s) {
  check_state(model, s);
  const std::size_t n = model.n_joints();
  Energy e;
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();  // velocity of the frame origin, link coordinates
  Eigen::Isometry3d base_t = Eigen::Isometry3d::Identity();
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const auto t = joint_transform(model, i, s.q[k]);
    const Eigen::Matrix3d rt = t.linear().transpose();
    v = rt * (v + w.cross(t.translation()));
    w = rt * w + s.qd[k] * Eigen::Vector3d::UnitZ();
    base_t = base_t * t;

    const Eigen::Vector3d& c = model.com[i];
    const Eigen::Vector3d vc = v + w.cross(c);
    e.kinetic += 0.5 * model.mass[k] * vc.squaredNorm() + 0.5 * w.dot(model.inertia[i] * w);
    e.potential -= model.mass[k] * model.gravity.dot(base_t * c);
  }
  return e;
}

double friction_dissipation(const RobotModel& model, const Eigen::VectorXd& qd) {
  return (model.friction.array() * qd.array().square()).sum();
}

}  // namespace d2k::dynamics
