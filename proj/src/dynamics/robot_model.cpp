#include "d2k/dynamics/robot_model.hpp"

#include <cmath>
#include <numbers>

#include "d2k/common/error.hpp"

namespace d2k::dynamics {
namespace {

void require_size(const Eigen::VectorXd& v, std::size_t n, const char* field) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw ValidationError(field, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  }
}

void require_finite(const Eigen::VectorXd& v, const char* field) {
  if (!v.allFinite()) throw ValidationError(field, "non-finite value");
}

bool spd(const Eigen::Matrix3d& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  Eigen::LLT<Eigen::Matrix3d> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void RobotModel::validate() const {
  const std::size_t n = n_joints();
  if (n < 1) throw ValidationError("n_joints", "must be >= 1");
  require_size(d, n, "d");
  require_size(alpha, n, "alpha");
  require_size(theta_offset, n, "theta_offset");
  require_size(mass, n, "mass");
  require_size(q_min, n, "q_min");
  require_size(q_max, n, "q_max");
  require_size(qd_max, n, "qd_max");
  require_size(qdd_max, n, "qdd_max");
  require_size(tau_max, n, "tau_max");
  require_size(friction, n, "friction");
  require_size(home, n, "home");
  if (com.size() != n) throw ValidationError("com", "expected one vector per link");
  if (inertia.size() != n) throw ValidationError("inertia", "expected one matrix per link");

  for (const auto& [v, f] : {std::pair{&a, "a"}, {&d, "d"}, {&alpha, "alpha"}, {&theta_offset, "theta_offset"},
                             {&mass, "mass"}, {&q_min, "q_min"}, {&q_max, "q_max"}, {&qd_max, "qd_max"},
                             {&qdd_max, "qdd_max"}, {&tau_max, "tau_max"}, {&friction, "friction"},
                             {&home, "home"}}) {
    require_finite(*v, f);
  }
  if (!gravity.allFinite()) throw ValidationError("gravity", "non-finite value");
  if (!flange_offset.allFinite()) throw ValidationError("flange_offset", "non-finite value");

  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = "[" + std::to_string(i) + "]";
    if (!(mass[i] > 0.0)) throw ValidationError("mass" + idx, "must be > 0");
    if (!com[i].allFinite()) throw ValidationError("com" + idx, "non-finite value");
    if (!inertia[i].allFinite() || !spd(inertia[i])) {
      throw ValidationError("inertia" + idx, "must be symmetric positive definite");
    }
    if (!(q_min[i] < q_max[i])) throw ValidationError("q_min" + idx, "must be < q_max");
    if (!(qd_max[i] > 0.0)) throw ValidationError("qd_max" + idx, "must be > 0");
    if (!(qdd_max[i] > 0.0)) throw ValidationError("qdd_max" + idx, "must be > 0");
    if (!(tau_max[i] > 0.0)) throw ValidationError("tau_max" + idx, "must be > 0");
    if (friction[i] < 0.0) throw ValidationError("friction" + idx, "must be >= 0");
  }
}

bool RobotModel::operator==(const RobotModel& o) const {
  if (n_joints() != o.n_joints()) return false;
  return name == o.name && a == o.a && d == o.d && alpha == o.alpha && theta_offset == o.theta_offset &&
         mass == o.mass && com == o.com && inertia == o.inertia && q_min == o.q_min && q_max == o.q_max &&
         qd_max == o.qd_max && qdd_max == o.qdd_max && tau_max == o.tau_max && gravity == o.gravity &&
         friction == o.friction && flange_offset == o.flange_offset && home == o.home;
}

RobotModel make_blank_model(std::size_t n) {
  RobotModel m;
  m.name = "blank" + std::to_string(n);
  m.a = Eigen::VectorXd::Zero(n);
  m.d = Eigen::VectorXd::Zero(n);
  m.alpha = Eigen::VectorXd::Zero(n);
  m.theta_offset = Eigen::VectorXd::Zero(n);
  m.mass = Eigen::VectorXd::Ones(n);
  m.com.assign(n, Eigen::Vector3d::Zero());
  m.inertia.assign(n, Eigen::Matrix3d::Identity() * 1e-6);
  m.q_min = Eigen::VectorXd::Constant(n, -std::numbers::pi);
  m.q_max = Eigen::VectorXd::Constant(n, std::numbers::pi);
  m.qd_max = Eigen::VectorXd::Constant(n, 2.0);
  m.qdd_max = Eigen::VectorXd::Constant(n, 10.0);
  m.tau_max = Eigen::VectorXd::Constant(n, 100.0);
  m.friction = Eigen::VectorXd::Zero(n);
  m.home = Eigen::VectorXd::Zero(n);
  return m;
}

RobotModel apply_perturbation(const RobotModel& model, const InstancePerturbation& p) {
  const std::size_t n = model.n_joints();
  if (!p.mass_scales.empty() && p.mass_scales.size() != n) {
    throw DimensionError("mass_scales must have one entry per link");
  }
  RobotModel out = model;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = p.mass_scales.empty() ? 1.0 : p.mass_scales[i];
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ValidationError("mass_scales[" + std::to_string(i) + "]", "perturbed mass must be > 0");
    }
    // uniform density scaling: inertia scales with mass, com unchanged
    out.mass[i] = model.mass[i] * s;
    out.inertia[i] = model.inertia[i] * s;
  }
  if (p.payload_mass < 0.0 || !std::isfinite(p.payload_mass)) {
    throw ValidationError("payload_mass", "must be >= 0");
  }
  if (!(p.friction_scale >= 0.0) || !std::isfinite(p.friction_scale)) {
    throw ValidationError("friction_scale", "must be >= 0");
  }
  if (p.payload_mass > 0.0) {
    const std::size_t k = n - 1;
    const double m0 = out.mass[k];
    const double mp = p.payload_mass;
    const double mt = m0 + mp;
    const Eigen::Vector3d c0 = out.com[k];
    const Eigen::Vector3d c = (m0 * c0 + mp * p.payload_offset) / mt;
    auto shift = [](double m, const Eigen::Vector3d& r) {
      return (m * (r.squaredNorm() * Eigen::Matrix3d::Identity() - r * r.transpose())).eval();
    };
    out.inertia[k] = out.inertia[k] + shift(m0, c0 - c) + shift(mp, p.payload_offset - c);
    out.inertia[k] = 0.5 * (out.inertia[k] + out.inertia[k].transpose()).eval();
    out.mass[k] = mt;
    out.com[k] = c;
  }
  if (p.friction_scale != 1.0) out.friction = model.friction * p.friction_scale;
  out.validate();
  return out;
}

void check_state(const RobotModel& model, const JointState& s) {
  const auto n = static_cast<Eigen::Index>(model.n_joints());
  if (s.q.size() != n || s.qd.size() != n || s.qdd.size() != n) {
    throw DimensionError("joint state has " + std::to_string(s.q.size()) + "/" + std::to_string(s.qd.size()) +
                         "/" + std::to_string(s.qdd.size()) + " entries, model has " + std::to_string(n) +
                         " joints");
  }
  if (!s.q.allFinite() || !s.qd.allFinite() || !s.qdd.allFinite()) {
    throw NonFiniteError("joint state contains non-finite values");
  }
}

}  // namespace d2k::dynamics
