#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "d2k/common/error.hpp"
#include "d2k/dynamics/inverse_dynamics.hpp"
#include "d2k/dynamics/kinematics.hpp"
#include "d2k/dynamics/model_io.hpp"
#include "d2k/trajectory/iso_path.hpp"
#include "d2k/trajectory/trajectory.hpp"

using namespace d2k;
using namespace d2k::trajectory;

namespace {

bool bit_identical(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool bit_identical(const JointTrajectory& a, const JointTrajectory& b) {
  if (a.samples.size() != b.samples.size() || a.dt != b.dt) return false;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    if (!bit_identical(a.samples[k].q, b.samples[k].q) || !bit_identical(a.samples[k].qd, b.samples[k].qd) ||
        !bit_identical(a.samples[k].qdd, b.samples[k].qdd)) {
      return false;
    }
  }
  return true;
}

const IsoPathResult& default_iso() {
  static const IsoPathResult r = [] {
    ProfileParams p;
    p.velocity_scaling = kIsoScaling;
    p.acceleration_scaling = kIsoScaling;
    return track_iso_path(dynamics::default_robot_model(), p);
  }();
  return r;
}

}  // namespace

TEST(Quintic, BoundaryConditionsExact) {
  const QuinticSegment seg(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 2.0);
  const auto s0 = seg.at(0.0);
  const auto s1 = seg.at(2.0);
  EXPECT_EQ(s0.q[0], 0.0);
  EXPECT_EQ(s0.qd[0], 0.0);
  EXPECT_EQ(s0.qdd[0], 0.0);
  EXPECT_EQ(s1.q[0], 1.0);
  EXPECT_EQ(s1.qd[0], 0.0);
  EXPECT_EQ(s1.qdd[0], 0.0);
}

TEST(Quintic, PeakVelocityAtMidpoint) {
  // d/dt of dq (10 s^3 - 15 s^4 + 6 s^5), s = t / T, at s = 1/2: dq / T * 30/16
  const QuinticSegment seg(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 2.0);
  EXPECT_NEAR(seg.at(1.0).qd[0], 0.9375, 1e-12);
  EXPECT_NEAR(seg.at(1.0).qd[0], 1.875 * 1.0 / 2.0, 1e-12);
  // and nowhere faster
  for (int k = 0; k <= 200; ++k) EXPECT_LE(seg.at(k * 0.01).qd[0], 0.9375 + 1e-15);
}

TEST(Quintic, PeakAccelerationFactor) {
  const QuinticSegment seg(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 1.0);
  double peak = 0.0;
  for (int k = 0; k <= 100000; ++k) peak = std::max(peak, std::abs(seg.at(k * 1e-5).qdd[0]));
  EXPECT_NEAR(peak, QuinticSegment::peak_acceleration_factor(), 1e-8);
}

TEST(RandomMotion, RespectsScaledLimitsOverSeeds) {
  const auto model = dynamics::default_robot_model();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> scale(0.05, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    ProfileParams p;
    p.velocity_scaling = scale(rng);
    p.acceleration_scaling = scale(rng);
    p.n_waypoints = 2 + trial % 4;
    p.rng_seed = rng();
    const auto traj = sample_random_motion(model, p);
    EXPECT_NO_THROW(check_limits(model, traj, p));
    double peak_ratio = 0.0;
    for (const auto& s : traj.samples) {
      peak_ratio = std::max(peak_ratio, (s.qd.cwiseAbs().array() / (p.velocity_scaling * model.qd_max.array())).maxCoeff());
    }
    EXPECT_LE(peak_ratio, 1.0 + 1e-9);
  }
}

TEST(RandomMotion, DeterministicGivenSeed) {
  const auto model = dynamics::default_robot_model();
  ProfileParams p;
  p.velocity_scaling = 0.4;
  p.acceleration_scaling = 0.3;
  p.n_waypoints = 4;
  p.rng_seed = 1234;
  EXPECT_TRUE(bit_identical(sample_random_motion(model, p), sample_random_motion(model, p)));
  auto p2 = p;
  p2.rng_seed = 1235;
  EXPECT_FALSE(bit_identical(sample_random_motion(model, p), sample_random_motion(model, p2)));
}

TEST(RandomMotion, WaypointsLandOnSamplesAtRest) {
  const auto model = dynamics::default_robot_model();
  ProfileParams p;
  p.n_waypoints = 2;
  p.rng_seed = 3;
  const auto traj = sample_random_motion(model, p);
  EXPECT_EQ(traj.samples.front().qd.norm(), 0.0);
  EXPECT_EQ(traj.samples.back().qd.norm(), 0.0);
  EXPECT_EQ(traj.samples.back().qdd.norm(), 0.0);
}

TEST(RandomMotion, BoundedWaypointsStayInInterval) {
  const auto model = dynamics::default_robot_model();
  WaypointBounds b;
  b.per_joint.resize(7);
  b.per_joint[1] = std::pair{0.5, 0.7};
  ProfileParams p;
  p.n_waypoints = 5;
  p.rng_seed = 77;
  const auto traj = sample_random_motion(model, p, b);
  for (const auto& s : traj.samples) {
    EXPECT_GE(s.q[1], 0.5);
    EXPECT_LE(s.q[1], 0.7);
  }
  b.per_joint[1] = std::pair{2.0, 5.0};
  EXPECT_THROW(sample_random_motion(model, p, b), ValidationError);
}

TEST(RandomMotion, RejectsBadParams) {
  const auto model = dynamics::default_robot_model();
  ProfileParams p;
  p.n_waypoints = 1;
  EXPECT_THROW(sample_random_motion(model, p), ValidationError);
  p.n_waypoints = 2;
  p.velocity_scaling = 0.0;
  EXPECT_THROW(sample_random_motion(model, p), ValidationError);
  p.velocity_scaling = 0.5;
  p.acceleration_scaling = -0.1;
  EXPECT_THROW(sample_random_motion(model, p), ValidationError);
}

TEST(IsoPath, TracksFigureWithinBound) {
  const auto model = dynamics::default_robot_model();
  const auto& r = default_iso();
  IsoFigurePath figure(IsoFigure{}, 1.0, 1.0);
  EXPECT_LT(r.max_residual, 1e-3);
  for (std::size_t k = 0; k < r.trajectory.samples.size(); ++k) {
    const auto p = dynamics::forward_kinematics(model, r.trajectory.samples[k].q).position;
    ASSERT_LT(figure.distance_to_figure(p), 1e-3) << "sample " << k;
  }
  EXPECT_EQ(r.trajectory.source, MotionSource::iso_path);
}

TEST(IsoPath, CircleRadiusRecomputedFromJointSamples) {
  const auto model = dynamics::default_robot_model();
  const auto& r = default_iso();
  const IsoFigure fig;
  const std::size_t circle = 9;
  std::size_t count = 0;
  for (std::size_t k = 0; k < r.trajectory.samples.size(); ++k) {
    if (r.commanded[k].primitive != circle) continue;
    ++count;
    const auto p = dynamics::forward_kinematics(model, r.trajectory.samples[k].q).position;
    EXPECT_LT(std::abs((p - fig.center).norm() - fig.circle_radius()), 1e-3);
  }
  EXPECT_GT(count, 100u);
}

TEST(IsoPath, StoredDerivativesMatchNumericalDifferentiation) {
  const auto& traj = default_iso().trajectory;
  const double dt = traj.dt;
  double worst_qd = 0.0, worst_qdd = 0.0;
  for (std::size_t k = 1; k + 1 < traj.samples.size(); ++k) {
    const auto& a = traj.samples[k - 1];
    const auto& b = traj.samples[k + 1];
    worst_qd = std::max(worst_qd, ((b.q - a.q) / (2 * dt) - traj.samples[k].qd).cwiseAbs().maxCoeff());
    worst_qdd = std::max(worst_qdd, ((b.qd - a.qd) / (2 * dt) - traj.samples[k].qdd).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst_qd, 1e-3);
  EXPECT_LT(worst_qdd, 1e-3);
}

TEST(IsoPath, UsesScaledLimitsAndIsDeterministic) {
  const auto model = dynamics::default_robot_model();
  ProfileParams p;
  p.velocity_scaling = kIsoScaling;
  p.acceleration_scaling = kIsoScaling;
  EXPECT_EQ(kIsoScaling, 0.25);
  EXPECT_NO_THROW(check_limits(model, default_iso().trajectory, p));
  EXPECT_TRUE(bit_identical(iso_path(model, p), default_iso().trajectory));
}

TEST(IsoPath, UnreachablePlaneRejected) {
  const auto model = dynamics::default_robot_model();
  ProfileParams p;
  p.velocity_scaling = p.acceleration_scaling = kIsoScaling;
  IsoPathConfig cfg;
  cfg.figure.center = Eigen::Vector3d(2.0, 0.0, 0.5);
  try {
    iso_path(model, p, cfg);
    FAIL() << "expected unreachable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unreachable");
  }
}

TEST(Labeling, NoiselessLabelsEqualInverseDynamics) {
  const auto model = dynamics::default_robot_model();
  ProfileParams p;
  p.rng_seed = 5;
  const auto traj = sample_random_motion(model, p);
  const auto labels = label_with_dynamics(model, traj, NoiseModel{0.0, 1});
  ASSERT_EQ(labels.size(), traj.samples.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    EXPECT_TRUE(bit_identical(labels[k].tau, dynamics::inverse_dynamics(model, traj.samples[k])));
  }
}

TEST(Labeling, NoiseIsSeededAndHasRequestedSpread) {
  const auto model = dynamics::default_robot_model();
  ProfileParams p;
  p.n_waypoints = 6;
  p.rng_seed = 8;
  const auto traj = sample_random_motion(model, p);
  const NoiseModel noise{0.05, 4242};
  const auto a = label_with_dynamics(model, traj, noise);
  const auto b = label_with_dynamics(model, traj, noise);
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_TRUE(bit_identical(a[k].tau, b[k].tau));

  // std of (label - truth) over >= 10,000 draws
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; count < 10000; ++seed) {
    const auto labels = label_with_dynamics(model, traj, NoiseModel{0.05, seed});
    for (std::size_t k = 0; k < labels.size() && count < 10000; ++k) {
      const double e = labels[k].tau[0] - dynamics::inverse_dynamics(model, traj.samples[k])[0];
      sum += e;
      sum2 += e * e;
      ++count;
    }
  }
  const double mean = sum / count;
  const double sd = std::sqrt(sum2 / count - mean * mean);
  EXPECT_GE(sd, 0.045);
  EXPECT_LE(sd, 0.055);
}
