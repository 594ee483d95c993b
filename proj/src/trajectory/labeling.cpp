#include <random>

#include "d2k/common/error.hpp"
#include "d2k/dynamics/inverse_dynamics.hpp"
#include "d2k/trajectory/trajectory.hpp"

namespace d2k::trajectory {

LabeledSequence label_with_dynamics(const dynamics::RobotModel& model, const JointTrajectory& traj,
                                    const NoiseModel& noise) {
  if (!(noise.torque_noise_sigma >= 0.0)) throw ValidationError("torque_noise_sigma", "must be >= 0");
  std::mt19937_64 rng(noise.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  LabeledSequence out;
  out.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    Eigen::VectorXd tau = dynamics::inverse_dynamics(model, s);
    if (noise.torque_noise_sigma > 0.0) {
      for (Eigen::Index j = 0; j < tau.size(); ++j) tau[j] += noise.torque_noise_sigma * gauss(rng);
    }
    out.push_back({s.q, s.qd, s.qdd, std::move(tau)});
  }
  return out;
}

}  // namespace d2k::trajectory
