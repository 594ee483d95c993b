#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d2k/store/record.hpp"
#include "d2k/trajectory/trajectory.hpp"

namespace d2k::learner {

/// One whole trajectory: features [q; qd; qdd] (3n x T) and torques (n x T).
struct Sequence {
  std::string id;
  store::Purpose purpose = store::Purpose::train;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;

  Eigen::Index n_joints() const { return y.rows(); }
  Eigen::Index length() const { return y.cols(); }
};

using Dataset = std::vector<Sequence>;

Sequence to_sequence(const store::TrajectoryRecord& r);
Sequence to_sequence(const trajectory::LabeledSequence& samples, std::string id,
                     store::Purpose purpose = store::Purpose::train);
Dataset to_dataset(const std::vector<store::RecordPtr>& records);

/// Hash over the numeric payload, in dataset order.
std::string dataset_hash(const Dataset& d);

/// All columns of all sequences side by side.
Eigen::MatrixXd stack_features(const Dataset& d);
Eigen::MatrixXd stack_targets(const Dataset& d);

/// Trajectory indices held out by each fold. Trajectories are shuffled with
/// `seed` and dealt round-robin, so every trajectory is held out once.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n_trajectories, int folds, std::uint64_t seed);

}  // namespace d2k::learner
