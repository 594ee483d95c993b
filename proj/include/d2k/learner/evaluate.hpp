#pragma once

#include <functional>

#include <Eigen/Dense>

#include "d2k/dynamics/robot_model.hpp"
#include "d2k/learner/dataset.hpp"
#include "d2k/learner/model.hpp"

namespace d2k::learner {

struct EvalReport {
  double mae = 0.0;                 ///< [N m] over all joints and steps
  Eigen::VectorXd per_joint_mae;    ///< [N m]
  /// Mean over joints of tau_max_j + max |target_j|: the error of a
  /// predictor that saturates on the wrong side at every step.
  double theoretical_max_mae = 0.0;
  double sensor_floor = 0.15;       ///< [N m]
  std::size_t n_trajectories = 0;
  std::size_t n_steps = 0;
};

Json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const Json& j);

/// Maps features (3n x T) to torques (n x T).
using Predictor = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Every sequence must be of purpose evaluation; throws ValidationError on an
/// empty dataset or another purpose.
EvalReport evaluate(const Predictor& predict, const Dataset& data, const Eigen::VectorXd& tau_max,
                    double sensor_floor = 0.15);
EvalReport evaluate(const ModelCheckpoint& ckpt, const Dataset& data, const dynamics::RobotModel& model,
                    double sensor_floor = 0.15);

}  // namespace d2k::learner
