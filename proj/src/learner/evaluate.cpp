#include "d2k/learner/evaluate.hpp"

#include "d2k/common/error.hpp"

namespace d2k::learner {

EvalReport evaluate(const Predictor& predict, const Dataset& data, const Eigen::VectorXd& tau_max,
                    double sensor_floor) {
  if (data.empty()) throw ValidationError("dataset", "must not be empty");
  const auto n = data.front().n_joints();
  if (tau_max.size() != n) throw DimensionError("tau_max does not match the joint count");
  Eigen::VectorXd abs_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd max_target = Eigen::VectorXd::Zero(n);
  EvalReport r;
  for (const auto& s : data) {
    if (s.purpose != store::Purpose::evaluation) {
      throw ValidationError("purpose", "trajectory " + s.id + " is not an evaluation record");
    }
    if (s.n_joints() != n) throw DimensionError("mixed joint counts in evaluation data");
    const Eigen::MatrixXd pred = predict(s.x);
    if (pred.rows() != s.y.rows() || pred.cols() != s.y.cols()) {
      throw DimensionError("prediction shape does not match the targets");
    }
    abs_sum += (pred - s.y).cwiseAbs().rowwise().sum();
    max_target = max_target.cwiseMax(s.y.cwiseAbs().rowwise().maxCoeff());
    r.n_steps += static_cast<std::size_t>(s.length());
  }
  r.n_trajectories = data.size();
  r.per_joint_mae = abs_sum / static_cast<double>(r.n_steps);
  r.mae = r.per_joint_mae.mean();
  r.theoretical_max_mae = (tau_max + max_target).mean();
  r.sensor_floor = sensor_floor;
  return r;
}

EvalReport evaluate(const ModelCheckpoint& ckpt, const Dataset& data, const dynamics::RobotModel& model,
                    double sensor_floor) {
  return evaluate([&](const Eigen::MatrixXd& x) { return forward(ckpt, x); }, data, model.tau_max, sensor_floor);
}

Json to_json(const EvalReport& r) {
  Json j;
  j["mae"] = r.mae;
  j["per_joint_mae"] = std::vector<double>(r.per_joint_mae.data(), r.per_joint_mae.data() + r.per_joint_mae.size());
  j["theoretical_max_mae"] = r.theoretical_max_mae;
  j["sensor_floor"] = r.sensor_floor;
  j["n_trajectories"] = r.n_trajectories;
  j["n_steps"] = r.n_steps;
  return j;
}

EvalReport eval_report_from_json(const Json& j) {
  EvalReport r;
  try {
    r.mae = j.at("mae").get<double>();
    const auto pj = j.at("per_joint_mae").get<std::vector<double>>();
    r.per_joint_mae = Eigen::Map<const Eigen::VectorXd>(pj.data(), static_cast<Eigen::Index>(pj.size()));
    r.theoretical_max_mae = j.at("theoretical_max_mae").get<double>();
    r.sensor_floor = j.at("sensor_floor").get<double>();
    r.n_trajectories = j.value("n_trajectories", std::size_t{0});
    r.n_steps = j.value("n_steps", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("eval_report", e.what());
  }
  return r;
}

}  // namespace d2k::learner
