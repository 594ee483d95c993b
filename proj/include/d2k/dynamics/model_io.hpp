#pragma once

#include <filesystem>
#include <string>

#include "d2k/common/error.hpp"
#include "d2k/dynamics/robot_model.hpp"

namespace d2k::dynamics {

/// Load / validation failure in a robot model document. `line()` is 1-based.
class ModelFileError : public Error {
 public:
  ModelFileError(int line, const std::string& message)
      : Error("model_file", "line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/**
 * Parse a robot model from YAML text. Keys are the RobotModel field names:
 *
 *   name, n_joints, a, d, alpha, theta_offset, mass, com, inertia,
 *   q_min, q_max, qd_max, qdd_max, tau_max, gravity, friction,
 *   flange_offset (optional), home (optional)
 *
 * `com` is a list of 3-vectors and `inertia` a list of 3x3 row-major nested
 * lists. Every invariant is checked; failures name the offending line.
 */
RobotModel parse_robot_model(const std::string& text);
RobotModel load_robot_model(const std::filesystem::path& path);

std::string dump_robot_model(const RobotModel& model);

/// Lightweight 7-joint arm shipped with the project (mirrors config/robot_default.yaml).
RobotModel default_robot_model();

}  // namespace d2k::dynamics
