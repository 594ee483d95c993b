#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "d2k/trajectory/trajectory.hpp"

namespace d2k::store {

using Json = nlohmann::ordered_json;

enum class Purpose { train, validation, evaluation };

std::string to_string(Purpose p);
/// Throws ValidationError("purpose", ...) for anything but the three literals.
Purpose parse_purpose(std::string_view text);

/// One recorded (or simulated) motion with its FAIR metadata. Samples are
/// stored column-wise: column k of q/qd/qdd/tau is sample k.
struct TrajectoryRecord {
  std::string record_id;
  std::string robot_type;
  std::string instance_id;
  std::string site;
  Purpose purpose = Purpose::train;
  double velocity_scaling = 1.0;
  double acceleration_scaling = 1.0;
  std::string software_commit;
  std::string created_utc;
  double dt = 0.01;
  Eigen::MatrixXd q, qd, qdd, tau;

  std::size_t n_joints() const { return static_cast<std::size_t>(q.rows()); }
  std::size_t n_samples() const { return static_cast<std::size_t>(q.cols()); }
  trajectory::LabeledSample sample(std::size_t k) const;
  trajectory::LabeledSequence samples() const;
  void set_samples(const trajectory::LabeledSequence& samples);

  /// Checks every invariant except record_id / created_utc presence, which
  /// the store fills in when absent. Throws ValidationError naming the field.
  void validate() const;
};

using RecordPtr = std::shared_ptr<const TrajectoryRecord>;

/// Field names as they appear in the JSONL format.
const std::vector<std::string>& record_fields();
const std::vector<std::string>& sample_fields();

Json to_json(const TrajectoryRecord& r);
TrajectoryRecord record_from_json(const Json& j);

/// One JSONL line (no trailing newline).
std::string serialize_record(const TrajectoryRecord& r);
TrajectoryRecord parse_record(std::string_view line);

/// Record restricted to `projection` (record-level and/or sample-level field
/// names). record_id is always kept.
Json project(const TrajectoryRecord& r, const std::vector<std::string>& projection);

}  // namespace d2k::store
