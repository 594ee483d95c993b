#include "d2k/store/record.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <utility>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"

namespace d2k::store {
namespace {

bool is_lower_hex(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

bool is_uuid(std::string_view s) {
  if (s.size() != 36) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (s[i] != '-') return false;
    } else if (!is_lower_hex(s.substr(i, 1))) {
      return false;
    }
  }
  return true;
}

// Site names become part of segment file names.
bool is_safe_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  }) && s != "." && s != "..";
}

const Json& require(const Json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end()) throw ValidationError(field, "missing");
  return *it;
}

std::string get_string(const Json& j, const char* field) {
  const auto& v = require(j, field);
  if (!v.is_string()) throw ValidationError(field, "must be a string");
  return v.get<std::string>();
}

double get_number(const Json& j, const char* field) {
  const auto& v = require(j, field);
  if (!v.is_number()) throw ValidationError(field, "must be a number");
  return v.get<double>();
}

Json column_json(const Eigen::MatrixXd& m, Eigen::Index k) {
  Json arr = Json::array();
  for (Eigen::Index j = 0; j < m.rows(); ++j) arr.push_back(m(j, k));
  return arr;
}

const Eigen::MatrixXd& block(const TrajectoryRecord& r, std::string_view name) {
  if (name == "q") return r.q;
  if (name == "qd") return r.qd;
  if (name == "qdd") return r.qdd;
  return r.tau;
}

Eigen::MatrixXd& block(TrajectoryRecord& r, std::string_view name) {
  return const_cast<Eigen::MatrixXd&>(block(std::as_const(r), name));
}

}  // namespace

std::string to_string(Purpose p) {
  switch (p) {
    case Purpose::train: return "train";
    case Purpose::validation: return "validation";
    case Purpose::evaluation: return "evaluation";
  }
  return "train";
}

Purpose parse_purpose(std::string_view text) {
  if (text == "train") return Purpose::train;
  if (text == "validation") return Purpose::validation;
  if (text == "evaluation") return Purpose::evaluation;
  throw ValidationError("purpose", "must be one of train, validation, evaluation (got '" + std::string(text) + "')");
}

trajectory::LabeledSample TrajectoryRecord::sample(std::size_t k) const {
  const auto c = static_cast<Eigen::Index>(k);
  return {q.col(c), qd.col(c), qdd.col(c), tau.col(c)};
}

trajectory::LabeledSequence TrajectoryRecord::samples() const {
  trajectory::LabeledSequence out;
  out.reserve(n_samples());
  for (std::size_t k = 0; k < n_samples(); ++k) out.push_back(sample(k));
  return out;
}

void TrajectoryRecord::set_samples(const trajectory::LabeledSequence& s) {
  if (s.empty()) throw ValidationError("samples", "must not be empty");
  const auto n = s.front().q.size();
  const auto t = static_cast<Eigen::Index>(s.size());
  q.resize(n, t);
  qd.resize(n, t);
  qdd.resize(n, t);
  tau.resize(n, t);
  for (Eigen::Index k = 0; k < t; ++k) {
    const auto& x = s[static_cast<std::size_t>(k)];
    if (x.q.size() != n || x.qd.size() != n || x.qdd.size() != n || x.tau.size() != n) {
      throw ValidationError("samples[" + std::to_string(k) + "]", "joint count differs from first sample");
    }
    q.col(k) = x.q;
    qd.col(k) = x.qd;
    qdd.col(k) = x.qdd;
    tau.col(k) = x.tau;
  }
}

void TrajectoryRecord::validate() const {
  if (!record_id.empty() && !is_uuid(record_id)) throw ValidationError("record_id", "must be a lowercase UUID");
  if (robot_type.empty()) throw ValidationError("robot_type", "must not be empty");
  if (instance_id.empty()) throw ValidationError("instance_id", "must not be empty");
  if (!is_safe_name(site)) throw ValidationError("site", "must be a non-empty name of [A-Za-z0-9._-]");
  if (!(velocity_scaling > 0.0 && velocity_scaling <= 1.0)) {
    throw ValidationError("velocity_scaling", "must be in (0, 1]");
  }
  if (!(acceleration_scaling > 0.0 && acceleration_scaling <= 1.0)) {
    throw ValidationError("acceleration_scaling", "must be in (0, 1]");
  }
  if (!is_lower_hex(software_commit)) throw ValidationError("software_commit", "must be a lowercase hex string");
  if (!created_utc.empty() && !is_iso8601_utc(created_utc)) {
    throw ValidationError("created_utc", "must be YYYY-MM-DDTHH:MM:SS.mmmZ");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt", "must be > 0");
  if (q.cols() == 0 || q.rows() == 0) throw ValidationError("samples", "must not be empty");
  for (const char* name : {"qd", "qdd", "tau"}) {
    const auto& m = block(*this, name);
    if (m.rows() != q.rows() || m.cols() != q.cols()) {
      throw ValidationError("samples", std::string(name) + " shape differs from q");
    }
  }
  for (const auto& name : sample_fields()) {
    if (!block(*this, name).allFinite()) throw ValidationError("samples", name + " contains non-finite values");
  }
}

const std::vector<std::string>& record_fields() {
  static const std::vector<std::string> f{"record_id",   "robot_type",           "instance_id",     "site",
                                          "purpose",     "velocity_scaling",     "acceleration_scaling",
                                          "software_commit", "created_utc", "dt", "samples"};
  return f;
}

const std::vector<std::string>& sample_fields() {
  static const std::vector<std::string> f{"q", "qd", "qdd", "tau"};
  return f;
}

Json to_json(const TrajectoryRecord& r) {
  Json j;
  j["record_id"] = r.record_id;
  j["robot_type"] = r.robot_type;
  j["instance_id"] = r.instance_id;
  j["site"] = r.site;
  j["purpose"] = to_string(r.purpose);
  j["velocity_scaling"] = r.velocity_scaling;
  j["acceleration_scaling"] = r.acceleration_scaling;
  j["software_commit"] = r.software_commit;
  j["created_utc"] = r.created_utc;
  j["dt"] = r.dt;
  Json samples = Json::array();
  for (Eigen::Index k = 0; k < r.q.cols(); ++k) {
    Json s;
    s["q"] = column_json(r.q, k);
    s["qd"] = column_json(r.qd, k);
    s["qdd"] = column_json(r.qdd, k);
    s["tau"] = column_json(r.tau, k);
    samples.push_back(std::move(s));
  }
  j["samples"] = std::move(samples);
  return j;
}

TrajectoryRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("record", "must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(record_fields().begin(), record_fields().end(), key) == record_fields().end()) {
      throw ValidationError(key, "unknown field");
    }
  }
  TrajectoryRecord r;
  if (j.contains("record_id")) r.record_id = get_string(j, "record_id");
  r.robot_type = get_string(j, "robot_type");
  r.instance_id = get_string(j, "instance_id");
  r.site = get_string(j, "site");
  r.purpose = parse_purpose(get_string(j, "purpose"));
  r.velocity_scaling = get_number(j, "velocity_scaling");
  r.acceleration_scaling = get_number(j, "acceleration_scaling");
  r.software_commit = get_string(j, "software_commit");
  if (j.contains("created_utc")) r.created_utc = get_string(j, "created_utc");
  r.dt = get_number(j, "dt");

  const auto& samples = require(j, "samples");
  if (!samples.is_array() || samples.empty()) throw ValidationError("samples", "must be a non-empty array");
  const auto t = static_cast<Eigen::Index>(samples.size());
  Eigen::Index n = -1;
  for (Eigen::Index k = 0; k < t; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    const auto where = "samples[" + std::to_string(k) + "]";
    if (!s.is_object() || s.size() != 4) throw ValidationError(where, "must be an object with q, qd, qdd, tau");
    for (const auto& name : sample_fields()) {
      const auto it = s.find(name);
      if (it == s.end() || !it->is_array()) throw ValidationError(where + "." + name, "must be an array");
      if (n < 0) {
        n = static_cast<Eigen::Index>(it->size());
        if (n == 0) throw ValidationError(where + "." + name, "must not be empty");
        r.q.resize(n, t);
        r.qd.resize(n, t);
        r.qdd.resize(n, t);
        r.tau.resize(n, t);
      }
      if (static_cast<Eigen::Index>(it->size()) != n) {
        throw ValidationError(where + "." + name, "joint count differs from first sample");
      }
      auto& m = block(r, name);
      for (Eigen::Index jj = 0; jj < n; ++jj) {
        const auto& v = (*it)[static_cast<std::size_t>(jj)];
        if (!v.is_number()) throw ValidationError(where + "." + name, "must contain numbers");
        m(jj, k) = v.get<double>();
      }
    }
  }
  r.validate();
  return r;
}

std::string serialize_record(const TrajectoryRecord& r) { return to_json(r).dump(); }

TrajectoryRecord parse_record(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("record", std::string("malformed JSON: ") + e.what());
  }
  return record_from_json(j);
}

Json project(const TrajectoryRecord& r, const std::vector<std::string>& projection) {
  auto wanted = [&](const std::string& f) {
    return std::find(projection.begin(), projection.end(), f) != projection.end();
  };
  const Json full_meta = [&] {
    auto j = to_json(TrajectoryRecord{r.record_id, r.robot_type, r.instance_id, r.site, r.purpose,
                                      r.velocity_scaling, r.acceleration_scaling, r.software_commit,
                                      r.created_utc, r.dt, {}, {}, {}, {}});
    j.erase("samples");
    return j;
  }();
  Json out;
  out["record_id"] = r.record_id;
  for (const auto& [key, value] : full_meta.items()) {
    if (key != "record_id" && wanted(key)) out[key] = value;
  }
  std::vector<std::string> sample_part;
  for (const auto& f : sample_fields()) {
    if (wanted(f) || wanted("samples")) sample_part.push_back(f);
  }
  if (!sample_part.empty()) {
    Json samples = Json::array();
    for (Eigen::Index k = 0; k < r.q.cols(); ++k) {
      Json s;
      for (const auto& f : sample_part) s[f] = column_json(block(r, f), k);
      samples.push_back(std::move(s));
    }
    out["samples"] = std::move(samples);
  }
  return out;
}

}  // namespace d2k::store
