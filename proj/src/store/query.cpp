#include "d2k/store/query.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"

namespace d2k::store {
namespace {

void check_range(const std::optional<Range>& r, const char* field) {
  if (!r) return;
  if (!std::isfinite(r->lo) || !std::isfinite(r->hi)) throw ValidationError(field, "range bounds must be finite");
  if (r->lo > r->hi) throw ValidationError(field, "range lower bound exceeds upper bound");
}

Json range_json(const Range& r) { return Json::array({r.lo, r.hi}); }

Range range_from_json(const Json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ValidationError(field, "must be [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::set<std::string> string_set(const Json& j, const char* field) {
  if (!j.is_array()) throw ValidationError(field, "must be an array of strings");
  std::set<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ValidationError(field, "must be an array of strings");
    out.insert(v.get<std::string>());
  }
  return out;
}

std::string string_field(const Json& j, const char* field) {
  if (!j.is_string()) throw ValidationError(field, "must be a string");
  return j.get<std::string>();
}

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json moments_json(const Moments& m) {
  Json j;
  j["min"] = vec_json(m.min);
  j["max"] = vec_json(m.max);
  j["mean"] = vec_json(m.mean);
  j["std"] = vec_json(m.std);
  return j;
}

Moments moments_from_json(const Json& j) {
  return {vec_from_json(j.at("min")), vec_from_json(j.at("max")), vec_from_json(j.at("mean")),
          vec_from_json(j.at("std"))};
}

Json counts_json(const SiteCounts& c) {
  Json j;
  j["trajectories"] = c.trajectories;
  j["measurements_per_axis"] = c.measurements;
  return j;
}

SiteCounts counts_from_json(const Json& j) {
  return {j.at("trajectories").get<std::size_t>(), j.at("measurements_per_axis").get<std::size_t>()};
}

}  // namespace

void DatasetQuery::validate() const {
  check_range(velocity_scaling, "velocity_scaling");
  check_range(acceleration_scaling, "acceleration_scaling");
  if (created_from && !is_iso8601_utc(*created_from)) throw ValidationError("created_from", "must be ISO-8601 UTC");
  if (created_to && !is_iso8601_utc(*created_to)) throw ValidationError("created_to", "must be ISO-8601 UTC");
  if (created_from && created_to && *created_from > *created_to) {
    throw ValidationError("created", "range lower bound exceeds upper bound");
  }
}

bool DatasetQuery::matches(const TrajectoryRecord& r) const {
  if (robot_type && r.robot_type != *robot_type) return false;
  if (!instance_ids.empty() && !instance_ids.count(r.instance_id)) return false;
  if (!sites.empty() && !sites.count(r.site)) return false;
  if (purpose && r.purpose != *purpose) return false;
  if (velocity_scaling && !velocity_scaling->contains(r.velocity_scaling)) return false;
  if (acceleration_scaling && !acceleration_scaling->contains(r.acceleration_scaling)) return false;
  if (created_from && r.created_utc < *created_from) return false;
  if (created_to && r.created_utc > *created_to) return false;
  return true;
}

Json to_json(const DatasetQuery& q) {
  Json j = Json::object();
  if (q.robot_type) j["robot_type"] = *q.robot_type;
  if (!q.instance_ids.empty()) j["instance_ids"] = q.instance_ids;
  if (!q.sites.empty()) j["sites"] = q.sites;
  if (q.purpose) j["purpose"] = to_string(*q.purpose);
  if (q.velocity_scaling) j["velocity_scaling"] = range_json(*q.velocity_scaling);
  if (q.acceleration_scaling) j["acceleration_scaling"] = range_json(*q.acceleration_scaling);
  if (q.created_from) j["created_from"] = *q.created_from;
  if (q.created_to) j["created_to"] = *q.created_to;
  if (q.limit) j["limit"] = *q.limit;
  return j;
}

DatasetQuery query_from_json(const Json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw ValidationError("query", "must be an object");
  DatasetQuery q;
  for (const auto& [key, v] : j.items()) {
    if (key == "robot_type") {
      q.robot_type = string_field(v, "robot_type");
    } else if (key == "instance_ids") {
      q.instance_ids = string_set(v, "instance_ids");
    } else if (key == "sites") {
      q.sites = string_set(v, "sites");
    } else if (key == "purpose") {
      q.purpose = parse_purpose(string_field(v, "purpose"));
    } else if (key == "velocity_scaling") {
      q.velocity_scaling = range_from_json(v, "velocity_scaling");
    } else if (key == "acceleration_scaling") {
      q.acceleration_scaling = range_from_json(v, "acceleration_scaling");
    } else if (key == "created_from") {
      q.created_from = string_field(v, "created_from");
    } else if (key == "created_to") {
      q.created_to = string_field(v, "created_to");
    } else if (key == "limit") {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError("limit", "must be a non-negative integer");
      q.limit = v.get<std::size_t>();
    } else {
      throw ValidationError(key, "unknown query field");
    }
  }
  q.validate();
  return q;
}

void StatsAccumulator::Welford::init(Eigen::Index n) {
  min = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  max = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  mean = Eigen::VectorXd::Zero(n);
  m2 = Eigen::VectorXd::Zero(n);
}

void StatsAccumulator::Welford::add_block(const Eigen::MatrixXd& m, std::size_t c) {
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    ++c;
    const auto x = m.col(k);
    min = min.cwiseMin(x);
    max = max.cwiseMax(x);
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(c);
    m2.array() += delta.array() * (x - mean).array();
  }
}

void StatsAccumulator::add(const TrajectoryRecord& r) {
  auto& site = counts_.per_site[r.site];
  ++site.trajectories;
  site.measurements += r.n_samples();
  ++counts_.total.trajectories;
  counts_.total.measurements += r.n_samples();
  if (counts_.n_joints == 0) {
    counts_.n_joints = r.n_joints();
    const auto n = static_cast<Eigen::Index>(r.n_joints());
    q_.init(n);
    qd_.init(n);
    qdd_.init(n);
    tau_.init(n);
  }
  if (r.n_joints() != counts_.n_joints) return;
  q_.add_block(r.q, samples_);
  qd_.add_block(r.qd, samples_);
  qdd_.add_block(r.qdd, samples_);
  tau_.add_block(r.tau, samples_);
  samples_ += r.n_samples();
}

DatasetStats StatsAccumulator::finish() const {
  DatasetStats out = counts_;
  auto moments = [&](const Welford& w) {
    Moments m;
    if (samples_ == 0) return m;
    m.min = w.min;
    m.max = w.max;
    m.mean = w.mean;
    m.std = (w.m2 / static_cast<double>(samples_)).cwiseMax(0.0).cwiseSqrt();
    return m;
  };
  out.q = moments(q_);
  out.qd = moments(qd_);
  out.qdd = moments(qdd_);
  out.tau = moments(tau_);
  return out;
}

Json to_json(const DatasetStats& s) {
  Json j;
  Json sites = Json::object();
  for (const auto& [name, c] : s.per_site) sites[name] = counts_json(c);
  j["per_site"] = std::move(sites);
  j["total"] = counts_json(s.total);
  j["n_joints"] = s.n_joints;
  j["q"] = moments_json(s.q);
  j["qd"] = moments_json(s.qd);
  j["qdd"] = moments_json(s.qdd);
  j["tau"] = moments_json(s.tau);
  return j;
}

DatasetStats stats_from_json(const Json& j) {
  DatasetStats s;
  for (const auto& [name, c] : j.at("per_site").items()) s.per_site[name] = counts_from_json(c);
  s.total = counts_from_json(j.at("total"));
  s.n_joints = j.at("n_joints").get<std::size_t>();
  s.q = moments_from_json(j.at("q"));
  s.qd = moments_from_json(j.at("qd"));
  s.qdd = moments_from_json(j.at("qdd"));
  s.tau = moments_from_json(j.at("tau"));
  return s;
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Json to_json(const Histogram& h) {
  Json j;
  j["edges"] = h.edges;
  j["counts"] = h.counts;
  return j;
}

Histogram make_histogram(double lo, double hi, std::size_t n_bins) {
  if (n_bins < 1) throw ValidationError("n_bins", "must be >= 1");
  if (!(lo < hi)) throw ValidationError("range", "histogram span must satisfy lo < hi");
  Histogram h;
  h.counts.assign(n_bins, 0);
  h.edges.resize(n_bins + 1);
  for (std::size_t b = 0; b <= n_bins; ++b) {
    h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(n_bins);
  }
  h.edges.back() = hi;
  return h;
}

void add_to_histogram(Histogram& h, double x) {
  const double lo = h.edges.front();
  const double hi = h.edges.back();
  const auto n = h.counts.size();
  const double pos = (x - lo) / (hi - lo) * static_cast<double>(n);
  std::size_t b = 0;
  if (pos >= static_cast<double>(n)) {
    b = n - 1;
  } else if (pos > 0.0) {
    b = static_cast<std::size_t>(pos);
  }
  ++h.counts[b];
}

void ShadowView::validate() const {
  if (projection.empty()) throw ValidationError("projection", "must not be empty");
  for (const auto& f : projection) {
    const bool known = std::find(record_fields().begin(), record_fields().end(), f) != record_fields().end() ||
                       std::find(sample_fields().begin(), sample_fields().end(), f) != sample_fields().end();
    if (!known) throw ValidationError("projection", "unknown field '" + f + "'");
  }
  query.validate();
}

Json to_json(const ShadowView& v) {
  Json j;
  j["view_id"] = v.view_id;
  j["query"] = to_json(v.query);
  j["projection"] = v.projection;
  j["created_utc"] = v.created_utc;
  j["description"] = v.description;
  return j;
}

ShadowView view_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("view", "must be an object");
  ShadowView v;
  if (j.contains("view_id")) v.view_id = string_field(j.at("view_id"), "view_id");
  if (j.contains("query")) v.query = query_from_json(j.at("query"));
  if (!j.contains("projection") || !j.at("projection").is_array()) {
    throw ValidationError("projection", "must be an array of field names");
  }
  for (const auto& f : j.at("projection")) v.projection.push_back(string_field(f, "projection"));
  if (j.contains("created_utc")) v.created_utc = string_field(j.at("created_utc"), "created_utc");
  if (j.contains("description")) v.description = string_field(j.at("description"), "description");
  v.validate();
  return v;
}

}  // namespace d2k::store
