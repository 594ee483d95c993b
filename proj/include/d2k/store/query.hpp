#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "d2k/store/record.hpp"

namespace d2k::store {

/// Closed interval [lo, hi].
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool operator==(const Range&) const = default;
};

/// Every filter is optional; an empty query matches all records. Time
/// bounds are inclusive ISO-8601 strings (fixed width, so they order
/// lexicographically).
struct DatasetQuery {
  std::optional<std::string> robot_type;
  std::set<std::string> instance_ids;
  std::set<std::string> sites;
  std::optional<Purpose> purpose;
  std::optional<Range> velocity_scaling;
  std::optional<Range> acceleration_scaling;
  std::optional<std::string> created_from;
  std::optional<std::string> created_to;
  std::optional<std::size_t> limit;

  /// Throws ValidationError for reversed or non-finite ranges.
  void validate() const;
  bool matches(const TrajectoryRecord& r) const;
  bool operator==(const DatasetQuery&) const = default;
};

Json to_json(const DatasetQuery& q);
DatasetQuery query_from_json(const Json& j);

struct Moments {
  Eigen::VectorXd min, max, mean, std;  ///< per joint; std is the population std
};

struct SiteCounts {
  std::size_t trajectories = 0;
  std::size_t measurements = 0;  ///< samples, i.e. measurements per axis
};

struct DatasetStats {
  std::map<std::string, SiteCounts> per_site;
  SiteCounts total;
  std::size_t n_joints = 0;
  Moments q, qd, qdd, tau;
};

Json to_json(const DatasetStats& s);
DatasetStats stats_from_json(const Json& j);

/// Streaming per-joint moments (Welford). Records with a different joint
/// count than the first one contribute to the counts only.
class StatsAccumulator {
 public:
  void add(const TrajectoryRecord& r);
  DatasetStats finish() const;

 private:
  struct Welford {
    Eigen::VectorXd min, max, mean, m2;
    void init(Eigen::Index n);
    void add_block(const Eigen::MatrixXd& m, std::size_t count_before);
  };
  DatasetStats counts_;
  std::size_t samples_ = 0;
  Welford q_, qd_, qdd_, tau_;
};

struct Histogram {
  std::vector<double> edges;          ///< n_bins + 1 edges spanning [q_min, q_max]
  std::vector<std::size_t> counts;    ///< n_bins
  std::size_t total() const;
};

Json to_json(const Histogram& h);

/// Counts values into n_bins equal bins over [lo, hi]. Values outside the
/// span land in the edge bins, so the counts always sum to the input size.
Histogram make_histogram(double lo, double hi, std::size_t n_bins);
void add_to_histogram(Histogram& h, double x);

struct ShadowView {
  std::string view_id;
  DatasetQuery query;
  std::vector<std::string> projection;
  std::string created_utc;
  std::string description;

  /// Projection must be non-empty and name known fields.
  void validate() const;
};

Json to_json(const ShadowView& v);
ShadowView view_from_json(const Json& j);

}  // namespace d2k::store
