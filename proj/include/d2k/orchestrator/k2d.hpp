#pragma once

#include <string>
#include <vector>

#include "d2k/orchestrator/config.hpp"
#include "d2k/store/shadow_store.hpp"

namespace d2k::orchestrator {

/// Request for more motion data in one under-covered joint interval.
struct CoverageDirective {
  std::size_t joint_index = 0;
  double lo = 0.0;  ///< [rad]
  double hi = 0.0;  ///< [rad]
  int requested_count = 0;
  std::string site;
  std::size_t bin = 0;
  std::size_t occupancy = 0;  ///< samples in the bin when scanned
};

struct K2dScanOptions {
  std::vector<std::size_t> joints;  ///< empty: every joint
  std::size_t n_bins = 10;
  double threshold = 0.5;
  int requested_count = 4;
  std::vector<std::string> sites;  ///< directives are dealt round-robin
};

/// One directive per (joint, bin) with occupancy < threshold * mean bin
/// occupancy of that joint. Throws Error("degenerate_histogram") when the
/// query matches no samples.
std::vector<CoverageDirective> k2d_directives(const store::StoreApi& store, const store::DatasetQuery& query,
                                              std::size_t n_joints, const K2dScanOptions& options);

/// Scan options from the config: every site, the configured bins and counts.
K2dScanOptions scan_options(const PipelineConfig& config);
/// Training trajectories the config's robot type, all sites.
store::DatasetQuery coverage_query(const PipelineConfig& config);

/// Generate the requested training motions at the directive's site with the
/// targeted joint's waypoints inside [lo, hi], and ingest them.
std::vector<std::string> apply_directive(const PipelineConfig& config, const CoverageDirective& d,
                                         store::StoreApi& store, std::uint64_t seed = 0);

learner::Json to_json(const CoverageDirective& d);
CoverageDirective coverage_directive_from_json(const learner::Json& j);

}  // namespace d2k::orchestrator
