#pragma once

#include <string>
#include <vector>

#include "d2k/orchestrator/config.hpp"
#include "d2k/store/shadow_store.hpp"

namespace d2k::orchestrator {

struct GenerateSpec {
  std::string robot_type;
  std::string instance_id;
  std::string site;
  store::Purpose purpose = store::Purpose::train;
  int count = 1;
  /// Train and validation motions; evaluation motions always use the ISO
  /// figure at trajectory::kIsoScaling.
  double velocity_scaling = 0.5;
  double acceleration_scaling = 0.5;
  int n_waypoints = 4;
  double sample_dt = 0.01;
  trajectory::WaypointBounds workspace;
  trajectory::IsoPathConfig iso;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
};

/// Generate and label `count` records with `model` (already perturbed for
/// the instance). Record ids and timestamps are left for the store.
std::vector<store::TrajectoryRecord> generate_records(const dynamics::RobotModel& model, const GenerateSpec& spec);

GenerateSpec site_spec(const PipelineConfig& config, const SiteConfig& site, store::Purpose purpose);

struct SiteRunResult {
  std::string site;
  std::vector<std::string> record_ids;
  std::vector<store::Purpose> purposes;  ///< parallel to record_ids
  std::vector<std::string> errors;
};

/// Generate the site's configured train/validation/evaluation mix with its
/// perturbed model and ingest it record by record.
SiteRunResult run_site(const PipelineConfig& config, const SiteConfig& site, store::StoreApi& store);

}  // namespace d2k::orchestrator
