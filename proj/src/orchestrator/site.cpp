#include "d2k/orchestrator/site.hpp"

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/trajectory/iso_path.hpp"

namespace d2k::orchestrator {

std::vector<store::TrajectoryRecord> generate_records(const dynamics::RobotModel& model, const GenerateSpec& spec) {
  if (spec.count < 0) throw ValidationError("count", "must be >= 0");
  std::vector<store::TrajectoryRecord> out;
  const bool eval = spec.purpose == store::Purpose::evaluation;
  trajectory::ProfileParams p;
  p.velocity_scaling = eval ? trajectory::kIsoScaling : spec.velocity_scaling;
  p.acceleration_scaling = eval ? trajectory::kIsoScaling : spec.acceleration_scaling;
  p.n_waypoints = spec.n_waypoints;
  p.sample_dt = spec.sample_dt;
  p.validate();
  std::optional<trajectory::JointTrajectory> iso;
  if (eval && spec.count > 0) iso = trajectory::iso_path(model, p, spec.iso);
  for (int k = 0; k < spec.count; ++k) {
    const auto seed = mix_seed(spec.seed, static_cast<std::uint64_t>(k));
    p.rng_seed = seed;
    const auto traj = eval ? *iso : trajectory::sample_random_motion(model, p, spec.workspace);
    const auto samples = trajectory::label_with_dynamics(model, traj, {spec.noise_sigma, mix_seed(seed, 1)});
    store::TrajectoryRecord r;
    r.robot_type = spec.robot_type;
    r.instance_id = spec.instance_id;
    r.site = spec.site;
    r.purpose = spec.purpose;
    r.velocity_scaling = p.velocity_scaling;
    r.acceleration_scaling = p.acceleration_scaling;
    r.software_commit = software_commit();
    r.dt = traj.dt;
    r.set_samples(samples);
    out.push_back(std::move(r));
  }
  return out;
}

GenerateSpec site_spec(const PipelineConfig& config, const SiteConfig& site, store::Purpose purpose) {
  GenerateSpec g;
  g.robot_type = config.robot_type;
  g.instance_id = site.instance_id;
  g.site = site.name;
  g.purpose = purpose;
  g.count = purpose == store::Purpose::train ? site.train
            : purpose == store::Purpose::validation ? site.validation
                                                    : site.evaluation;
  g.velocity_scaling = site.velocity_scaling;
  g.acceleration_scaling = site.acceleration_scaling;
  g.n_waypoints = site.n_waypoints;
  g.sample_dt = site.sample_dt;
  g.workspace = site.workspace;
  g.iso = config.iso;
  g.noise_sigma = site.noise_sigma;
  g.seed = mix_seed(mix_seed(config.seed, site.seed), 1000 + static_cast<std::uint64_t>(purpose));
  return g;
}

SiteRunResult run_site(const PipelineConfig& config, const SiteConfig& site, store::StoreApi& store) {
  SiteRunResult result;
  result.site = site.name;
  const auto model = dynamics::apply_perturbation(config.robot, site.perturbation);
  for (auto purpose : {store::Purpose::train, store::Purpose::validation, store::Purpose::evaluation}) {
    const auto spec = site_spec(config, site, purpose);
    std::vector<store::TrajectoryRecord> records;
    try {
      records = generate_records(model, spec);
    } catch (const std::exception& e) {
      result.errors.push_back(to_string(purpose) + " generation: " + e.what());
      continue;
    }
    for (std::size_t k = 0; k < records.size(); ++k) {
      try {
        result.record_ids.push_back(store.ingest(std::move(records[k])));
        result.purposes.push_back(purpose);
      } catch (const std::exception& e) {
        result.errors.push_back(to_string(purpose) + " record " + std::to_string(k) + ": " + e.what());
      }
    }
  }
  return result;
}

}  // namespace d2k::orchestrator
