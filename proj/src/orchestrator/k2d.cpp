#include "d2k/orchestrator/k2d.hpp"

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/orchestrator/site.hpp"

namespace d2k::orchestrator {

std::vector<CoverageDirective> k2d_directives(const store::StoreApi& store, const store::DatasetQuery& query,
                                              std::size_t n_joints, const K2dScanOptions& options) {
  if (!(options.threshold >= 0.0)) throw ValidationError("threshold", "must be >= 0");
  if (options.requested_count < 1) throw ValidationError("requested_count", "must be >= 1");
  std::vector<std::size_t> joints = options.joints;
  if (joints.empty()) {
    for (std::size_t j = 0; j < n_joints; ++j) joints.push_back(j);
  }
  std::vector<CoverageDirective> out;
  for (auto j : joints) {
    const auto h = store.histogram(query, j, options.n_bins);
    const auto total = h.total();
    if (total == 0) throw Error("degenerate_histogram", "no samples for joint " + std::to_string(j));
    const double cut = options.threshold * static_cast<double>(total) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      if (static_cast<double>(h.counts[b]) >= cut) continue;
      CoverageDirective d;
      d.joint_index = j;
      d.bin = b;
      d.lo = h.edges[b];
      d.hi = h.edges[b + 1];
      d.occupancy = h.counts[b];
      d.requested_count = options.requested_count;
      if (!options.sites.empty()) d.site = options.sites[out.size() % options.sites.size()];
      out.push_back(std::move(d));
    }
  }
  return out;
}

K2dScanOptions scan_options(const PipelineConfig& config) {
  K2dScanOptions o;
  o.joints = config.k2d.joints;
  o.n_bins = config.k2d.n_bins;
  o.threshold = config.k2d.threshold;
  o.requested_count = config.k2d.trajectories_per_directive;
  for (const auto& s : config.sites) o.sites.push_back(s.name);
  return o;
}

store::DatasetQuery coverage_query(const PipelineConfig& config) {
  store::DatasetQuery q;
  q.robot_type = config.robot_type;
  q.purpose = store::Purpose::train;
  return q;
}

std::vector<std::string> apply_directive(const PipelineConfig& config, const CoverageDirective& d,
                                         store::StoreApi& store, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(config.robot.n_joints());
  if (d.joint_index >= n) throw ValidationError("joint_index", "out of range");
  const auto k = static_cast<Eigen::Index>(d.joint_index);
  double lo = std::max(d.lo, config.robot.q_min[k]);
  double hi = std::min(d.hi, config.robot.q_max[k]);
  if (!(lo < hi)) throw ValidationError("interval", "must overlap the joint limits");
  // Keep samples off the bin edges so rounding cannot move them to a neighbour.
  const double inset = 1e-6 * (hi - lo);
  lo += inset;
  hi -= inset;
  const auto& site = d.site.empty() ? config.sites.front() : config.site(d.site);

  auto spec = site_spec(config, site, store::Purpose::train);
  spec.count = d.requested_count;
  spec.seed = mix_seed(mix_seed(config.seed, seed), 7000 + d.joint_index * 1000 + d.bin);
  if (spec.workspace.per_joint.empty()) spec.workspace.per_joint.resize(n);
  spec.workspace.per_joint[d.joint_index] = std::make_pair(lo, hi);
  const auto model = dynamics::apply_perturbation(config.robot, site.perturbation);
  std::vector<std::string> ids;
  for (auto& r : generate_records(model, spec)) ids.push_back(store.ingest(std::move(r)));
  return ids;
}

learner::Json to_json(const CoverageDirective& d) {
  learner::Json j;
  j["joint_index"] = d.joint_index;
  j["target_interval"] = learner::Json::array({d.lo, d.hi});
  j["requested_count"] = d.requested_count;
  j["site"] = d.site;
  j["bin"] = d.bin;
  j["occupancy"] = d.occupancy;
  return j;
}

CoverageDirective coverage_directive_from_json(const learner::Json& j) {
  try {
    CoverageDirective d;
    d.joint_index = j.at("joint_index").get<std::size_t>();
    const auto iv = j.at("target_interval").get<std::vector<double>>();
    if (iv.size() != 2) throw ValidationError("target_interval", "expected [lo, hi]");
    d.lo = iv[0];
    d.hi = iv[1];
    d.requested_count = j.at("requested_count").get<int>();
    d.site = j.value("site", std::string());
    d.bin = j.value("bin", std::size_t{0});
    d.occupancy = j.value("occupancy", std::size_t{0});
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("directive", e.what());
  }
}

}  // namespace d2k::orchestrator
