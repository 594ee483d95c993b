#include "d2k/orchestrator/endpoints.hpp"

#include "d2k/learner/dataset.hpp"
#include "d2k/store/service.hpp"
#include "d2k/sweep/wire.hpp"

namespace d2k::orchestrator {

std::unique_ptr<store::StoreApi> open_store(const Endpoint& e) {
  if (e.kind == Endpoint::Kind::dir) return std::make_unique<store::ShadowStore>(e.path);
  return std::make_unique<store::RemoteStore>(e.path);
}

std::unique_ptr<sweep::SweepApi> open_sweep(const Endpoint& e) {
  if (e.kind == Endpoint::Kind::dir) return std::make_unique<sweep::Coordinator>(e.path);
  return std::make_unique<sweep::RemoteSweep>(e.path, "orchestrator");
}

sweep::Coordinator::PostAcceptHook make_evaluation_hook(store::StoreApi& store, const PipelineConfig& config) {
  return [&store, model = config.robot, type = config.robot_type, floor = config.sensor_floor](
             const sweep::Target& target, const learner::ModelCheckpoint& ckpt) -> std::optional<learner::EvalReport> {
    store::DatasetQuery q;
    q.robot_type = type;
    q.purpose = store::Purpose::evaluation;
    if (!target.is_foundation()) q.instance_ids = {target.instance_id};
    const auto data = learner::to_dataset(store.query(q));
    if (data.empty()) return std::nullopt;
    return learner::evaluate(ckpt, data, model, floor);
  };
}

Services connect(const PipelineConfig& config) {
  Services s;
  s.store = open_store(config.store);
  s.store->register_robot_type(config.robot_type, {config.robot.q_min, config.robot.q_max});
  s.sweep = open_sweep(config.sweep);
  if (auto* local = dynamic_cast<sweep::Coordinator*>(s.sweep.get())) {
    local->set_post_accept_hook(make_evaluation_hook(*s.store, config));
  }
  return s;
}

}  // namespace d2k::orchestrator
