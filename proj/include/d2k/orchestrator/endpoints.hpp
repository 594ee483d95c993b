#pragma once

#include <memory>

#include "d2k/orchestrator/config.hpp"
#include "d2k/store/shadow_store.hpp"
#include "d2k/sweep/coordinator.hpp"

namespace d2k::orchestrator {

/// Open connections to the store and the sweep coordinator. A dir:
/// endpoint is opened in-process; a unix: endpoint must already be served
/// (NotFoundError / Error("io") otherwise).
struct Services {
  std::unique_ptr<store::StoreApi> store;
  std::unique_ptr<sweep::SweepApi> sweep;
};

std::unique_ptr<store::StoreApi> open_store(const Endpoint& e);
std::unique_ptr<sweep::SweepApi> open_sweep(const Endpoint& e);

/// Opens both services, registers the configured robot type with the store
/// and, for an in-process coordinator, installs the post-accept evaluation.
Services connect(const PipelineConfig& config);

/// Evaluates an accepted checkpoint on the evaluation records of its target
/// (all instances for the foundation); nullopt when there are none.
sweep::Coordinator::PostAcceptHook make_evaluation_hook(store::StoreApi& store, const PipelineConfig& config);

}  // namespace d2k::orchestrator
