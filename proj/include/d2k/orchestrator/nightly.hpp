#pragma once

#include <optional>
#include <string>
#include <vector>

#include "d2k/orchestrator/endpoints.hpp"
#include "d2k/store/query.hpp"

namespace d2k::orchestrator {

struct StepOutcome {
  std::string name;
  std::string status;  ///< ok | aborted | skipped
  std::string detail;
};

struct TrainingRun {
  std::string agent_id;
  std::string config_id;
  learner::HyperParams params;
  double cross_validation_loss = 0.0;
  bool accepted = false;
  std::string checkpoint_id;
  double wall_seconds = 0.0;
  std::string error;  ///< set when training failed; nothing was reported
};

struct NightlyReport {
  std::string started_utc;
  std::vector<StepOutcome> steps;
  std::string train_view_id;
  std::string validation_view_id;
  std::string evaluation_view_id;
  std::optional<store::DatasetStats> stats;
  std::string round_id;
  std::vector<TrainingRun> runs;
  std::optional<sweep::BestModel> best;
  std::optional<learner::EvalReport> evaluation;

  bool ok() const;
};

struct NightlyOptions {
  std::optional<std::uint64_t> seed;         ///< overrides config.seed
  std::optional<int> configs_per_round;      ///< overrides training.configs_per_round
};

/// One pass of the nightly loop: (1) views + persisted stats, (2) a sweep
/// round of foundation trainings by local agents, (3) gate decisions and
/// post-accept evaluation. Never throws for service failures; the report
/// says which step stopped.
NightlyReport run_nightly(const PipelineConfig& config, Services& services, const NightlyOptions& options = {});

/// Report for a night whose services could not be reached at all.
NightlyReport unreachable_report(const std::string& why);

learner::Json to_json(const NightlyReport& r);

}  // namespace d2k::orchestrator
