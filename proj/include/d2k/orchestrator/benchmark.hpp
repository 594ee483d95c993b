#pragma once

#include <optional>
#include <string>
#include <vector>

#include "d2k/orchestrator/config.hpp"
#include "d2k/orchestrator/endpoints.hpp"

namespace d2k::orchestrator {

struct BenchmarkRun {
  int run_index = 0;  ///< issue order within the setup
  std::string config_id;
  learner::HyperParams params;
  double wall_seconds = 0.0;  ///< training call only
  double cross_validation_loss = 0.0;
  std::vector<double> validation_mae;  ///< per epoch of the final fit [N m]
  bool accepted = false;
  std::string checkpoint_id;
  std::size_t trainable_groups = 0;
  /// Layer groups bit-identical to the starting model.
  std::size_t unchanged_groups = 0;

  double final_validation_mae() const { return validation_mae.back(); }
};

struct BenchmarkResult {
  sweep::Setup setup = sweep::Setup::end_to_end;
  std::string round_id;
  std::string parent_id;  ///< empty for end_to_end
  std::vector<BenchmarkRun> runs;
  double total_wall_seconds = 0.0;

  double mean_wall_seconds() const;
  double first_run_validation_mae() const;
  double best_validation_mae() const;
};

struct BenchmarkReport {
  std::uint64_t seed = 0;
  std::vector<std::string> foundation_instances;
  std::string target_instance;
  std::string foundation_id;
  std::string instance_model_id;
  bool foundation_built = false;  ///< absent from the repository, trained here
  bool instance_built = false;
  int agents = 1;
  int folds = 0;
  int epochs = 0;
  double theoretical_max_mae = 0.0;  ///< over the target validation data [N m]
  double sensor_floor = 0.0;
  double noise_sigma = 0.0;
  std::vector<BenchmarkResult> results;
  std::vector<std::string> notes;

  const BenchmarkResult& result(sweep::Setup s) const;
};

struct BenchmarkOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> configs_per_round;
  std::optional<int> epochs;
  /// Runs of a setup trained by this many threads at once. Above 1 the wall
  /// times overlap and are not comparable across setups.
  int agents = 1;
  std::vector<sweep::Setup> setups{sweep::Setup::end_to_end, sweep::Setup::finetune_foundation,
                                   sweep::Setup::finetune_instance_known_hp,
                                   sweep::Setup::finetune_instance_unknown_hp};
};

/**
 * Runs the training setups one after another on the target instance's
 * training data, tracing validation MAE on its validation data. Foundation
 * and instance models missing from the repository are trained first and
 * registered through single-config rounds. Runs are serial; wall time
 * covers the train/fine-tune call only.
 */
BenchmarkReport run_benchmark(const PipelineConfig& config, Services& services, const BenchmarkOptions& options = {});

learner::Json to_json(const BenchmarkReport& r);

}  // namespace d2k::orchestrator
