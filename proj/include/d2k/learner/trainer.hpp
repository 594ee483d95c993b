#pragma once

#include <optional>
#include <string>
#include <vector>

#include "d2k/learner/dataset.hpp"
#include "d2k/learner/model.hpp"

namespace d2k::learner {

struct TrainOptions {
  int folds = 3;
  /// Windows drawn once per fit from the training trajectories (a random
  /// subset when more are available); each epoch visits all of them.
  std::size_t max_windows = 64;
  double clip_norm = 1.0;
  /// When set, the final fit records the MAE on this data after every epoch.
  const Dataset* validation = nullptr;
  /// Skip the k-fold pass (cross_validation_loss is then the training MAE of
  /// the final model); used by callers that only need a fitted model.
  bool cross_validate = true;
  std::string view_id;
};

struct TrainResult {
  ModelCheckpoint ckpt;
  double cross_validation_loss = 0.0;          ///< mean held-out MAE [N m]
  std::vector<double> fold_losses;             ///< [N m]
  std::vector<std::vector<std::size_t>> folds; ///< held-out trajectory indices
  std::vector<double> train_loss;              ///< per epoch of the final fit, normalized MAE
  std::vector<double> validation_mae;          ///< per epoch of the final fit [N m]
  std::vector<std::string> warnings;
  std::size_t trainable_groups = 0;
  double wall_seconds = 0.0;
};

/// From-scratch training: every layer group is trainable, normalization is
/// fitted on the training part of each fold. `init` supplies the starting
/// weights (see init_model); hp.unfrozen_layers is ignored.
TrainResult train(const ModelCheckpoint& init, const Dataset& data, const HyperParams& hp,
                  const TrainOptions& opt = {});
TrainResult train(const Dataset& data, const HyperParams& hp, const TrainOptions& opt = {});

/**
 * Adapt the last hp.unfrozen_layers groups of `parent` (readout first, then
 * recurrent layers from the top down); everything else, including the
 * normalization, stays bit-identical. Architecture fields of hp must match
 * the parent. Throws ValidationError for k = 0 or k > parent groups.
 */
TrainResult finetune(const ModelCheckpoint& parent, const Dataset& data, const HyperParams& hp,
                     const TrainOptions& opt = {});

/// Mean absolute error [N m] of full-sequence predictions over all steps and joints.
double mean_absolute_error(const ModelCheckpoint& ckpt, const Dataset& data);

}  // namespace d2k::learner
