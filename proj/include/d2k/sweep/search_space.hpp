#pragma once

#include <cstdint>
#include <vector>

#include "d2k/learner/model.hpp"

namespace d2k::sweep {

using learner::HyperParams;
using learner::Json;

struct IntRange {
  int lo = 0;
  int hi = 0;
};

/// Per-field ranges for random search. Discrete fields list their allowed
/// values; a single-element list or lo == hi pins the field.
struct SearchSpace {
  std::vector<int> n_recurrent_layers{1, 2, 3};
  std::vector<int> hidden_size{16, 32, 64};
  double learning_rate_min = 1e-4;  ///< sampled log-uniformly
  double learning_rate_max = 1e-2;
  IntRange sequence_length{25, 100};
  std::vector<int> batch_size{8, 16, 32};
  IntRange epochs{50, 50};
  IntRange unfrozen_layers{0, 0};

  void validate() const;
  bool contains(const HyperParams& hp) const;
  /// Draw #index of the sequence for `seed`; rng_seed of the result is
  /// derived from both, so replays are exact.
  HyperParams sample(std::uint64_t seed, std::uint64_t index) const;

  /// Space for fine-tuning `parent`: architecture pinned to the parent,
  /// unfrozen_layers in [1, min(max_unfrozen, groups - 1)] so at least one
  /// group always stays frozen.
  static SearchSpace finetune(const HyperParams& parent, int n_groups, int max_unfrozen = 5);
};

Json to_json(const SearchSpace& s);
SearchSpace search_space_from_json(const Json& j);

}  // namespace d2k::sweep
