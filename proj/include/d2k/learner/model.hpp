#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "d2k/learner/lstm.hpp"

namespace d2k::learner {

using Json = nlohmann::ordered_json;

struct HyperParams {
  int n_recurrent_layers = 2;    ///< [1, 3]
  int hidden_size = 32;          ///< 16, 32 or 64
  double learning_rate = 3e-3;
  int sequence_length = 50;      ///< training window [steps]
  int batch_size = 16;
  int epochs = 50;
  int unfrozen_layers = 0;       ///< [0, 5]; fine-tuning only
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

Json to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const Json& j);

/// Per-feature affine normalization, (x - mean) / std.
struct Normalization {
  Eigen::VectorXd mean, std;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
  /// Population moments over the columns of x; std below 1e-8 becomes 1.
  static Normalization fit(const Eigen::MatrixXd& x);
  bool operator==(const Normalization& o) const { return mean == o.mean && std == o.std; }
};

struct Provenance {
  std::string view_id;
  std::string data_hash;
  std::optional<std::string> parent_id;
  bool operator==(const Provenance&) const = default;
};

struct ModelCheckpoint {
  std::string id;  ///< derived from the content hash
  HyperParams hp;
  int n_joints = 0;
  Network net;
  Normalization input_norm;   ///< over [q; qd; qdd], 3 * n_joints features
  Normalization output_norm;  ///< over tau
  Provenance provenance;
  std::optional<double> validation_mae;  ///< [N m]

  /// Shapes agree with each other and with n_joints; normalization std > 0.
  void validate() const;
};

/// Fresh model for (hp, n_joints) with identity normalization.
ModelCheckpoint init_model(const HyperParams& hp, int n_joints);

/// Predicted torques [N m] for raw features (3n x T, columns are steps).
/// The recurrent state starts at zero on every call.
Eigen::MatrixXd forward(const ModelCheckpoint& ckpt, const Eigen::MatrixXd& features);

/// Assigns ckpt.id from the content hash of everything but the id.
void assign_id(ModelCheckpoint& ckpt);

inline constexpr int kCheckpointFormatVersion = 1;

/// Versioned JSON document with an embedded content hash.
Json to_json(const ModelCheckpoint& ckpt);
/// Rejects hash mismatches and shape-inconsistent documents.
ModelCheckpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace d2k::learner
