#include <cmath>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/learner/model.hpp"

namespace d2k::learner {
namespace {

Json matrix_json(const Eigen::MatrixXd& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

Eigen::MatrixXd matrix_from(const Json& j, const std::string& field) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw ValidationError(field, "data length does not match rows x cols");
  }
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

Json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json norm_json(const Normalization& n) {
  Json j;
  j["mean"] = vector_json(n.mean);
  j["std"] = vector_json(n.std);
  return j;
}

Normalization norm_from(const Json& j) { return {vector_from(j.at("mean")), vector_from(j.at("std"))}; }

Json body_json(const ModelCheckpoint& c) {
  Json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["hyperparams"] = to_json(c.hp);
  j["n_joints"] = c.n_joints;
  Json layers = Json::array();
  for (const auto& l : c.net.layers) {
    Json lj;
    lj["W"] = matrix_json(l.W);
    lj["U"] = matrix_json(l.U);
    lj["b"] = vector_json(l.b);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  j["readout"] = {{"W", matrix_json(c.net.readout.W)}, {"b", vector_json(c.net.readout.b)}};
  j["input_norm"] = norm_json(c.input_norm);
  j["output_norm"] = norm_json(c.output_norm);
  Json prov;
  prov["view_id"] = c.provenance.view_id;
  prov["data_hash"] = c.provenance.data_hash;
  prov["parent_id"] = c.provenance.parent_id ? Json(*c.provenance.parent_id) : Json(nullptr);
  j["provenance"] = std::move(prov);
  j["validation_mae"] = c.validation_mae ? Json(*c.validation_mae) : Json(nullptr);
  return j;
}

}  // namespace

void HyperParams::validate() const {
  if (n_recurrent_layers < 1 || n_recurrent_layers > 3) throw ValidationError("n_recurrent_layers", "must be in [1, 3]");
  if (hidden_size != 16 && hidden_size != 32 && hidden_size != 64) {
    throw ValidationError("hidden_size", "must be 16, 32 or 64");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate", "must be > 0");
  if (sequence_length < 1) throw ValidationError("sequence_length", "must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
  if (epochs < 1) throw ValidationError("epochs", "must be >= 1");
  if (unfrozen_layers < 0 || unfrozen_layers > 5) throw ValidationError("unfrozen_layers", "must be in [0, 5]");
}

Json to_json(const HyperParams& hp) {
  Json j;
  j["n_recurrent_layers"] = hp.n_recurrent_layers;
  j["hidden_size"] = hp.hidden_size;
  j["learning_rate"] = hp.learning_rate;
  j["sequence_length"] = hp.sequence_length;
  j["batch_size"] = hp.batch_size;
  j["epochs"] = hp.epochs;
  j["unfrozen_layers"] = hp.unfrozen_layers;
  j["rng_seed"] = hp.rng_seed;
  return j;
}

HyperParams hyperparams_from_json(const Json& j) {
  HyperParams hp;
  try {
    hp.n_recurrent_layers = j.at("n_recurrent_layers").get<int>();
    hp.hidden_size = j.at("hidden_size").get<int>();
    hp.learning_rate = j.at("learning_rate").get<double>();
    hp.sequence_length = j.at("sequence_length").get<int>();
    hp.batch_size = j.at("batch_size").get<int>();
    hp.epochs = j.at("epochs").get<int>();
    hp.unfrozen_layers = j.value("unfrozen_layers", 0);
    hp.rng_seed = j.value("rng_seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("hyperparams", e.what());
  }
  hp.validate();
  return hp;
}

Eigen::MatrixXd Normalization::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) throw DimensionError("feature count does not match normalization");
  return ((x.colwise() - mean).array().colwise() / std.array()).matrix();
}

Eigen::MatrixXd Normalization::invert(const Eigen::MatrixXd& z) const {
  if (z.rows() != mean.size()) throw DimensionError("feature count does not match normalization");
  return ((z.array().colwise() * std.array()).matrix().colwise() + mean);
}

Normalization Normalization::fit(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) throw ValidationError("dataset", "cannot fit normalization on no samples");
  Normalization n;
  n.mean = x.rowwise().mean();
  n.std = ((x.colwise() - n.mean).array().square().rowwise().mean()).sqrt().matrix();
  for (Eigen::Index i = 0; i < n.std.size(); ++i) {
    if (!(n.std[i] >= 1e-8)) n.std[i] = 1.0;
  }
  return n;
}

void ModelCheckpoint::validate() const {
  const auto n = static_cast<Eigen::Index>(n_joints);
  if (n < 1) throw ValidationError("n_joints", "must be >= 1");
  if (net.layers.empty()) throw ValidationError("layers", "at least one recurrent layer required");
  Eigen::Index in = 3 * n;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& L = net.layers[l];
    const auto H = L.U.cols();
    const auto where = "layers[" + std::to_string(l) + "]";
    if (H < 1 || L.U.rows() != 4 * H || L.W.rows() != 4 * H || L.W.cols() != in || L.b.size() != 4 * H) {
      throw ValidationError(where, "inconsistent gate matrix shapes");
    }
    in = H;
  }
  if (net.readout.W.rows() != n || net.readout.W.cols() != in || net.readout.b.size() != n) {
    throw ValidationError("readout", "inconsistent shape");
  }
  auto check_norm = [](const Normalization& m, Eigen::Index size, const char* field) {
    if (m.mean.size() != size || m.std.size() != size) throw ValidationError(field, "wrong feature count");
    if (!(m.std.array() > 0.0).all() || !m.std.allFinite() || !m.mean.allFinite()) {
      throw ValidationError(field, "std must be positive and finite");
    }
  };
  check_norm(input_norm, 3 * n, "input_norm");
  check_norm(output_norm, n, "output_norm");
}

ModelCheckpoint init_model(const HyperParams& hp, int n_joints) {
  hp.validate();
  if (n_joints < 1) throw ValidationError("n_joints", "must be >= 1");
  ModelCheckpoint c;
  c.hp = hp;
  c.n_joints = n_joints;
  c.net = Network::init(3 * n_joints, n_joints, hp.n_recurrent_layers, hp.hidden_size, hp.rng_seed);
  c.input_norm = {Eigen::VectorXd::Zero(3 * n_joints), Eigen::VectorXd::Ones(3 * n_joints)};
  c.output_norm = {Eigen::VectorXd::Zero(n_joints), Eigen::VectorXd::Ones(n_joints)};
  assign_id(c);
  return c;
}

Eigen::MatrixXd forward(const ModelCheckpoint& ckpt, const Eigen::MatrixXd& features) {
  if (features.rows() != 3 * ckpt.n_joints) {
    throw DimensionError("expected " + std::to_string(3 * ckpt.n_joints) + " features, got " +
                         std::to_string(features.rows()));
  }
  if (!features.allFinite()) throw NonFiniteError("non-finite input features");
  return ckpt.output_norm.invert(ckpt.net.forward(ckpt.input_norm.apply(features), 1));
}

void assign_id(ModelCheckpoint& ckpt) { ckpt.id = "ckpt-" + content_hash(body_json(ckpt).dump()); }

Json to_json(const ModelCheckpoint& ckpt) {
  Json j;
  j["id"] = ckpt.id;
  const Json body = body_json(ckpt);
  for (const auto& [k, v] : body.items()) j[k] = v;
  j["content_hash"] = content_hash(j.dump());
  return j;
}

ModelCheckpoint checkpoint_from_json(const Json& j) {
  ModelCheckpoint c;
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw ValidationError("format_version", "unsupported checkpoint version");
    }
    Json body = j;
    const auto stored_hash = body.at("content_hash").get<std::string>();
    body.erase("content_hash");
    if (content_hash(body.dump()) != stored_hash) throw ValidationError("content_hash", "does not match contents");

    c.id = j.at("id").get<std::string>();
    c.hp = hyperparams_from_json(j.at("hyperparams"));
    c.n_joints = j.at("n_joints").get<int>();
    for (const auto& lj : j.at("layers")) {
      c.net.layers.push_back({matrix_from(lj.at("W"), "W"), matrix_from(lj.at("U"), "U"), vector_from(lj.at("b"))});
    }
    c.net.readout = {matrix_from(j.at("readout").at("W"), "readout.W"), vector_from(j.at("readout").at("b"))};
    c.input_norm = norm_from(j.at("input_norm"));
    c.output_norm = norm_from(j.at("output_norm"));
    const auto& prov = j.at("provenance");
    c.provenance.view_id = prov.at("view_id").get<std::string>();
    c.provenance.data_hash = prov.at("data_hash").get<std::string>();
    if (!prov.at("parent_id").is_null()) c.provenance.parent_id = prov.at("parent_id").get<std::string>();
    if (!j.at("validation_mae").is_null()) c.validation_mae = j.at("validation_mae").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint", e.what());
  }
  c.validate();
  return c;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(ckpt).dump() + "\n");
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("checkpoint", std::string("malformed JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace d2k::learner
