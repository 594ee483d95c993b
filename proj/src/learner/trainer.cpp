#include "d2k/learner/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"

namespace d2k::learner {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

struct Window {
  MatrixXd x;  // inputs to the first trainable layer, normalized
  MatrixXd y;  // normalized targets
};

struct FitResult {
  std::vector<double> train_loss;
  std::vector<double> validation_mae;
};

// Time-major batch of equally long windows.
void assemble(const std::vector<Window>& windows, const std::vector<std::size_t>& idx, MatrixXd& x, MatrixXd& y) {
  const Index B = static_cast<Index>(idx.size());
  const Index T = windows[idx.front()].x.cols();
  x.resize(windows[idx.front()].x.rows(), T * B);
  y.resize(windows[idx.front()].y.rows(), T * B);
  for (Index t = 0; t < T; ++t) {
    for (Index k = 0; k < B; ++k) {
      x.col(t * B + k) = windows[idx[static_cast<std::size_t>(k)]].x.col(t);
      y.col(t * B + k) = windows[idx[static_cast<std::size_t>(k)]].y.col(t);
    }
  }
}

std::vector<Window> make_windows(const Dataset& data, const std::vector<std::size_t>& members,
                                 const ModelCheckpoint& model, int length, std::size_t max_windows,
                                 std::uint64_t seed, std::vector<std::string>& warnings) {
  struct Ref {
    std::size_t seq;
    Index start;
  };
  std::vector<Ref> refs;
  for (const auto s : members) {
    const auto& seq = data[s];
    if (seq.length() < length) {
      warnings.push_back("trajectory " + seq.id + " shorter than sequence_length; skipped");
      continue;
    }
    for (Index start = 0; start + length <= seq.length(); start += length) refs.push_back({s, start});
  }
  if (refs.empty()) throw ValidationError("sequence_length", "every training trajectory is shorter than the window");
  if (refs.size() > max_windows) {
    std::mt19937_64 rng(seed);
    std::shuffle(refs.begin(), refs.end(), rng);
    refs.resize(max_windows);
    std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
      return a.seq != b.seq ? a.seq < b.seq : a.start < b.start;
    });
  }
  std::vector<Window> out;
  out.reserve(refs.size());
  for (const auto& r : refs) {
    const auto& seq = data[r.seq];
    out.push_back({model.input_norm.apply(seq.x.middleCols(r.start, length)),
                   model.output_norm.apply(seq.y.middleCols(r.start, length))});
  }
  return out;
}

// Replace each window's inputs by the hidden states of the frozen layers
// below `first`; they never change during the fit, so this runs once.
void cache_frozen(const Network& net, std::size_t first, std::vector<Window>& windows) {
  if (first == 0) return;
  constexpr std::size_t chunk = 64;
  for (std::size_t at = 0; at < windows.size(); at += chunk) {
    std::vector<std::size_t> idx(std::min(chunk, windows.size() - at));
    std::iota(idx.begin(), idx.end(), at);
    MatrixXd x, y;
    assemble(windows, idx, x, y);
    const Index B = static_cast<Index>(idx.size());
    const MatrixXd h = net.hidden_after(x, B, first);
    const Index T = windows[at].x.cols();
    for (Index k = 0; k < B; ++k) {
      MatrixXd hk(h.rows(), T);
      for (Index t = 0; t < T; ++t) hk.col(t) = h.col(t * B + k);
      windows[idx[static_cast<std::size_t>(k)]].x = std::move(hk);
    }
  }
}

FitResult fit(ModelCheckpoint& model, std::vector<Window> windows, const HyperParams& hp, std::size_t first,
              const TrainOptions& opt, std::uint64_t seed, const Dataset* validation) {
  cache_frozen(model.net, first, windows);
  Adam adam(model.net, hp.learning_rate);
  Gradients grad = zeros_like(model.net);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  FitResult out;
  MatrixXd x, y;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(hp.batch_size)) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(at),
                                         order.begin() + static_cast<long>(std::min(order.size(), at + static_cast<std::size_t>(hp.batch_size))));
      assemble(windows, idx, x, y);
      loss_sum += loss_and_gradient(model.net, x, y, static_cast<Index>(idx.size()), first, grad);
      clip_gradients(grad, first, opt.clip_norm);
      adam.step(model.net, grad, first);
      ++batches;
    }
    out.train_loss.push_back(loss_sum / batches);
    if (validation) out.validation_mae.push_back(mean_absolute_error(model, *validation));
  }
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

Normalization fit_input_norm(const Dataset& data, const std::vector<std::size_t>& members) {
  Dataset part;
  for (const auto i : members) part.push_back(data[i]);
  return Normalization::fit(stack_features(part));
}

Normalization fit_output_norm(const Dataset& data, const std::vector<std::size_t>& members) {
  Dataset part;
  for (const auto i : members) part.push_back(data[i]);
  return Normalization::fit(stack_targets(part));
}

void check_dataset(const Dataset& data, int n_joints) {
  if (data.empty()) throw ValidationError("dataset", "must not be empty");
  for (const auto& s : data) {
    if (s.n_joints() != n_joints || s.x.rows() != 3 * n_joints || s.x.cols() != s.y.cols()) {
      throw DimensionError("trajectory " + s.id + " does not match the model's joint count");
    }
  }
}

// Shared k-fold driver. `prepare` turns a fresh copy of the starting model
// into the model for a fit over `members` (normalization, etc.).
template <class Prepare>
TrainResult run(const ModelCheckpoint& start, const Dataset& data, const HyperParams& hp, std::size_t first,
                const TrainOptions& opt, Prepare prepare) {
  const auto t0 = std::chrono::steady_clock::now();
  check_dataset(data, start.n_joints);
  TrainResult result;
  result.trainable_groups = start.net.n_groups() - first;
  if (opt.cross_validate) {
    result.folds = make_folds(data.size(), opt.folds, mix_seed(hp.rng_seed, 11));
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
      std::vector<std::size_t> members;
      Dataset held_out;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (std::binary_search(result.folds[f].begin(), result.folds[f].end(), i)) {
          held_out.push_back(data[i]);
        } else {
          members.push_back(i);
        }
      }
      ModelCheckpoint model = start;
      prepare(model, members);
      auto windows = make_windows(data, members, model, hp.sequence_length, opt.max_windows,
                                  mix_seed(hp.rng_seed, 100 + f), result.warnings);
      fit(model, std::move(windows), hp, first, opt, mix_seed(hp.rng_seed, 200 + f), nullptr);
      result.fold_losses.push_back(mean_absolute_error(model, held_out));
    }
    result.cross_validation_loss =
        std::accumulate(result.fold_losses.begin(), result.fold_losses.end(), 0.0) / static_cast<double>(result.fold_losses.size());
  }

  const auto members = all_indices(data.size());
  ModelCheckpoint model = start;
  prepare(model, members);
  auto windows = make_windows(data, members, model, hp.sequence_length, opt.max_windows, mix_seed(hp.rng_seed, 99),
                              result.warnings);
  auto trace = fit(model, std::move(windows), hp, first, opt, mix_seed(hp.rng_seed, 199), opt.validation);
  result.train_loss = std::move(trace.train_loss);
  result.validation_mae = std::move(trace.validation_mae);
  if (!opt.cross_validate) result.cross_validation_loss = mean_absolute_error(model, data);

  model.hp = hp;
  model.provenance.view_id = opt.view_id;
  model.provenance.data_hash = dataset_hash(data);
  model.validation_mae = result.cross_validation_loss;
  assign_id(model);
  result.ckpt = std::move(model);
  std::sort(result.warnings.begin(), result.warnings.end());
  result.warnings.erase(std::unique(result.warnings.begin(), result.warnings.end()), result.warnings.end());
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

TrainResult train(const ModelCheckpoint& init, const Dataset& data, const HyperParams& hp, const TrainOptions& opt) {
  hp.validate();
  init.validate();
  auto start = init;
  start.provenance.parent_id.reset();
  return run(start, data, hp, 0, opt, [&](ModelCheckpoint& m, const std::vector<std::size_t>& members) {
    m.input_norm = fit_input_norm(data, members);
    m.output_norm = fit_output_norm(data, members);
  });
}

TrainResult train(const Dataset& data, const HyperParams& hp, const TrainOptions& opt) {
  if (data.empty()) throw ValidationError("dataset", "must not be empty");
  return train(init_model(hp, static_cast<int>(data.front().n_joints())), data, hp, opt);
}

TrainResult finetune(const ModelCheckpoint& parent, const Dataset& data, const HyperParams& hp,
                     const TrainOptions& opt) {
  hp.validate();
  parent.validate();
  const auto groups = parent.net.n_groups();
  const int k = hp.unfrozen_layers;
  if (k == 0) throw ValidationError("unfrozen_layers", "must be >= 1 for fine-tuning");
  if (static_cast<std::size_t>(k) > groups) {
    throw ValidationError("unfrozen_layers", std::to_string(k) + " exceeds the parent's " + std::to_string(groups) +
                                                 " layer groups");
  }
  if (hp.n_recurrent_layers != static_cast<int>(parent.net.layers.size()) ||
      hp.hidden_size != static_cast<int>(parent.net.layers.front().hidden())) {
    throw ValidationError("hyperparams", "architecture differs from the parent checkpoint");
  }
  const std::size_t first = groups - static_cast<std::size_t>(k);
  auto start = parent;
  start.provenance.parent_id = parent.id;
  return run(start, data, hp, first, opt, [](ModelCheckpoint&, const std::vector<std::size_t>&) {});
}

double mean_absolute_error(const ModelCheckpoint& ckpt, const Dataset& data) {
  if (data.empty()) throw ValidationError("dataset", "must not be empty");
  double sum = 0.0;
  double count = 0.0;
  for (const auto& s : data) {
    sum += (forward(ckpt, s.x) - s.y).cwiseAbs().sum();
    count += static_cast<double>(s.y.size());
  }
  return sum / count;
}

}  // namespace d2k::learner
