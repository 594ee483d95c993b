#include "d2k/learner/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"

namespace d2k::learner {

Sequence to_sequence(const store::TrajectoryRecord& r) {
  Sequence s;
  s.id = r.record_id;
  s.purpose = r.purpose;
  const auto n = r.q.rows();
  s.x.resize(3 * n, r.q.cols());
  s.x.topRows(n) = r.q;
  s.x.middleRows(n, n) = r.qd;
  s.x.bottomRows(n) = r.qdd;
  s.y = r.tau;
  return s;
}

Sequence to_sequence(const trajectory::LabeledSequence& samples, std::string id, store::Purpose purpose) {
  store::TrajectoryRecord r;
  r.set_samples(samples);
  r.record_id = std::move(id);
  r.purpose = purpose;
  return to_sequence(r);
}

Dataset to_dataset(const std::vector<store::RecordPtr>& records) {
  Dataset d;
  d.reserve(records.size());
  for (const auto& r : records) d.push_back(to_sequence(*r));
  return d;
}

std::string dataset_hash(const Dataset& d) {
  std::uint64_t h = fnv1a64("");
  for (const auto& s : d) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(s.x.data()), sizeof(double) * s.x.size()), h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(s.y.data()), sizeof(double) * s.y.size()), h);
  }
  return hex64(h);
}

Eigen::MatrixXd stack_features(const Dataset& d) {
  Eigen::Index cols = 0;
  for (const auto& s : d) cols += s.x.cols();
  Eigen::MatrixXd out(d.empty() ? 0 : d.front().x.rows(), cols);
  Eigen::Index at = 0;
  for (const auto& s : d) {
    out.middleCols(at, s.x.cols()) = s.x;
    at += s.x.cols();
  }
  return out;
}

Eigen::MatrixXd stack_targets(const Dataset& d) {
  Eigen::Index cols = 0;
  for (const auto& s : d) cols += s.y.cols();
  Eigen::MatrixXd out(d.empty() ? 0 : d.front().y.rows(), cols);
  Eigen::Index at = 0;
  for (const auto& s : d) {
    out.middleCols(at, s.y.cols()) = s.y;
    at += s.y.cols();
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("folds", "must be >= 2");
  if (n < static_cast<std::size_t>(folds)) {
    throw ValidationError("folds", "need at least as many trajectories (" + std::to_string(n) + ") as folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t k = 0; k < n; ++k) out[k % out.size()].push_back(order[k]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

}  // namespace d2k::learner
