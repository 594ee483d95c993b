#include "d2k/sweep/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"

namespace d2k::sweep {
namespace {

template <class T>
bool in(const std::vector<T>& v, T x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

bool in(const IntRange& r, int x) { return x >= r.lo && x <= r.hi; }

void check_range(const IntRange& r, const char* field, int min) {
  if (r.lo > r.hi) throw ValidationError(field, "lo must not exceed hi");
  if (r.lo < min) throw ValidationError(field, "lo must be >= " + std::to_string(min));
}

Json range_json(const IntRange& r) { return Json::array({r.lo, r.hi}); }

IntRange range_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw nlohmann::json::type_error::create(302, "expected [lo, hi]", nullptr);
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

void SearchSpace::validate() const {
  if (n_recurrent_layers.empty() || hidden_size.empty() || batch_size.empty()) {
    throw ValidationError("search_space", "choice lists must not be empty");
  }
  HyperParams probe;
  for (int l : n_recurrent_layers) {
    probe.n_recurrent_layers = l;
    probe.validate();
  }
  probe = {};
  for (int h : hidden_size) {
    probe.hidden_size = h;
    probe.validate();
  }
  for (int b : batch_size) {
    if (b < 1) throw ValidationError("batch_size", "must be >= 1");
  }
  if (!(learning_rate_min > 0.0) || !(learning_rate_max >= learning_rate_min) || !std::isfinite(learning_rate_max)) {
    throw ValidationError("learning_rate", "need 0 < min <= max");
  }
  check_range(sequence_length, "sequence_length", 1);
  check_range(epochs, "epochs", 1);
  check_range(unfrozen_layers, "unfrozen_layers", 0);
  if (unfrozen_layers.hi > 5) throw ValidationError("unfrozen_layers", "must be <= 5");
}

bool SearchSpace::contains(const HyperParams& hp) const {
  return in(n_recurrent_layers, hp.n_recurrent_layers) && in(hidden_size, hp.hidden_size) &&
         hp.learning_rate >= learning_rate_min && hp.learning_rate <= learning_rate_max &&
         in(sequence_length, hp.sequence_length) && in(batch_size, hp.batch_size) && in(epochs, hp.epochs) &&
         in(unfrozen_layers, hp.unfrozen_layers);
}

HyperParams SearchSpace::sample(std::uint64_t seed, std::uint64_t index) const {
  std::mt19937_64 rng(mix_seed(seed, index));
  auto pick = [&](const std::vector<int>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto draw = [&](const IntRange& r) { return std::uniform_int_distribution<int>(r.lo, r.hi)(rng); };
  HyperParams hp;
  hp.n_recurrent_layers = pick(n_recurrent_layers);
  hp.hidden_size = pick(hidden_size);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  hp.learning_rate = std::exp(std::log(learning_rate_min) + u * (std::log(learning_rate_max) - std::log(learning_rate_min)));
  hp.learning_rate = std::clamp(hp.learning_rate, learning_rate_min, learning_rate_max);
  hp.sequence_length = draw(sequence_length);
  hp.batch_size = pick(batch_size);
  hp.epochs = draw(epochs);
  hp.unfrozen_layers = draw(unfrozen_layers);
  hp.rng_seed = mix_seed(seed ^ 0x5eedULL, index);
  return hp;
}

SearchSpace SearchSpace::finetune(const HyperParams& parent, int n_groups, int max_unfrozen) {
  if (n_groups < 2) throw ValidationError("unfrozen_layers", "parent has no group that can stay frozen");
  SearchSpace s;
  s.n_recurrent_layers = {parent.n_recurrent_layers};
  s.hidden_size = {parent.hidden_size};
  s.unfrozen_layers = {1, std::min(max_unfrozen, n_groups - 1)};
  return s;
}

Json to_json(const SearchSpace& s) {
  Json j;
  j["n_recurrent_layers"] = s.n_recurrent_layers;
  j["hidden_size"] = s.hidden_size;
  j["learning_rate"] = Json::array({s.learning_rate_min, s.learning_rate_max});
  j["sequence_length"] = range_json(s.sequence_length);
  j["batch_size"] = s.batch_size;
  j["epochs"] = range_json(s.epochs);
  j["unfrozen_layers"] = range_json(s.unfrozen_layers);
  return j;
}

SearchSpace search_space_from_json(const Json& j) {
  SearchSpace s;
  static const char* kFields[] = {"n_recurrent_layers", "hidden_size", "learning_rate", "sequence_length",
                                  "batch_size", "epochs", "unfrozen_layers"};
  if (!j.is_object()) throw ValidationError("search_space", "must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(kFields), std::end(kFields), k) == std::end(kFields)) {
      throw ValidationError(k, "unknown search space field");
    }
  }
  try {
    if (j.contains("n_recurrent_layers")) s.n_recurrent_layers = j["n_recurrent_layers"].get<std::vector<int>>();
    if (j.contains("hidden_size")) s.hidden_size = j["hidden_size"].get<std::vector<int>>();
    if (j.contains("learning_rate")) {
      const auto lr = j["learning_rate"].get<std::vector<double>>();
      if (lr.size() != 2) throw ValidationError("learning_rate", "expected [min, max]");
      s.learning_rate_min = lr[0];
      s.learning_rate_max = lr[1];
    }
    if (j.contains("sequence_length")) s.sequence_length = range_from(j["sequence_length"]);
    if (j.contains("batch_size")) s.batch_size = j["batch_size"].get<std::vector<int>>();
    if (j.contains("epochs")) s.epochs = range_from(j["epochs"]);
    if (j.contains("unfrozen_layers")) s.unfrozen_layers = range_from(j["unfrozen_layers"]);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("search_space", e.what());
  }
  s.validate();
  return s;
}

}  // namespace d2k::sweep
