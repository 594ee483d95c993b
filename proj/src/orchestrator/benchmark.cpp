#include "d2k/orchestrator/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/learner/trainer.hpp"

namespace d2k::orchestrator {
namespace {

using learner::Dataset;
using learner::HyperParams;
using learner::ModelCheckpoint;
using sweep::Setup;
using sweep::Target;

Dataset load(store::StoreApi& store, const PipelineConfig& config, std::set<std::string> instances,
             store::Purpose purpose) {
  store::DatasetQuery q;
  q.robot_type = config.robot_type;
  q.instance_ids = std::move(instances);
  q.purpose = purpose;
  return learner::to_dataset(store.query(q));
}

std::size_t unchanged_groups(const learner::Network& a, const learner::Network& b) {
  std::size_t n = a.readout == b.readout ? 1 : 0;
  for (std::size_t l = 0; l < a.layers.size() && l < b.layers.size(); ++l) n += a.layers[l] == b.layers[l] ? 1 : 0;
  return n;
}

double theoretical_max(const Dataset& data, const Eigen::VectorXd& tau_max) {
  const auto y = learner::stack_targets(data);
  const Eigen::VectorXd peak = y.cwiseAbs().rowwise().maxCoeff();
  return (tau_max + peak).mean();
}

/// Single-config round that puts `ckpt` into the repository for `target`.
void register_model(sweep::SweepApi& sweep, const Target& target, Setup setup, const ModelCheckpoint& ckpt,
                    double loss, std::uint64_t seed) {
  sweep::RoundSpec spec;
  spec.target = target;
  spec.setup = setup;
  spec.configs_per_round = 1;
  spec.seed = seed;
  spec.fixed_params = ckpt.hp;
  const auto round = sweep.open_round(spec);
  const auto cfg = sweep.request_config(round, "benchmark");
  if (!cfg) throw Error("internal", "registration round issued no config");
  sweep.report_result(round, cfg->config_id, ckpt, loss);
  sweep.close_round(round);
}

ModelCheckpoint best_or_none(sweep::SweepApi& sweep, const Target& target, bool& missing) {
  try {
    const auto b = sweep.best(target);
    missing = false;
    return sweep.checkpoint(b.checkpoint_id);
  } catch (const NotFoundError&) {
    missing = true;
    return {};
  }
}

}  // namespace

double BenchmarkResult::mean_wall_seconds() const {
  if (runs.empty()) throw ValidationError("runs", "empty");
  return total_wall_seconds / static_cast<double>(runs.size());
}

double BenchmarkResult::first_run_validation_mae() const {
  if (runs.empty()) throw ValidationError("runs", "empty");
  return runs.front().final_validation_mae();
}

double BenchmarkResult::best_validation_mae() const {
  if (runs.empty()) throw ValidationError("runs", "empty");
  double best = runs.front().final_validation_mae();
  for (const auto& r : runs) best = std::min(best, r.final_validation_mae());
  return best;
}

const BenchmarkResult& BenchmarkReport::result(Setup s) const {
  for (const auto& r : results) {
    if (r.setup == s) return r;
  }
  throw NotFoundError("no result for setup " + sweep::to_string(s));
}

BenchmarkReport run_benchmark(const PipelineConfig& config, Services& services, const BenchmarkOptions& options) {
  const auto& bc = config.benchmark;
  auto& store = *services.store;
  auto& sweep = *services.sweep;
  BenchmarkReport report;
  report.seed = options.seed.value_or(config.seed);
  if (options.agents < 1) throw ValidationError("agents", "must be at least 1");
  report.agents = options.agents;
  report.foundation_instances = bc.foundation_instances;
  report.target_instance = bc.target_instance;
  report.folds = config.training.folds;
  report.epochs = options.epochs.value_or(bc.epochs);
  report.sensor_floor = config.sensor_floor;
  report.noise_sigma = config.site_for_instance(bc.target_instance).noise_sigma;
  const int n_configs = options.configs_per_round.value_or(bc.configs_per_round);
  if (n_configs < 1) throw ValidationError("configs_per_round", "must be >= 1");
  if (bc.foundation_instances.size() < 2) throw ValidationError("foundation_instances", "need at least 2 instances");

  learner::TrainOptions build_opt;
  build_opt.max_windows = config.training.max_windows;
  build_opt.cross_validate = false;

  // Foundation model.
  ModelCheckpoint foundation = best_or_none(sweep, Target::foundation(), report.foundation_built);
  if (report.foundation_built) {
    const auto data = load(store, config, {bc.foundation_instances.begin(), bc.foundation_instances.end()},
                           store::Purpose::train);
    if (data.empty()) throw ValidationError("dataset", "no training data for the foundation instances");
    auto hp = bc.foundation_params;
    hp.epochs = bc.foundation_epochs;
    hp.unfrozen_layers = 0;
    hp.rng_seed = mix_seed(report.seed, 0xf0);
    auto res = learner::train(data, hp, build_opt);
    register_model(sweep, Target::foundation(), Setup::end_to_end, res.ckpt, res.cross_validation_loss,
                   mix_seed(report.seed, 0xf1));
    foundation = sweep.checkpoint(sweep.best(Target::foundation()).checkpoint_id);
    report.notes.push_back("foundation model trained for the benchmark (no repository model)");
  }
  report.foundation_id = foundation.id;

  const Target target = Target::instance(bc.target_instance);
  const auto train = load(store, config, {bc.target_instance}, store::Purpose::train);
  const auto validation = load(store, config, {bc.target_instance}, store::Purpose::validation);
  if (train.empty() || validation.empty()) {
    throw ValidationError("dataset", "target instance needs training and validation data");
  }
  report.theoretical_max_mae = theoretical_max(validation, config.robot.tau_max);

  // Instance model, fine-tuned from the foundation on first need.
  ModelCheckpoint instance = best_or_none(sweep, target, report.instance_built);
  if (report.instance_built) {
    auto hp = foundation.hp;
    hp.epochs = bc.foundation_epochs;
    hp.learning_rate = bc.foundation_params.learning_rate;
    hp.unfrozen_layers = std::min<int>(bc.instance_unfrozen_layers, static_cast<int>(foundation.net.n_groups()));
    hp.rng_seed = mix_seed(report.seed, 0x1f);
    auto res = learner::finetune(foundation, train, hp, build_opt);
    register_model(sweep, target, Setup::finetune_instance_known_hp, res.ckpt, res.cross_validation_loss,
                   mix_seed(report.seed, 0x1e));
    instance = sweep.checkpoint(sweep.best(target).checkpoint_id);
    report.notes.push_back("instance model fine-tuned from the foundation for the benchmark (no repository model)");
  }
  report.instance_model_id = instance.id;

  learner::TrainOptions opt;
  opt.folds = config.training.folds;
  opt.max_windows = config.training.max_windows;
  opt.validation = &validation;

  for (const auto setup : options.setups) {
    BenchmarkResult result;
    result.setup = setup;
    const ModelCheckpoint* parent = nullptr;
    sweep::RoundSpec spec;
    spec.target = target;
    spec.setup = setup;
    spec.seed = mix_seed(report.seed, 0x100 + static_cast<std::uint64_t>(setup));
    spec.configs_per_round = n_configs;
    spec.space = bc.search_space;
    spec.space.epochs = {report.epochs, report.epochs};
    switch (setup) {
      case Setup::end_to_end:
        // Same architecture as the fine-tuned models, so only the starting
        // point and the trainable groups differ.
        spec.space.n_recurrent_layers = {foundation.hp.n_recurrent_layers};
        spec.space.hidden_size = {foundation.hp.hidden_size};
        spec.space.unfrozen_layers = {0, 0};
        break;
      case Setup::finetune_foundation:
      case Setup::finetune_instance_unknown_hp: {
        parent = setup == Setup::finetune_foundation ? &foundation : &instance;
        const auto ft = sweep::SearchSpace::finetune(parent->hp, static_cast<int>(parent->net.n_groups()));
        spec.space.n_recurrent_layers = ft.n_recurrent_layers;
        spec.space.hidden_size = ft.hidden_size;
        spec.space.unfrozen_layers = ft.unfrozen_layers;
        break;
      }
      case Setup::finetune_instance_known_hp: {
        parent = &instance;
        auto hp = instance.hp;
        hp.epochs = report.epochs;
        spec.fixed_params = hp;
        spec.configs_per_round = 1;
        break;
      }
    }
    if (parent) result.parent_id = parent->id;
    result.round_id = sweep.open_round(spec);
    std::mutex mu;
    int index = 0;
    std::exception_ptr failure;
    auto agent = [&](int a) {
      const std::string agent_id = "benchmark-" + std::to_string(a);
      try {
        while (true) {
          BenchmarkRun run;
          std::optional<sweep::IssuedConfig> cfg;
          {
            std::lock_guard lock(mu);
            if (failure) return;
            cfg = sweep.request_config(result.round_id, agent_id);
            if (!cfg) return;
            run.run_index = index++;
          }
          run.config_id = cfg->config_id;
          run.params = cfg->params;
          const auto init =
              parent ? *parent : learner::init_model(cfg->params, static_cast<int>(train.front().n_joints()));
          const auto t0 = std::chrono::steady_clock::now();
          auto res =
              parent ? learner::finetune(init, train, cfg->params, opt) : learner::train(init, train, cfg->params, opt);
          run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          run.cross_validation_loss = res.cross_validation_loss;
          run.validation_mae = res.validation_mae;
          run.trainable_groups = res.trainable_groups;
          run.unchanged_groups = unchanged_groups(res.ckpt.net, init.net);
          run.checkpoint_id = res.ckpt.id;
          run.accepted = sweep.report_result(result.round_id, cfg->config_id, res.ckpt, res.cross_validation_loss);
          std::lock_guard lock(mu);
          result.total_wall_seconds += run.wall_seconds;
          result.runs.push_back(std::move(run));
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    };
    if (report.agents == 1) {
      agent(0);
    } else {
      std::vector<std::thread> threads;
      for (int a = 0; a < report.agents; ++a) threads.emplace_back(agent, a);
      for (auto& t : threads) t.join();
      std::sort(result.runs.begin(), result.runs.end(),
                [](const BenchmarkRun& x, const BenchmarkRun& y) { return x.run_index < y.run_index; });
    }
    if (failure) std::rethrow_exception(failure);
    sweep.close_round(result.round_id);
    if (result.runs.empty()) throw Error("internal", "round " + result.round_id + " issued no configs");
    report.results.push_back(std::move(result));
  }
  if (report.agents > 1) {
    report.notes.push_back(std::to_string(report.agents) + " concurrent agents: wall times overlap and are not comparable");
  }
  report.notes.push_back("end_to_end architecture pinned to the foundation model's");
  report.notes.push_back("cross-validation uses " + std::to_string(report.folds) + " folds");
  return report;
}

learner::Json to_json(const BenchmarkReport& r) {
  using learner::Json;
  Json j;
  j["seed"] = r.seed;
  j["foundation_instances"] = r.foundation_instances;
  j["target_instance"] = r.target_instance;
  j["foundation_id"] = r.foundation_id;
  j["instance_model_id"] = r.instance_model_id;
  j["foundation_built"] = r.foundation_built;
  j["instance_built"] = r.instance_built;
  j["agents"] = r.agents;
  j["folds"] = r.folds;
  j["epochs"] = r.epochs;
  j["theoretical_max_mae"] = r.theoretical_max_mae;
  j["sensor_floor"] = r.sensor_floor;
  j["noise_sigma"] = r.noise_sigma;
  Json results = Json::array();
  for (const auto& res : r.results) {
    Json rj;
    rj["setup"] = sweep::to_string(res.setup);
    rj["round_id"] = res.round_id;
    rj["parent_id"] = res.parent_id;
    rj["total_wall_seconds"] = res.total_wall_seconds;
    Json runs = Json::array();
    for (const auto& run : res.runs) {
      Json x;
      x["run_index"] = run.run_index;
      x["config_id"] = run.config_id;
      x["params"] = learner::to_json(run.params);
      x["wall_seconds"] = run.wall_seconds;
      x["cross_validation_loss"] = run.cross_validation_loss;
      x["validation_mae"] = run.validation_mae;
      x["accepted"] = run.accepted;
      x["checkpoint_id"] = run.checkpoint_id;
      x["trainable_groups"] = run.trainable_groups;
      x["unchanged_groups"] = run.unchanged_groups;
      runs.push_back(std::move(x));
    }
    rj["runs"] = std::move(runs);
    results.push_back(std::move(rj));
  }
  j["results"] = std::move(results);
  j["notes"] = r.notes;
  return j;
}

}  // namespace d2k::orchestrator
