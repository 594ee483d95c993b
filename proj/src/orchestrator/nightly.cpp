#include "d2k/orchestrator/nightly.hpp"

#include <chrono>
#include <mutex>
#include <thread>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/learner/trainer.hpp"

namespace d2k::orchestrator {
namespace {

store::ShadowView make_view(const PipelineConfig& config, store::Purpose purpose) {
  store::ShadowView v;
  v.query.robot_type = config.robot_type;
  v.query.purpose = purpose;
  v.projection = store::record_fields();
  v.description = "nightly " + to_string(purpose) + " trajectories";
  return v;
}

}  // namespace

bool NightlyReport::ok() const {
  if (steps.size() != 3) return false;
  for (const auto& s : steps) {
    if (s.status != "ok") return false;
  }
  return true;
}

NightlyReport run_nightly(const PipelineConfig& config, Services& services, const NightlyOptions& options) {
  NightlyReport report;
  report.started_utc = utc_now();
  const auto seed = options.seed.value_or(config.seed);
  auto abort_from = [&](std::size_t step, const std::string& why) {
    static const char* kNames[] = {"views_and_stats", "sweep_round", "gate_and_evaluate"};
    for (std::size_t s = report.steps.size(); s < 3; ++s) {
      report.steps.push_back({kNames[s], s == step ? "aborted" : "skipped", s == step ? why : ""});
    }
    return report;
  };

  // (1) views and statistics
  store::DatasetQuery train_query;
  try {
    auto& store = *services.store;
    report.train_view_id = store.create_view(make_view(config, store::Purpose::train));
    report.validation_view_id = store.create_view(make_view(config, store::Purpose::validation));
    report.evaluation_view_id = store.create_view(make_view(config, store::Purpose::evaluation));
    train_query = store.get_view(report.train_view_id).query;
    report.stats = store.stats(train_query, true);
    report.steps.push_back({"views_and_stats", "ok",
                            std::to_string(report.stats->total.trajectories) + " training trajectories, stats persisted"});
  } catch (const std::exception& e) {
    return abort_from(0, std::string("store: ") + e.what());
  }

  // (2) sweep round
  learner::Dataset data;
  try {
    data = learner::to_dataset(services.store->query(train_query));
  } catch (const std::exception& e) {
    return abort_from(1, std::string("store: ") + e.what());
  }
  if (data.empty()) return abort_from(1, "empty training view");

  sweep::RoundSpec spec;
  spec.target = sweep::Target::foundation();
  spec.setup = sweep::Setup::end_to_end;
  spec.space = config.training.search_space;
  spec.configs_per_round = options.configs_per_round.value_or(config.training.configs_per_round);
  try {
    // Successive nights draw fresh configurations, reproducibly.
    spec.seed = mix_seed(seed, services.sweep->history(spec.target).size());
  } catch (const std::exception& e) {
    return abort_from(1, std::string("sweep: ") + e.what());
  }
  spec.expiry_seconds = config.training.expiry_seconds;
  spec.reuse_history = config.training.reuse_history;
  try {
    report.round_id = services.sweep->open_round(spec);
  } catch (const std::exception& e) {
    return abort_from(1, std::string("sweep: ") + e.what());
  }

  std::mutex mu;
  auto agent = [&](int index) {
    const auto agent_id = "agent-" + std::to_string(index);
    while (true) {
      std::optional<sweep::IssuedConfig> cfg;
      try {
        cfg = services.sweep->request_config(report.round_id, agent_id);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        report.runs.push_back({agent_id, "", {}, 0.0, false, "", 0.0, std::string("sweep: ") + e.what()});
        return;
      }
      if (!cfg) return;
      TrainingRun run{agent_id, cfg->config_id, cfg->params, 0.0, false, "", 0.0, ""};
      try {
        learner::TrainOptions opt;
        opt.folds = config.training.folds;
        opt.max_windows = config.training.max_windows;
        opt.view_id = report.train_view_id;
        auto result = learner::train(data, cfg->params, opt);
        run.cross_validation_loss = result.cross_validation_loss;
        run.checkpoint_id = result.ckpt.id;
        run.wall_seconds = result.wall_seconds;
        run.accepted = services.sweep->report_result(report.round_id, cfg->config_id, result.ckpt,
                                                     result.cross_validation_loss);
      } catch (const std::exception& e) {
        run.error = e.what();
      }
      std::lock_guard lock(mu);
      report.runs.push_back(std::move(run));
    }
  };
  std::vector<std::thread> agents;
  for (int a = 1; a < config.training.agents; ++a) agents.emplace_back(agent, a);
  agent(0);
  for (auto& t : agents) t.join();
  std::sort(report.runs.begin(), report.runs.end(),
            [](const TrainingRun& a, const TrainingRun& b) { return a.config_id < b.config_id; });
  int trained = 0;
  for (const auto& r : report.runs) trained += r.error.empty() ? 1 : 0;
  try {
    services.sweep->close_round(report.round_id);
  } catch (const std::exception& e) {
    return abort_from(1, std::string("sweep: ") + e.what());
  }
  if (trained == 0) return abort_from(1, "no configuration trained successfully");
  report.steps.push_back({"sweep_round", "ok", std::to_string(trained) + " configs trained in " + report.round_id});

  // (3) gate outcome and evaluation of the standing best
  try {
    int accepted = 0;
    for (const auto& r : report.runs) accepted += r.accepted ? 1 : 0;
    report.best = services.sweep->best(sweep::Target::foundation());
    report.evaluation = services.sweep->evaluation(report.best->checkpoint_id);
    if (accepted > 0 && !report.evaluation) {
      // Remote coordinator without an evaluation hook: evaluate here.
      const auto ckpt = services.sweep->checkpoint(report.best->checkpoint_id);
      report.evaluation = make_evaluation_hook(*services.store, config)(sweep::Target::foundation(), ckpt);
      if (report.evaluation) {
        write_file_atomic(config.report_dir / "evals" / (ckpt.id + ".json"),
                          learner::to_json(*report.evaluation).dump(2) + "\n");
      }
    }
    report.steps.push_back({"gate_and_evaluate", "ok",
                            std::to_string(accepted) + " accepted, best loss " + std::to_string(report.best->loss) +
                                (report.evaluation ? ", evaluation stored" : ", no evaluation data")});
  } catch (const std::exception& e) {
    return abort_from(2, e.what());
  }
  return report;
}

NightlyReport unreachable_report(const std::string& why) {
  NightlyReport r;
  r.started_utc = utc_now();
  r.steps = {{"views_and_stats", "aborted", why}, {"sweep_round", "skipped", ""}, {"gate_and_evaluate", "skipped", ""}};
  return r;
}

learner::Json to_json(const NightlyReport& r) {
  learner::Json j;
  j["started_utc"] = r.started_utc;
  learner::Json steps = learner::Json::array();
  for (const auto& s : r.steps) steps.push_back({{"name", s.name}, {"status", s.status}, {"detail", s.detail}});
  j["steps"] = std::move(steps);
  j["views"] = {{"train", r.train_view_id}, {"validation", r.validation_view_id}, {"evaluation", r.evaluation_view_id}};
  j["stats"] = r.stats ? store::to_json(*r.stats) : learner::Json(nullptr);
  j["round_id"] = r.round_id;
  learner::Json runs = learner::Json::array();
  for (const auto& run : r.runs) {
    learner::Json rj;
    rj["agent_id"] = run.agent_id;
    rj["config_id"] = run.config_id;
    rj["params"] = learner::to_json(run.params);
    rj["cross_validation_loss"] = run.cross_validation_loss;
    rj["accepted"] = run.accepted;
    rj["checkpoint_id"] = run.checkpoint_id;
    rj["wall_seconds"] = run.wall_seconds;
    if (!run.error.empty()) rj["error"] = run.error;
    runs.push_back(std::move(rj));
  }
  j["runs"] = std::move(runs);
  j["best"] = r.best ? sweep::to_json(*r.best) : learner::Json(nullptr);
  j["evaluation"] = r.evaluation ? learner::to_json(*r.evaluation) : learner::Json(nullptr);
  j["ok"] = r.ok();
  return j;
}

}  // namespace d2k::orchestrator
