#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/orchestrator/benchmark.hpp"
#include "d2k/orchestrator/k2d.hpp"
#include "d2k/orchestrator/nightly.hpp"
#include "d2k/orchestrator/report.hpp"
#include "d2k/orchestrator/site.hpp"
#include "../support/store_fixtures.hpp"

using namespace d2k;
using namespace d2k::orchestrator;
namespace fs = std::filesystem;

namespace {

// Small enough that a nightly round of ten trainings takes a few seconds.
const char* kYaml = R"(
store: dir:store
sweep: dir:sweep
robot_model: builtin
report_dir: reports
seed: 42
sites:
  - name: site-a
    instance_id: arm-a
    counts: {train: 4, validation: 1, evaluation: 1}
    seed: 1
  - name: site-b
    instance_id: arm-b
    perturbation: {payload_mass: 0.5, friction_scale: 1.2}
    counts: {train: 4, validation: 1, evaluation: 1}
    seed: 2
  - name: site-c
    instance_id: arm-c
    perturbation: {payload_mass: 1.0, friction_scale: 0.8}
    counts: {train: 4, validation: 2, evaluation: 1}
    seed: 3
training:
  folds: 2
  max_windows: 8
  configs_per_round: 10
  search_space:
    n_recurrent_layers: [1]
    hidden_size: [16]
    learning_rate: [0.001, 0.01]
    sequence_length: [20, 20]
    batch_size: [8]
    epochs: [2, 2]
benchmark:
  foundation_instances: [arm-a, arm-b]
  target_instance: arm-c
  configs_per_round: 3
  epochs: 2
  foundation_epochs: 3
  instance_unfrozen_layers: 1
  foundation_params: {n_recurrent_layers: 2, hidden_size: 16, sequence_length: 20, batch_size: 8}
  search_space: {sequence_length: [20, 20], batch_size: [8]}
)";

PipelineConfig test_config(const fs::path& dir) { return parse_pipeline_config(kYaml, dir); }

/// Records whose joint positions are iid uniform over each joint's range,
/// except that joint `hole_joint` avoids [hole_lo, hole_hi).
std::vector<store::TrajectoryRecord> uniform_corpus(const dynamics::RobotModel& model, int n_records, int n_samples,
                                                    std::uint64_t seed, int hole_joint = -1, double hole_lo = 0,
                                                    double hole_hi = 0) {
  std::mt19937_64 rng(seed);
  std::vector<store::TrajectoryRecord> out;
  for (int r = 0; r < n_records; ++r) {
    auto rec = fixture::make_record(seed * 1000 + r, n_samples);
    for (Eigen::Index j = 0; j < rec.q.rows(); ++j) {
      for (Eigen::Index k = 0; k < rec.q.cols(); ++k) {
        double x;
        do {
          x = std::uniform_real_distribution<double>(model.q_min[j], model.q_max[j])(rng);
        } while (j == hole_joint && x >= hole_lo && x < hole_hi);
        rec.q(j, k) = x;
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::size_t min_count(const store::Histogram& h) { return *std::min_element(h.counts.begin(), h.counts.end()); }

struct Env {
  fs::path dir = fixture::temp_dir("orch");
  PipelineConfig config = test_config(dir);
  Services services = connect(config);
};

}  // namespace

// ---------------------------------------------------------------- config

TEST(PipelineConfig, ParsesSitesAndResolvesRelativePaths) {
  const auto c = test_config("/base");
  EXPECT_EQ(c.store.kind, Endpoint::Kind::dir);
  EXPECT_EQ(c.store.path, fs::path("/base/store"));
  EXPECT_EQ(c.report_dir, fs::path("/base/reports"));
  ASSERT_EQ(c.sites.size(), 3u);
  EXPECT_EQ(c.sites[1].perturbation.payload_mass, 0.5);
  EXPECT_EQ(c.site_for_instance("arm-c").name, "site-c");
  EXPECT_EQ(c.schedule, "0 2 * * *");
  EXPECT_EQ(c.robot_type, "lightweight7");
}

TEST(PipelineConfig, RejectsUnknownKeysAndMissingSites) {
  EXPECT_THROW(parse_pipeline_config(std::string(kYaml) + "colour: blue\n"), ValidationError);
  EXPECT_THROW(parse_pipeline_config("store: dir:s\nsweep: dir:w\n"), ValidationError);
  EXPECT_THROW(Endpoint::parse("http://x"), ValidationError);
  EXPECT_EQ(Endpoint::parse("unix:/tmp/s.sock").kind, Endpoint::Kind::unix_socket);
}

TEST(PipelineConfig, ShippedConfigLoads) {
  const auto c = load_pipeline_config(fs::path(D2K_SOURCE_DIR) / "config" / "pipeline.yaml");
  EXPECT_EQ(c.sites.size(), 3u);
  EXPECT_EQ(c.benchmark.foundation_instances.size(), 2u);
  for (const auto& s : c.sites) EXPECT_EQ(s.workspace.per_joint.size(), 7u);
}

TEST(PipelineConfig, ConfigPathFallsBackToEnvironment) {
  ::unsetenv("D2K_CONFIG");
  EXPECT_THROW(resolve_config_path(""), ValidationError);
  ::setenv("D2K_CONFIG", "/etc/d2k.yaml", 1);
  EXPECT_EQ(resolve_config_path(""), fs::path("/etc/d2k.yaml"));
  EXPECT_EQ(resolve_config_path("x.yaml"), fs::path("x.yaml"));
  ::unsetenv("D2K_CONFIG");
}

TEST(Schedule, NextFiringAtTwoAm) {
  const auto s = DailySchedule::parse("0 2 * * *");
  // 2026-01-01T00:00:00Z is 1767225600 s after the epoch.
  const auto midnight = std::chrono::system_clock::time_point{} + std::chrono::seconds(1767225600);
  EXPECT_DOUBLE_EQ(s.seconds_until_next(midnight), 7200.0);
  EXPECT_DOUBLE_EQ(s.seconds_until_next(midnight + std::chrono::hours(2)), 86400.0);
  EXPECT_DOUBLE_EQ(s.seconds_until_next(midnight + std::chrono::hours(3)), 23 * 3600.0);
  EXPECT_THROW(DailySchedule::parse("*/5 * * * *"), ValidationError);
  EXPECT_THROW(DailySchedule::parse("0 25 * * *"), ValidationError);
}

// ---------------------------------------------------------------- sites

TEST(Site, IngestsConfiguredMixWithMetadata) {
  Env env;
  auto site = env.config.sites[0];
  site.train = 5;
  site.validation = 0;
  site.evaluation = 1;
  const auto res = run_site(env.config, site, *env.services.store);
  EXPECT_TRUE(res.errors.empty());
  ASSERT_EQ(res.record_ids.size(), 6u);
  EXPECT_EQ(std::count(res.purposes.begin(), res.purposes.end(), store::Purpose::train), 5);
  EXPECT_EQ(std::count(res.purposes.begin(), res.purposes.end(), store::Purpose::evaluation), 1);
  for (const auto& rec : env.services.store->query({})) {
    EXPECT_EQ(rec->instance_id, "arm-a");
    EXPECT_EQ(rec->site, "site-a");
    EXPECT_FALSE(rec->software_commit.empty());
    if (rec->purpose == store::Purpose::evaluation) {
      EXPECT_EQ(rec->velocity_scaling, trajectory::kIsoScaling);
      EXPECT_EQ(rec->acceleration_scaling, trajectory::kIsoScaling);
    } else {
      EXPECT_EQ(rec->velocity_scaling, site.velocity_scaling);
      EXPECT_EQ(rec->acceleration_scaling, site.acceleration_scaling);
    }
  }
  store::DatasetQuery q;
  q.purpose = store::Purpose::evaluation;
  EXPECT_EQ(env.services.store->query(q).size(), 1u);
}

TEST(Site, RerunGivesSamePayloadsAndFreshIds) {
  Env env;
  const auto& site = env.config.sites[1];
  const auto a = run_site(env.config, site, *env.services.store);
  const auto b = run_site(env.config, site, *env.services.store);
  ASSERT_EQ(a.record_ids.size(), b.record_ids.size());
  std::map<std::string, store::RecordPtr> by_id;
  for (const auto& r : env.services.store->query({})) by_id[r->record_id] = r;
  for (std::size_t i = 0; i < a.record_ids.size(); ++i) {
    EXPECT_NE(a.record_ids[i], b.record_ids[i]);
    const auto& x = *by_id.at(a.record_ids[i]);
    const auto& y = *by_id.at(b.record_ids[i]);
    EXPECT_EQ(x.q, y.q);
    EXPECT_EQ(x.tau, y.tau);
  }
}

TEST(Site, WorkspaceBoundsHoldForTrainingMotions) {
  Env env;
  auto site = env.config.sites[0];
  site.validation = site.evaluation = 0;
  site.workspace.per_joint.assign(7, std::nullopt);
  site.workspace.per_joint[2] = std::make_pair(0.5, 0.9);
  run_site(env.config, site, *env.services.store);
  for (const auto& r : env.services.store->query({})) {
    EXPECT_GE(r->q.row(2).minCoeff(), 0.5);
    EXPECT_LE(r->q.row(2).maxCoeff(), 0.9);
  }
}

// ---------------------------------------------------------------- nightly

TEST(Nightly, SeededStoreRunsAllThreeSteps) {
  Env env;
  for (const auto& s : env.config.sites) run_site(env.config, s, *env.services.store);
  const auto report = run_nightly(env.config, env.services);
  ASSERT_TRUE(report.ok()) << to_json(report).dump(2);
  ASSERT_EQ(report.steps.size(), 3u);
  EXPECT_EQ(report.steps[0].name, "views_and_stats");
  EXPECT_EQ(report.steps[1].name, "sweep_round");
  EXPECT_EQ(report.steps[2].name, "gate_and_evaluate");
  ASSERT_TRUE(report.stats.has_value());
  EXPECT_EQ(report.stats->total.trajectories, 12u);
  EXPECT_TRUE(fs::exists(env.dir / "store" / "stats") && !fs::is_empty(env.dir / "store" / "stats"));
  ASSERT_EQ(report.runs.size(), 10u);
  int accepted = 0;
  for (const auto& r : report.runs) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    accepted += r.accepted ? 1 : 0;
  }
  EXPECT_GE(accepted, 1);
  EXPECT_EQ(env.services.sweep->history(sweep::Target::foundation()).size(), 10u);
  ASSERT_TRUE(report.evaluation.has_value());
  EXPECT_GE(report.evaluation->mae, 0.0);
  EXPECT_LE(report.evaluation->mae, report.evaluation->theoretical_max_mae);
  EXPECT_TRUE(fs::exists(env.dir / "sweep" / "evals" / (report.best->checkpoint_id + ".json")));
}

TEST(Nightly, EmptyStoreAbortsSweepStep) {
  Env env;
  const auto report = run_nightly(env.config, env.services);
  ASSERT_EQ(report.steps.size(), 3u);
  EXPECT_EQ(report.steps[0].status, "ok");
  EXPECT_EQ(report.steps[1].status, "aborted");
  EXPECT_EQ(report.steps[1].detail, "empty training view");
  EXPECT_EQ(report.steps[2].status, "skipped");
  EXPECT_FALSE(report.ok());
}

TEST(Nightly, SecondRunNeverDegradesBest) {
  Env env;
  for (const auto& s : env.config.sites) run_site(env.config, s, *env.services.store);
  NightlyOptions o;
  o.configs_per_round = 3;
  const auto first = run_nightly(env.config, env.services, o);
  const auto second = run_nightly(env.config, env.services, o);
  ASSERT_TRUE(first.ok() && second.ok());
  EXPECT_LE(second.best->loss, first.best->loss);
  EXPECT_NE(first.round_id, second.round_id);
}

TEST(Nightly, UnreachableServicesGivePartialReport) {
  const auto r = unreachable_report("store: connection refused");
  ASSERT_EQ(r.steps.size(), 3u);
  EXPECT_EQ(r.steps[0].status, "aborted");
  EXPECT_FALSE(r.ok());
  auto c = test_config(fixture::temp_dir("orch"));
  c.store = Endpoint::parse("unix:/nonexistent/store.sock");
  EXPECT_ANY_THROW(connect(c));
}

// ---------------------------------------------------------------- k2d

TEST(K2d, EmptyBinYieldsExactlyOneDirectiveAndApplyFillsIt) {
  Env env;
  const auto& m = env.config.robot;
  const double lo = m.q_min[2] + 0.4 * (m.q_max[2] - m.q_min[2]);
  const double hi = m.q_min[2] + 0.5 * (m.q_max[2] - m.q_min[2]);
  for (auto& r : uniform_corpus(m, 8, 500, 3, 2, lo, hi)) env.services.store->ingest(std::move(r));
  const auto query = coverage_query(env.config);
  auto opt = scan_options(env.config);
  opt.joints = {2};
  const auto ds = k2d_directives(*env.services.store, query, 7, opt);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].joint_index, 2u);
  EXPECT_EQ(ds[0].bin, 4u);
  EXPECT_NEAR(ds[0].lo, lo, 1e-12);
  EXPECT_NEAR(ds[0].hi, hi, 1e-12);
  EXPECT_EQ(ds[0].occupancy, 0u);
  EXPECT_EQ(ds[0].site, "site-a");

  const auto before = env.services.store->histogram(query, 2, opt.n_bins);
  const auto ids = apply_directive(env.config, ds[0], *env.services.store);
  EXPECT_EQ(ids.size(), static_cast<std::size_t>(opt.requested_count));
  const auto after = env.services.store->histogram(query, 2, opt.n_bins);
  EXPECT_GT(after.counts[4], before.counts[4]);
  EXPECT_GT(min_count(after), min_count(before));
  // Every new sample lands in the targeted bin.
  std::size_t added = 0;
  for (const auto& id : ids) {
    for (const auto& r : env.services.store->query(query)) {
      if (r->record_id == id) added += r->n_samples();
    }
  }
  EXPECT_EQ(after.counts[4] - before.counts[4], added);
  EXPECT_EQ(after.total() - before.total(), added);
}

TEST(K2d, UniformCorpusGivesNoDirectives) {
  // Each bin count is Binomial(M, 1/10) with mean mu = M/10. A directive
  // needs a count below mu/2; the multiplicative Chernoff bound puts that at
  // most exp(-mu/8) per bin.
  const int n_records = 10, n_samples = 500;
  const double mu = n_records * n_samples / 10.0;
  ASSERT_LT(7 * 10 * std::exp(-mu / 8.0), 1e-9);
  Env env;
  for (auto& r : uniform_corpus(env.config.robot, n_records, n_samples, 11)) env.services.store->ingest(std::move(r));
  EXPECT_TRUE(k2d_directives(*env.services.store, coverage_query(env.config), 7, scan_options(env.config)).empty());
}

TEST(K2d, DirectivesDealtRoundRobinOverSites) {
  Env env;
  const auto& m = env.config.robot;
  const double span = m.q_max[2] - m.q_min[2];
  for (auto& r : uniform_corpus(m, 8, 500, 5, 2, m.q_min[2], m.q_min[2] + 0.3 * span)) {
    env.services.store->ingest(std::move(r));
  }
  auto opt = scan_options(env.config);
  opt.joints = {2};
  const auto ds = k2d_directives(*env.services.store, coverage_query(env.config), 7, opt);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds[0].site, "site-a");
  EXPECT_EQ(ds[1].site, "site-b");
  EXPECT_EQ(ds[2].site, "site-c");
  const auto back = coverage_directive_from_json(to_json(ds[1]));
  EXPECT_EQ(back.bin, ds[1].bin);
  EXPECT_EQ(back.lo, ds[1].lo);
}

TEST(K2d, EmptyHistogramIsDegenerate) {
  Env env;
  try {
    k2d_directives(*env.services.store, coverage_query(env.config), 7, scan_options(env.config));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "degenerate_histogram");
  }
}

TEST(K2d, DirectiveOutsideLimitsRejected) {
  Env env;
  CoverageDirective d;
  d.joint_index = 2;
  d.lo = 10.0;
  d.hi = 11.0;
  d.requested_count = 1;
  EXPECT_THROW(apply_directive(env.config, d, *env.services.store), ValidationError);
  d.joint_index = 9;
  EXPECT_THROW(apply_directive(env.config, d, *env.services.store), ValidationError);
}

// ---------------------------------------------------------------- benchmark and report

namespace {

struct BenchFixture : ::testing::Test {
  static void SetUpTestSuite() {
    env = new Env;
    for (const auto& s : env->config.sites) run_site(env->config, s, *env->services.store);
    report = new BenchmarkReport(run_benchmark(env->config, env->services));
  }
  static void TearDownTestSuite() {
    delete report;
    delete env;
  }
  static Env* env;
  static BenchmarkReport* report;
};
Env* BenchFixture::env = nullptr;
BenchmarkReport* BenchFixture::report = nullptr;

}  // namespace

TEST_F(BenchFixture, FourSetupsWithExpectedRunCounts) {
  ASSERT_EQ(report->results.size(), 4u);
  EXPECT_TRUE(report->foundation_built);
  EXPECT_TRUE(report->instance_built);
  EXPECT_EQ(report->result(sweep::Setup::end_to_end).runs.size(), 3u);
  EXPECT_EQ(report->result(sweep::Setup::finetune_foundation).runs.size(), 3u);
  EXPECT_EQ(report->result(sweep::Setup::finetune_instance_known_hp).runs.size(), 1u);
  EXPECT_EQ(report->result(sweep::Setup::finetune_instance_unknown_hp).runs.size(), 3u);
  for (const auto& res : report->results) {
    EXPECT_GT(res.total_wall_seconds, 0.0);
    for (const auto& run : res.runs) {
      EXPECT_EQ(run.validation_mae.size(), 2u);
      EXPECT_GT(run.wall_seconds, 0.0);
    }
  }
}

TEST_F(BenchFixture, FreezingContract) {
  for (const auto& run : report->result(sweep::Setup::end_to_end).runs) {
    EXPECT_EQ(run.trainable_groups, 3u);
    EXPECT_EQ(run.unchanged_groups, 0u);
  }
  for (auto s : {sweep::Setup::finetune_foundation, sweep::Setup::finetune_instance_known_hp,
                 sweep::Setup::finetune_instance_unknown_hp}) {
    for (const auto& run : report->result(s).runs) {
      EXPECT_GE(run.unchanged_groups, 1u);
      EXPECT_EQ(run.unchanged_groups + run.trainable_groups, 3u);
    }
  }
  const auto known = report->result(sweep::Setup::finetune_instance_known_hp).runs.front().params;
  const auto instance = env->services.sweep->checkpoint(report->instance_model_id);
  EXPECT_EQ(known.learning_rate, instance.hp.learning_rate);
  EXPECT_EQ(known.unfrozen_layers, 1);
}

TEST_F(BenchFixture, RepositoryLossesNeverIncrease) {
  const auto h = env->services.sweep->history(sweep::Target::instance("arm-c"));
  double last = std::numeric_limits<double>::infinity();
  for (const auto& e : h) {
    if (!e.accepted) continue;
    EXPECT_LT(e.loss, last);
    last = e.loss;
  }
}

TEST_F(BenchFixture, ReportFilesAndDeterministicSvgs) {
  const auto dir = env->dir / "bench";
  write_benchmark_artifacts(*report, dir);
  const auto paths = render_report(dir);
  ASSERT_EQ(paths.size(), 2u);
  std::size_t total_runs = 0;
  for (const auto& r : report->results) total_runs += r.runs.size();
  std::ifstream in(dir / "runs.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, total_runs + 1);

  const auto box = read_file(dir / "runtime_boxplot.svg");
  const auto trend = read_file(dir / "mae_trend.svg");
  std::size_t boxes = 0;
  for (auto p = box.find("class=\"box\""); p != std::string::npos; p = box.find("class=\"box\"", p + 1)) ++boxes;
  EXPECT_EQ(boxes, 4u);
  EXPECT_NE(box.find("log scale"), std::string::npos);
  EXPECT_NE(trend.find("theoretical max MAE"), std::string::npos);
  EXPECT_NE(trend.find("detail"), std::string::npos);

  render_report(dir);
  EXPECT_EQ(read_file(dir / "runtime_boxplot.svg"), box);
  EXPECT_EQ(read_file(dir / "mae_trend.svg"), trend);
  const auto copy = env->dir / "bench-copy";
  fs::create_directories(copy);
  for (const char* f : {"runs.csv", "mae_trend.csv", "summary.csv"}) fs::copy_file(dir / f, copy / f);
  render_report(copy);
  EXPECT_EQ(read_file(copy / "runtime_boxplot.svg"), box);
  EXPECT_EQ(read_file(copy / "mae_trend.svg"), trend);
}

TEST(Benchmark, ConcurrentAgentsReproduceSerialRuns) {
  BenchmarkOptions opt;
  opt.setups = {sweep::Setup::end_to_end, sweep::Setup::finetune_foundation};
  auto run = [&](int agents) {
    Env env;
    for (const auto& s : env.config.sites) run_site(env.config, s, *env.services.store);
    opt.agents = agents;
    return run_benchmark(env.config, env.services, opt);
  };
  const auto serial = run(1);
  const auto parallel = run(3);
  EXPECT_EQ(parallel.agents, 3);
  ASSERT_EQ(parallel.results.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& a = serial.results[s].runs;
    const auto& b = parallel.results[s].runs;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(b[i].run_index, static_cast<int>(i));
      EXPECT_EQ(a[i].params.learning_rate, b[i].params.learning_rate);
      EXPECT_EQ(a[i].validation_mae, b[i].validation_mae);
      EXPECT_EQ(a[i].cross_validation_loss, b[i].cross_validation_loss);
    }
  }
  opt.agents = 0;
  Env env;
  EXPECT_THROW(run_benchmark(env.config, env.services, opt), ValidationError);
}

TEST(Report, EmptyArtifactsRejected) {
  const auto dir = fixture::temp_dir("report");
  EXPECT_THROW(render_report(dir), ValidationError);
  write_file_atomic(dir / "runs.csv",
                    "setup,run_index,config_id,wall_seconds,cross_validation_loss,final_validation_mae,"
                    "trainable_groups,unchanged_groups,accepted\n");
  EXPECT_THROW(read_tables(dir), ValidationError);
}

TEST(Report, BoxplotLogAxisPlacesDecadesEvenly) {
  ReportTables t;
  for (int s = 0; s < 4; ++s) {
    const std::string name = "s" + std::to_string(s);
    t.summary.push_back({name, 2, 0, 0, 1, 1, 10, 0.15, 0.05});
    t.runs.push_back({name, 0, name + "-0", std::pow(10.0, s - 1), 1, 1, 1, 0, true});
    t.runs.push_back({name, 1, name + "-1", std::pow(10.0, s - 1), 1, 1, 1, 0, false});
  }
  const auto svg = render_runtime_boxplot(t);
  // Decade gridlines from 1e-1 to 1e2 over a 300 px axis: 100 px apart.
  std::vector<double> ys;
  const std::regex tick("<text x=\"[0-9.]+\" y=\"([0-9.]+)\" text-anchor=\"end\">1e");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), tick); it != std::sregex_iterator(); ++it) {
    ys.push_back(std::stod((*it)[1]) - 4.0);
  }
  ASSERT_EQ(ys.size(), 4u);
  for (std::size_t i = 1; i < ys.size(); ++i) EXPECT_NEAR(ys[i - 1] - ys[i], 100.0, 0.01);
}

TEST(Report, QuantileMatchesHandComputedValues) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.75), 7.0);
  EXPECT_THROW(quantile({}, 0.5), ValidationError);
}
