// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "../support/lstm_oracle.hpp"
#include "../support/oracles.hpp"
#include "../support/store_fixtures.hpp"
#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/dynamics/model_io.hpp"
#include "d2k/learner/evaluate.hpp"
#include "d2k/learner/trainer.hpp"
#include "d2k/orchestrator/benchmark.hpp"
#include "d2k/orchestrator/k2d.hpp"
#include "d2k/orchestrator/report.hpp"
#include "d2k/orchestrator/site.hpp"
#include "d2k/store/shadow_store.hpp"
#include "d2k/sweep/wire.hpp"
#include "d2k/trajectory/trajectory.hpp"

using namespace d2k;
using namespace d2k::orchestrator;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

PipelineConfig shipped_config() { return load_pipeline_config(fs::path(D2K_SOURCE_DIR) / "config" / "pipeline.yaml"); }

void point_at(PipelineConfig& c, const fs::path& root) {
  c.store = Endpoint::parse("dir:" + (root / "store").string());
  c.sweep = Endpoint::parse("dir:" + (root / "sweep").string());
  c.report_dir = root / "reports";
}

// ---------------------------------------------------------------- 1

Outcome dynamics_oracle() {
  const auto t0 = Clock::now();
  const auto model = dynamics::default_robot_model();
  std::mt19937_64 rng(2024);
  double worst_power = 0.0;
  for (int k = 0; k < 1000; ++k) {
    worst_power = std::max(worst_power, oracle::power_balance(model, oracle::random_state(model, rng)).relative_error());
  }
  double worst_asym = 0.0;
  int not_pd = 0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::MatrixXd m = oracle::mass_matrix_from_id(model, oracle::random_state(model, rng).q);
    worst_asym = std::max(worst_asym, (m - m.transpose()).cwiseAbs().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
    not_pd += llt.info() == Eigen::Success ? 0 : 1;
  }
  const double t = seconds_since(t0);
  return {worst_power < 1e-6 && worst_asym < 1e-9 && not_pd == 0 && t < 10.0,
          "max power-balance rel err " + fmt(worst_power) + " (< 1e-6), max |M - M^T| " + fmt(worst_asym) +
              " (< 1e-9), non-PD " + std::to_string(not_pd) + "/100, " + fmt(t, 3) + " s (< 10 s)"};
}

// ---------------------------------------------------------------- 2

Outcome analytic_ground_truth() {
  const auto arm = oracle::two_link_arm(1.3, 0.7, 0.9, 0.6);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  double worst_g = 0.0;
  for (int k = 0; k < 200; ++k) {
    dynamics::JointState s = dynamics::JointState::zero(2);
    s.q << u(rng), u(rng);
    const auto tau = dynamics::inverse_dynamics(arm, s);
    const auto ref = oracle::two_link_gravity_torque(s.q[0], s.q[1], 1.3, 0.7, 0.9, 0.6);
    worst_g = std::max(worst_g, (tau - ref).cwiseAbs().maxCoeff());
  }
  double worst_v = 0.0;
  std::uniform_real_distribution<double> dq(-2.0, 2.0), dur(0.2, 5.0);
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd a(3), b(3);
    for (int j = 0; j < 3; ++j) {
      a[j] = dq(rng);
      b[j] = dq(rng);
    }
    const double T = dur(rng);
    const trajectory::QuinticSegment seg(a, b, T);
    const Eigen::VectorXd want = 1.875 * (b - a) / T;
    worst_v = std::max(worst_v, (seg.at(T / 2).qd - want).cwiseAbs().maxCoeff());
  }
  return {worst_g < 1e-9 && worst_v < 1e-12, "2-link gravity max err " + fmt(worst_g) +
                                                  " N m (< 1e-9), quintic midpoint velocity max err " + fmt(worst_v) +
                                                  " (< 1e-12)"};
}

// ---------------------------------------------------------------- 3

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Index n_in = 21, n_out = 7, T = 6, B = 2;
  learner::Network net = learner::Network::init(n_in, n_out, 1, 4, 31);
  for (Eigen::Index i = 0; i < net.layers[0].b.size(); ++i) net.layers[0].b[i] = 0.5 * u(rng);
  Eigen::MatrixXd x(n_in, T * B), y(n_out, T * B);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = u(rng);

  learner::Gradients grad = learner::zeros_like(net);
  learner::loss_and_gradient(net, x, y, B, 0, grad);
  auto analytic = oracle::lstm_parameters(grad);
  auto params = oracle::lstm_parameters(net);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double keep = *params[p];
    *params[p] = keep + h;
    const double up = oracle::lstm_batch_mae(net, x, y, B);
    *params[p] = keep - h;
    const double down = oracle::lstm_batch_mae(net, x, y, B);
    *params[p] = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(*analytic[p]), 1e-6});
    worst = std::max(worst, std::abs(numeric - *analytic[p]) / scale);
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 60.0, std::to_string(params.size()) + " parameters, max rel err " + fmt(worst) +
                                        " (< 1e-4), " + fmt(t, 3) + " s (< 60 s)"};
}

// ---------------------------------------------------------------- 4

Outcome dataset_totals() {
  const std::vector<std::tuple<std::string, std::size_t, std::size_t>> sites{
      {"LLT", 1284, 230627}, {"ITA", 316, 87950}, {"WZL", 933, 236102}};
  store::ShadowStore s;
  std::uint64_t seed = 0;
  for (const auto& [site, n_traj, n_meas] : sites) {
    std::vector<store::TrajectoryRecord> batch;
    for (std::size_t i = 0; i < n_traj; ++i) {
      const std::size_t len = n_meas / n_traj + (i < n_meas % n_traj ? 1 : 0);
      batch.push_back(fixture::make_record(seed++, len, site, store::Purpose::train, "inst", 1));
    }
    s.ingest_batch(std::move(batch));
  }
  const auto st = s.stats({});
  bool sites_ok = true;
  for (const auto& [site, n_traj, n_meas] : sites) {
    sites_ok = sites_ok && st.per_site.at(site).trajectories == n_traj && st.per_site.at(site).measurements == n_meas;
  }
  return {sites_ok && st.total.trajectories == 2533 && st.total.measurements == 554679,
          "totals " + std::to_string(st.total.trajectories) + " trajectories / " +
              std::to_string(st.total.measurements) + " measurements per axis (want 2533 / 554679)"};
}

// ---------------------------------------------------------------- benchmark campaign (5, 6, 7, 9)

struct SeedRun {
  fs::path root;
  BenchmarkReport report;
  std::map<std::string, std::vector<sweep::HistoryEntry>> history;  // by target key
  std::vector<learner::EvalReport> evaluations;
};

struct Campaign {
  std::vector<SeedRun> seeds;
  double seconds = 0.0;
};

const Campaign& campaign() {
  static std::unique_ptr<Campaign> c;
  if (c) return *c;
  c = std::make_unique<Campaign>();
  const auto t0 = Clock::now();
  for (int s = 0; s < 3; ++s) {
    SeedRun run;
    run.root = fixture::temp_dir("acc-bench" + std::to_string(s));
    auto config = shipped_config();
    point_at(config, run.root);
    config.seed = 7000 + static_cast<std::uint64_t>(s);
    for (auto& site : config.sites) {
      site.train = 20;
      site.validation = 5;
      site.evaluation = 1;
    }
    config.training.max_windows = 32;
    config.benchmark.foundation_epochs = 60;
    {
      auto services = connect(config);
      for (const auto& site : config.sites) run_site(config, site, *services.store);
      BenchmarkOptions opt;
      opt.configs_per_round = 5;
      opt.epochs = 20;
      run.report = run_benchmark(config, services, opt);
      for (const auto& t : {sweep::Target::foundation(), sweep::Target::instance(config.benchmark.target_instance)}) {
        run.history[t.key()] = services.sweep->history(t);
      }
    }
    write_benchmark_artifacts(run.report, run.root / "reports");
    render_report(run.root / "reports");
    for (const auto& e : fs::directory_iterator(run.root / "sweep" / "evals")) {
      run.evaluations.push_back(learner::eval_report_from_json(learner::Json::parse(read_file(e.path()))));
    }
    c->seeds.push_back(std::move(run));
  }
  c->seconds = seconds_since(t0);
  return *c;
}

// ---------------------------------------------------------------- 5

Outcome gating_monotonicity() {
  // Accepted losses over every repository touched by the benchmark runs.
  int sequences = 0, violations = 0;
  for (const auto& run : campaign().seeds) {
    for (const auto& [key, h] : run.history) {
      double last = std::numeric_limits<double>::infinity();
      for (const auto& e : h) {
        if (!e.accepted) continue;
        violations += e.loss > last ? 1 : 0;
        last = e.loss;
      }
      ++sequences;
    }
  }

  // Eight concurrent socket agents over 100 rounds; some configs are never
  // reported and must be expired when the round closes.
  const auto dir = fixture::temp_dir("acc-gate");
  sweep::Coordinator coordinator(dir / "repo");
  sweep::SweepServer server(coordinator, dir / "sweep.sock");
  server.start();
  learner::HyperParams tiny;
  tiny.n_recurrent_layers = 1;
  tiny.hidden_size = 16;
  const auto ckpt_base = learner::init_model(tiny, 1);
  std::set<std::string> ids;
  std::mutex mu;
  int reported = 0, dropped = 0, duplicates = 0, ledger_errors = 0, report_errors = 0;
  std::vector<double> accepted_losses;
  for (int round = 0; round < 100; ++round) {
    sweep::RoundSpec spec;
    spec.seed = static_cast<std::uint64_t>(round);
    spec.configs_per_round = 10;
    const auto round_id = coordinator.open_round(spec);
    std::vector<std::thread> agents;
    for (int a = 0; a < 8; ++a) {
      agents.emplace_back([&, a] {
        sweep::RemoteSweep client(dir / "sweep.sock", "agent-" + std::to_string(a));
        std::mt19937_64 rng(mix_seed(round, a));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        while (auto cfg = client.request_config(round_id, "agent-" + std::to_string(a))) {
          {
            std::lock_guard lock(mu);
            duplicates += ids.insert(cfg->config_id).second ? 0 : 1;
          }
          if (u(rng) < 0.05) {
            std::lock_guard lock(mu);
            ++dropped;
            continue;
          }
          auto ckpt = ckpt_base;
          ckpt.net.readout.b[0] = u(rng);
          learner::assign_id(ckpt);
          const double loss = u(rng);
          try {
            const bool acc = client.report_result(round_id, cfg->config_id, ckpt, loss);
            std::lock_guard lock(mu);
            ++reported;
            if (acc) accepted_losses.push_back(loss);
          } catch (const std::exception&) {
            std::lock_guard lock(mu);
            ++report_errors;
          }
        }
      });
    }
    for (auto& t : agents) t.join();
    const auto st = coordinator.close_round(round_id);
    int issued = 0, rep = 0, exp = 0;
    for (const auto& c : coordinator.ledger(round_id)) {
      ++issued;
      rep += c.status == sweep::ConfigStatus::reported ? 1 : 0;
      exp += c.status == sweep::ConfigStatus::expired ? 1 : 0;
    }
    if (issued != 10 || rep + exp != 10 || st.issued != 10 || st.reported != rep || st.expired != exp || st.open) {
      ++ledger_errors;
    }
  }
  server.stop();
  // The repository's history is the serialized order of gate decisions.
  const auto history = coordinator.history(sweep::Target::foundation());
  int history_violations = 0, n_accepted = 0;
  double last = std::numeric_limits<double>::infinity();
  for (const auto& e : history) {
    if (!e.accepted) continue;
    ++n_accepted;
    history_violations += e.loss < last ? 0 : 1;
    last = e.loss;
  }
  const bool ok = violations == 0 && sequences > 0 && duplicates == 0 && ids.size() == 1000 && ledger_errors == 0 &&
                  report_errors == 0 && history_violations == 0 &&
                  history.size() == static_cast<std::size_t>(reported) &&
                  n_accepted == static_cast<int>(accepted_losses.size());
  return {ok, std::to_string(sequences) + " benchmark repositories with " + std::to_string(violations) +
                  " increases; 8 agents x 100 rounds: " + std::to_string(ids.size()) + " unique ids, " +
                  std::to_string(duplicates) + " duplicates, " + std::to_string(reported) + " reported + " +
                  std::to_string(dropped) + " expired, ledger mismatches " + std::to_string(ledger_errors) +
                  ", accepted " + std::to_string(n_accepted) + " with " + std::to_string(history_violations) +
                  " non-decreasing steps"};
}

// ---------------------------------------------------------------- 6

Outcome transfer_ordering() {
  using sweep::Setup;
  const auto& c = campaign();
  int pass_a = 0, pass_b = 0, pass_c = 0;
  std::ostringstream detail;
  for (std::size_t s = 0; s < c.seeds.size(); ++s) {
    const auto& r = c.seeds[s].report;
    const auto& A = r.result(Setup::end_to_end);
    const auto& B = r.result(Setup::finetune_foundation);
    const auto& C = r.result(Setup::finetune_instance_known_hp);
    const auto& D = r.result(Setup::finetune_instance_unknown_hp);
    const double n = static_cast<double>(A.runs.size());
    // Wall time at A's run count, from each setup's mean per-run time.
    const double ta = A.total_wall_seconds, tb = B.mean_wall_seconds() * n, tc = C.mean_wall_seconds() * n,
                 td = D.mean_wall_seconds() * n;
    const bool a = tb < ta && tc < ta && td < ta;
    const bool b = B.first_run_validation_mae() <= 1.25 * B.best_validation_mae();
    const bool cc = C.runs.size() == 1 && C.best_validation_mae() <= 1.1 * A.best_validation_mae();
    pass_a += a;
    pass_b += b;
    pass_c += cc;
    detail << " seed" << s << ": time A/B/C/D " << fmt(ta, 3) << "/" << fmt(tb, 3) << "/" << fmt(tc, 3) << "/"
           << fmt(td, 3) << " s " << (a ? "ok" : "x") << ", B first/best " << fmt(B.first_run_validation_mae())
           << "/" << fmt(B.best_validation_mae()) << " " << (b ? "ok" : "x") << ", C/A-best "
           << fmt(C.best_validation_mae()) << "/" << fmt(A.best_validation_mae()) << " " << (cc ? "ok" : "x") << ";";
  }
  const bool ok = pass_a >= 2 && pass_b >= 2 && pass_c >= 2 && c.seconds < 1800.0;
  return {ok, "majority (a) " + std::to_string(pass_a) + "/3, (b) " + std::to_string(pass_b) + "/3, (c) " +
                  std::to_string(pass_c) + "/3, " + fmt(c.seconds, 4) + " s (< 1800 s);" + detail.str()};
}

// ---------------------------------------------------------------- 7

Outcome mae_bounds() {
  const auto t0 = Clock::now();
  const auto root = fixture::temp_dir("acc-mae");
  auto config = shipped_config();
  point_at(config, root);
  config.seed = 31;
  auto services = connect(config);
  for (auto site : config.sites) {
    if (site.instance_id == config.benchmark.target_instance) continue;
    site.train = 20;
    site.validation = 0;
    site.evaluation = 0;
    run_site(config, site, *services.store);
    // Evaluation motions with noiseless labels.
    auto spec = site_spec(config, site, store::Purpose::evaluation);
    spec.count = 1;
    spec.noise_sigma = 0.0;
    for (auto& r : generate_records(dynamics::apply_perturbation(config.robot, site.perturbation), spec)) {
      services.store->ingest(std::move(r));
    }
  }
  store::DatasetQuery tq;
  tq.purpose = store::Purpose::train;
  const auto train = learner::to_dataset(services.store->query(tq));
  store::DatasetQuery eq;
  eq.purpose = store::Purpose::evaluation;
  const auto eval = learner::to_dataset(services.store->query(eq));

  auto hp = config.benchmark.foundation_params;
  hp.epochs = 100;
  hp.rng_seed = 17;
  learner::TrainOptions opt;
  opt.max_windows = 512;
  opt.cross_validate = false;
  const auto fit = learner::train(train, hp, opt);
  const auto report = learner::evaluate(fit.ckpt, eval, config.robot, config.sensor_floor);

  // Constant-predictor baseline: per-joint mean absolute deviation of the
  // evaluation targets about their mean, averaged over joints.
  const Eigen::MatrixXd y = learner::stack_targets(eval);
  double mad = 0.0;
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    const double mean = y.row(j).mean();
    mad += (y.row(j).array() - mean).abs().mean();
  }
  mad /= static_cast<double>(y.rows());

  std::vector<learner::EvalReport> all{report};
  for (const auto& run : campaign().seeds) all.insert(all.end(), run.evaluations.begin(), run.evaluations.end());
  int out_of_bounds = 0;
  for (const auto& r : all) {
    const bool in = r.mae >= 0.0 && r.mae <= r.theoretical_max_mae && (r.per_joint_mae.array() >= 0.0).all();
    out_of_bounds += in ? 0 : 1;
  }
  return {out_of_bounds == 0 && report.mae < mad,
          std::to_string(all.size()) + " evaluation reports, " + std::to_string(out_of_bounds) +
              " outside [0, theoretical max]; foundation evaluation MAE " + fmt(report.mae) +
              " N m vs constant-predictor MAD " + fmt(mad) + " N m (theoretical max " +
              fmt(report.theoretical_max_mae) + "), " + fmt(seconds_since(t0), 3) + " s"};
}

// ---------------------------------------------------------------- 8

Outcome k2d_loop() {
  const auto root = fixture::temp_dir("acc-k2d");
  auto config = shipped_config();
  point_at(config, root);
  config.seed = 77;
  auto services = connect(config);
  const std::size_t joint = 2;
  const auto k = static_cast<Eigen::Index>(joint);
  const double span = config.robot.q_max[k] - config.robot.q_min[k];
  for (auto site : config.sites) {
    // Joint 2 never visits the lowest 30 % of its range.
    site.workspace.per_joint.assign(7, std::nullopt);
    site.workspace.per_joint[joint] = std::make_pair(config.robot.q_min[k] + 0.3 * span, config.robot.q_max[k]);
    site.train = 10;
    site.validation = site.evaluation = 0;
    run_site(config, site, *services.store);
  }
  const auto query = coverage_query(config);
  auto opt = scan_options(config);
  opt.joints = {joint};
  const auto before = services.store->histogram(query, joint, opt.n_bins);
  const auto directives = k2d_directives(*services.store, query, 7, opt);
  std::size_t added = 0;
  for (std::size_t i = 0; i < directives.size(); ++i) {
    added += apply_directive(config, directives[i], *services.store, i).size();
  }
  const auto after = services.store->histogram(query, joint, opt.n_bins);
  const auto min_before = *std::min_element(before.counts.begin(), before.counts.end());
  const auto min_after = *std::min_element(after.counts.begin(), after.counts.end());
  return {!directives.empty() && min_after > min_before,
          std::to_string(directives.size()) + " directives on joint 2, " + std::to_string(added) +
              " trajectories added, min-bin occupancy " + std::to_string(min_before) + " -> " +
              std::to_string(min_after)};
}

// ---------------------------------------------------------------- 9

std::string serialize_all(const std::vector<store::RecordPtr>& rs) {
  std::string out;
  for (const auto& r : rs) out += store::serialize_record(*r) + "\n";
  return out;
}

Outcome round_trip() {
  const auto root = fixture::temp_dir("acc-rt");
  auto config = shipped_config();
  // JSONL lines as written by `d2k generate`, ordered by timestamp.
  std::string input;
  int n = 0;
  for (const auto& site : config.sites) {
    for (auto purpose : {store::Purpose::train, store::Purpose::evaluation}) {
      auto spec = site_spec(config, site, purpose);
      spec.count = 2;
      for (auto& r : generate_records(dynamics::apply_perturbation(config.robot, site.perturbation), spec)) {
        r.record_id = make_uuid();
        r.created_utc = format_utc(std::chrono::system_clock::time_point{} + std::chrono::hours(490000) +
                                   std::chrono::milliseconds(n++));
        input += store::serialize_record(r) + "\n";
      }
    }
  }
  std::vector<store::DatasetQuery> queries(5);
  queries[1].purpose = store::Purpose::evaluation;
  queries[2].instance_ids = {"arm-b"};
  queries[3].velocity_scaling = store::Range{0.3, 0.6};
  queries[4].limit = 3;
  std::vector<std::string> before;
  std::string echoed;
  {
    store::ShadowStore s(root / "store");
    std::istringstream in(input);
    for (std::string line; std::getline(in, line);) s.ingest(store::parse_record(line));
    echoed = serialize_all(s.query({}));
    for (const auto& q : queries) before.push_back(serialize_all(s.query(q)));
  }
  store::ShadowStore reopened(root / "store");
  int restart_mismatch = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    restart_mismatch += serialize_all(reopened.query(queries[i])) == before[i] ? 0 : 1;
  }

  int svg_mismatch = 0, svgs = 0;
  for (const auto& run : campaign().seeds) {
    const auto dir = run.root / "reports";
    const auto copy = run.root / "reports-rerender";
    fs::create_directories(copy);
    for (const char* f : {"runs.csv", "mae_trend.csv", "summary.csv"}) {
      fs::copy_file(dir / f, copy / f, fs::copy_options::overwrite_existing);
    }
    render_report(copy);
    for (const char* f : {"runtime_boxplot.svg", "mae_trend.svg"}) {
      ++svgs;
      svg_mismatch += read_file(dir / f) == read_file(copy / f) ? 0 : 1;
    }
  }
  return {echoed == input && restart_mismatch == 0 && svg_mismatch == 0 && svgs > 0,
          std::to_string(n) + " records re-serialized " + (echoed == input ? "byte-identical" : "DIFFERENT") +
              ", " + std::to_string(queries.size() - restart_mismatch) + "/" + std::to_string(queries.size()) +
              " queries identical after restart, " + std::to_string(svgs - svg_mismatch) + "/" +
              std::to_string(svgs) + " SVGs identical when re-rendered from CSV"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dynamics oracle", dynamics_oracle},
      {"analytic ground truth", analytic_ground_truth},
      {"gradient check", gradient_check},
      {"dataset summary totals", dataset_totals},
      {"gating monotonicity", gating_monotonicity},
      {"transfer-learning ordering", transfer_ordering},
      {"MAE bounds", mae_bounds},
      {"K2D loop", k2d_loop},
      {"round-trip determinism", round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
